"""Large-scale radio channel: path loss, geometric LOS, shadowing, antenna gains.

Path loss follows the urban-microcell street-canyon formulas (UMa available
as an option). LOS/NLOS is deterministic geometric blockage by the building
blocks. Shadowing is a log-normal field with exponential spatial
autocorrelation. Scalar operations here are the contract surface; the
GainField class is the vectorized equivalent the slot engine uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Rect, segment_crosses_rect, segments_cross_rect
from .scenario import Layout, Node, NodeKind

LIGHT_SPEED = 299_792_458.0
N_RBS = 22
SUBCARRIERS_PER_RB = 12
TOTAL_SUBCARRIERS = N_RBS * SUBCARRIERS_PER_RB  # 264
NOISE_PER_SUBCARRIER_DBM = -174.0
NOISE_FIGURE_DB = 9.0
NOISE_PER_RB_DBM = NOISE_PER_SUBCARRIER_DBM + 10.0 * math.log10(SUBCARRIERS_PER_RB) + NOISE_FIGURE_DB
SIGMA_SF_LOS_DB = 4.0
SIGMA_SF_NLOS_DB = 7.82

LOS = "LOS"
NLOS = "NLOS"

# Count of distance clamps (d3d < 1 m) applied by path_loss_db.
CLAMP_WARNINGS = {"count": 0}


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, float) / 10.0) if isinstance(db, np.ndarray) else 10.0 ** (db / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


@dataclass
class LinkGainState:
    tx_id: int
    rx_id: int
    los: str
    path_loss_db: float
    shadowing_db: float
    antenna_gain_db: float  # sum of tx + rx element gains
    beamforming_gain_db: float
    tx_power_dbm: float = 0.0


@dataclass
class RsrpReport:
    mt_id: int
    donor_id: int
    rsrp_dbm: float
    slot: int


def determine_los(tx: Node, rx: Node, layout: Layout) -> str:
    """LOS iff the ground-plane segment tx->rx misses every block interior.

    Boundary contact (endpoint on an edge/corner, grazing along an edge)
    does not block.
    """
    px, py = tx.position[0], tx.position[1]
    qx, qy = rx.position[0], rx.position[1]
    for blk in layout.blocks:
        if segment_crosses_rect(px, py, qx, qy, blk):
            return NLOS
    return LOS


def _breakpoint_distance(h_bs: float, h_ut: float, fc_ghz: float, h_env: float = 1.0) -> float:
    h_bs_eff = max(h_bs - h_env, 0.0)
    h_ut_eff = max(h_ut - h_env, 0.0)
    return 4.0 * h_bs_eff * h_ut_eff * fc_ghz * 1e9 / LIGHT_SPEED


def path_loss_db(d3d, fc_ghz: float = 28.0, los: str = LOS, *, h_bs: float = 25.0, h_ut: float = 1.5, model: str = "umi"):
    """Urban path loss in dB. Accepts scalars or numpy arrays for d3d.

    NLOS returns max(LOS value, NLOS formula). Distances below 1 m are
    clamped to 1 m and counted in CLAMP_WARNINGS.
    """
    d = np.asarray(d3d, dtype=float)
    scalar = d.ndim == 0
    d = np.atleast_1d(d)
    n_clamped = int(np.count_nonzero(d < 1.0))
    if n_clamped:
        CLAMP_WARNINGS["count"] += n_clamped
        d = np.maximum(d, 1.0)
    lf = 20.0 * math.log10(fc_ghz)
    dh = abs(h_bs - h_ut)
    d2d = np.sqrt(np.maximum(d * d - dh * dh, 0.0))
    dbp = _breakpoint_distance(h_bs, h_ut, fc_ghz)

    if model == "umi":
        pl1 = 32.4 + 21.0 * np.log10(d) + lf
        if dbp > 0:
            pl2 = 32.4 + 40.0 * np.log10(d) + lf - 9.5 * math.log10(dbp * dbp + dh * dh)
        else:
            pl2 = pl1
        pl_los = np.where(d2d <= dbp, pl1, pl2) if dbp > 0 else pl1
        if los == LOS:
            out = pl_los
        else:
            pl_nlos = 35.3 * np.log10(d) + 22.4 + 21.3 * math.log10(fc_ghz) - 0.3 * (h_ut - 1.5)
            out = np.maximum(pl_los, pl_nlos)
    elif model == "uma":
        pl1 = 28.0 + 22.0 * np.log10(d) + lf
        if dbp > 0:
            pl2 = 28.0 + 40.0 * np.log10(d) + lf - 9.0 * math.log10(dbp * dbp + dh * dh)
        else:
            pl2 = pl1
        pl_los = np.where(d2d <= dbp, pl1, pl2) if dbp > 0 else pl1
        if los == LOS:
            out = pl_los
        else:
            pl_nlos = 13.54 + 39.08 * np.log10(d) + lf - 0.6 * (h_ut - 1.5)
            out = np.maximum(pl_los, pl_nlos)
    else:
        raise ValueError(f"unknown path loss model {model!r}")
    return float(out[0]) if scalar else out


def element_gain_db(antenna, az_off_deg, el_off_deg):
    """3GPP 3-D element pattern (65 deg beamwidths, 30 dB floor) or omni.

    az_off_deg / el_off_deg are offsets from the boresight direction;
    accepts scalars or arrays.
    """
    if antenna.pattern == "omni":
        shape = np.broadcast(np.asarray(az_off_deg), np.asarray(el_off_deg)).shape
        out = np.full(shape, antenna.max_element_gain_dbi)
        return float(out) if out.ndim == 0 else out
    a_h = -np.minimum(12.0 * (np.asarray(az_off_deg, float) / 65.0) ** 2, 30.0)
    a_v = -np.minimum(12.0 * (np.asarray(el_off_deg, float) / 65.0) ** 2, 30.0)
    a = -np.minimum(-(a_h + a_v), 30.0)
    out = antenna.max_element_gain_dbi + a
    return float(out) if np.ndim(out) == 0 else out


def antenna_gain_db(node: Node, toward) -> float:
    """Element gain of `node` toward a 3-D direction vector (not normalized)."""
    v = np.asarray(toward, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("direction must be non-zero")
    if node.antenna.pattern == "omni":
        return float(node.antenna.max_element_gain_dbi)
    bx, by = node.antenna.boresight_az
    dot = v[0] * bx + v[1] * by
    cross = v[0] * by - v[1] * bx
    az_off = abs(math.degrees(math.atan2(cross, dot)))
    zen = math.degrees(math.acos(max(min(v[2] / norm, 1.0), -1.0)))
    el_off = zen - (90.0 + node.antenna.tilt_deg)
    return float(element_gain_db(node.antenna, az_off, el_off))


def beamforming_gain_db(tx_array_size: int, rx_array_size: int) -> float:
    """Fixed array-gain bonus applied on serving links only."""
    return 10.0 * math.log10(max(tx_array_size, rx_array_size, 1))


def rsrp_dbm(donor: Node, mt: Node, gains: LinkGainState) -> float:
    """Per-resource-element RSRP over the 264-subcarrier grid."""
    return (
        donor.tx_power_dbm
        - 10.0 * math.log10(TOTAL_SUBCARRIERS)
        + gains.antenna_gain_db
        + gains.beamforming_gain_db
        - gains.path_loss_db
        - gains.shadowing_db
    )


def _received_dbm(state: LinkGainState) -> float:
    return (
        state.tx_power_dbm
        + state.antenna_gain_db
        + state.beamforming_gain_db
        - state.path_loss_db
        - state.shadowing_db
    )


def sinr_linear(serving: LinkGainState, interferers, n_rbs_shared: int) -> float:
    """SINR over n_rbs_shared resource blocks, linear units.

    Received powers are full transmit powers scaled by the allocated-RB
    fraction (uniform power spectral density over the 22-RB grid); noise is
    the per-RB floor aggregated over the shared RBs. Interferers are
    (LinkGainState, active) pairs already restricted to co-scheduled
    transmitters on the same RBs.
    """
    if n_rbs_shared <= 0:
        return 0.0
    frac = n_rbs_shared / N_RBS
    s_mw = db_to_linear(_received_dbm(serving)) * frac
    n_mw = db_to_linear(NOISE_PER_RB_DBM) * n_rbs_shared
    i_mw = 0.0
    for state, active in interferers:
        if active:
            i_mw += db_to_linear(_received_dbm(state)) * frac
    return s_mw / (n_mw + i_mw)


class ShadowingStream:
    """Log-normal shadowing for one directed link, AR(1) in travelled distance.

    The normalized state z is unit-variance Gaussian; successive samples are
    correlated exp(-displacement/decorrelation). The first sample is a fresh
    draw regardless of displacement.
    """

    def __init__(self, sigma_db: float, decorrelation_m: float = 13.0, rng: np.random.Generator | None = None):
        self.sigma_db = sigma_db
        self.decorrelation_m = decorrelation_m
        self.rng = rng if rng is not None else np.random.default_rng()
        self.z: float | None = None

    def sample(self, displacement_m: float = 0.0) -> float:
        if self.z is None:
            self.z = float(self.rng.standard_normal())
        else:
            rho = math.exp(-abs(displacement_m) / self.decorrelation_m)
            self.z = rho * self.z + math.sqrt(max(1.0 - rho * rho, 0.0)) * float(self.rng.standard_normal())
        return self.sigma_db * self.z


def shadowing_db(stream: ShadowingStream, displacement_m: float = 0.0) -> float:
    """Draw the next shadowing value (dB) for a link's stream."""
    return stream.sample(displacement_m)


@dataclass
class ChannelConfig:
    fc_ghz: float = 28.0
    pathloss_model: str = "umi"  # "umi" | "uma"
    shadowing_enabled: bool = True
    fast_fading_enabled: bool = False
    decorrelation_distance_m: float = 13.0
    gain_refresh_period_slots: int = 40


class GainField:
    """Cached pairwise large-scale gains for all nodes, refreshed periodically.

    Maintains, per directed node pair: LOS state, path loss, element gains,
    shadowing (AR-correlated against the change in relative geometry), and
    the composed linear power gains for serving links (with the array bonus)
    and interfering links (element gains only).
    """

    def __init__(self, nodes, layout: Layout, cfg: ChannelConfig, seed: int):
        self.cfg = cfg
        self.layout = layout
        self.nodes = nodes.nodes
        self.n = len(self.nodes)
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5AD0D0])))
        n = self.n
        self.heights = np.array([nd.height for nd in self.nodes])
        self.tx_power_dbm = np.array([nd.tx_power_dbm for nd in self.nodes])
        self.tx_power_mw = 10.0 ** (self.tx_power_dbm / 10.0)
        arr = np.array([nd.antenna.array_size for nd in self.nodes], dtype=float)
        self.bf_db = 10.0 * np.log10(np.maximum(arr[:, None], arr[None, :]))
        self._patterned = [nd for nd in self.nodes if nd.antenna.pattern == "3gpp3d"]
        self.z = np.zeros((n, n))  # normalized shadowing field
        self._z_init = False
        self._prev_rel: np.ndarray | None = None
        self.positions = np.zeros((n, 3))
        self.los = np.ones((n, n), dtype=bool)
        self.pl_db = np.zeros((n, n))
        self.el_db = np.zeros((n, n))
        self.sh_db = np.zeros((n, n))
        self.serv_gain_lin = np.ones((n, n))
        self.intf_gain_lin = np.ones((n, n))
        self.clamp_count = 0

    def refresh(self, positions: np.ndarray) -> None:
        n = self.n
        self.positions = positions
        diff = positions[None, :, :] - positions[:, None, :]  # [i, j] = pos_j - pos_i
        d3d = np.sqrt((diff * diff).sum(axis=2))
        np.fill_diagonal(d3d, 1.0)
        self.clamp_count += int(np.count_nonzero(d3d < 1.0))  # diagonal excluded by the fill
        d3d = np.maximum(d3d, 1.0)

        # geometric blockage, symmetric
        blocked = np.zeros((n, n), dtype=bool)
        iu = np.triu_indices(n, k=1)
        p = positions[iu[0]][:, :2]
        q = positions[iu[1]][:, :2]
        hit = np.zeros(len(iu[0]), dtype=bool)
        for blk in self.layout.blocks:
            hit |= segments_cross_rect(p, q, blk)
        blocked[iu] = hit
        blocked |= blocked.T
        self.los = ~blocked

        # path loss, elementwise with per-pair heights (higher node acts as BS)
        h_hi = np.maximum(self.heights[:, None], self.heights[None, :])
        h_lo = np.minimum(self.heights[:, None], self.heights[None, :])
        self.pl_db = _path_loss_matrix(d3d, self.cfg.fc_ghz, self.los, h_hi, h_lo, self.cfg.pathloss_model)

        # element gains of node i toward node j
        el = np.zeros((n, n))
        for nd in self._patterned:
            i = nd.id
            dx, dy, dz = diff[i, :, 0], diff[i, :, 1], diff[i, :, 2]
            bx, by = nd.antenna.boresight_az
            dot = dx * bx + dy * by
            cross = dx * by - dy * bx
            az_off = np.degrees(np.abs(np.arctan2(cross, dot)))
            zen = np.degrees(np.arccos(np.clip(dz / d3d[i], -1.0, 1.0)))
            el_off = zen - (90.0 + nd.antenna.tilt_deg)
            a_h = -np.minimum(12.0 * (az_off / 65.0) ** 2, 30.0)
            a_v = -np.minimum(12.0 * (el_off / 65.0) ** 2, 30.0)
            el[i, :] = nd.antenna.max_element_gain_dbi - np.minimum(-(a_h + a_v), 30.0)
            el[i, i] = 0.0
        self.el_db = el

        # shadowing: AR(1) against change in relative geometry per pair
        if self.cfg.shadowing_enabled:
            rel = diff  # (n, n, 3)
            eps = self.rng.standard_normal((n, n))
            if not self._z_init:
                self.z = eps
                self._z_init = True
            else:
                d_rel = np.sqrt(((rel - self._prev_rel) ** 2).sum(axis=2))
                rho = np.exp(-d_rel / self.cfg.decorrelation_distance_m)
                self.z = rho * self.z + np.sqrt(np.maximum(1.0 - rho * rho, 0.0)) * eps
            self._prev_rel = rel.copy()
            sigma = np.where(self.los, SIGMA_SF_LOS_DB, SIGMA_SF_NLOS_DB)
            self.sh_db = sigma * self.z
        else:
            self.sh_db = np.zeros((n, n))

        total_el = self.el_db + self.el_db.T
        base = total_el - self.pl_db - self.sh_db
        self.serv_gain_lin = 10.0 ** ((base + self.bf_db) / 10.0)
        self.intf_gain_lin = 10.0 ** (base / 10.0)

    def link_state(self, tx: int, rx: int, serving: bool) -> LinkGainState:
        return LinkGainState(
            tx_id=tx,
            rx_id=rx,
            los=LOS if self.los[tx, rx] else NLOS,
            path_loss_db=float(self.pl_db[tx, rx]),
            shadowing_db=float(self.sh_db[tx, rx]),
            antenna_gain_db=float(self.el_db[tx, rx] + self.el_db[rx, tx]),
            beamforming_gain_db=float(self.bf_db[tx, rx]) if serving else 0.0,
            tx_power_dbm=float(self.tx_power_dbm[tx]),
        )

    def rsrp_dbm(self, donor_id: int, mt_id: int) -> float:
        return (
            float(self.tx_power_dbm[donor_id])
            - 10.0 * math.log10(TOTAL_SUBCARRIERS)
            + float(self.el_db[donor_id, mt_id] + self.el_db[mt_id, donor_id])
            + float(self.bf_db[donor_id, mt_id])
            - float(self.pl_db[donor_id, mt_id])
            - float(self.sh_db[donor_id, mt_id])
        )


def _path_loss_matrix(d3d, fc_ghz, los_mask, h_bs, h_ut, model):
    lf = 20.0 * np.log10(fc_ghz)
    dh = h_bs - h_ut
    dbp = 4.0 * np.maximum(h_bs - 1.0, 0.0) * np.maximum(h_ut - 1.0, 0.0) * fc_ghz * 1e9 / LIGHT_SPEED
    d2d = np.sqrt(np.maximum(d3d * d3d - dh * dh, 0.0))
    log_d = np.log10(d3d)
    with np.errstate(divide="ignore"):
        log_bp = np.log10(np.maximum(dbp * dbp + dh * dh, 1e-12))
    if model == "umi":
        pl1 = 32.4 + 21.0 * log_d + lf
        pl2 = 32.4 + 40.0 * log_d + lf - 9.5 * log_bp
        pl_los = np.where((dbp > 0) & (d2d > dbp), pl2, pl1)
        pl_nlos = 35.3 * log_d + 22.4 + 21.3 * np.log10(fc_ghz) - 0.3 * (h_ut - 1.5)
    elif model == "uma":
        pl1 = 28.0 + 22.0 * log_d + lf
        pl2 = 28.0 + 40.0 * log_d + lf - 9.0 * log_bp
        pl_los = np.where((dbp > 0) & (d2d > dbp), pl2, pl1)
        pl_nlos = 13.54 + 39.08 * log_d + lf - 0.6 * (h_ut - 1.5)
    else:
        raise ValueError(f"unknown path loss model {model!r}")
    return np.where(los_mask, pl_los, np.maximum(pl_los, pl_nlos))
