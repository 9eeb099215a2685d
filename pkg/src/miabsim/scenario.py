"""Madrid-grid scenario: layout construction, node placement, and mobility.

Three square building blocks sit side by side along the x axis with one
street between consecutive blocks. The bus street runs in front of the
blocks (negative y); each block's donor sits on the opposite (north) edge.
Pedestrians shuttle along the sidewalk ring of their home block; the bus
(carrying the mIAB node and its passengers) drives a straight line along
the bus street.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import Polyline, Rect, fold_reflect, fold_reflect_array, segment_crosses_rect

SLOT_DURATION_S = 0.25e-3


class NodeKind(Enum):
    DONOR = "donor"
    MIAB_MT = "miab_mt"
    MIAB_DU = "miab_du"
    PEDESTRIAN_UE = "pedestrian_ue"
    PASSENGER_UE = "passenger_ue"


@dataclass(frozen=True)
class AntennaConfig:
    pattern: str  # "3gpp3d" | "omni"
    max_element_gain_dbi: float
    tilt_deg: float
    array: str  # "ula64" | "ura8x8" | "single"
    boresight_az: tuple[float, float] = (0.0, -1.0)  # unit vector, ground plane

    @property
    def array_size(self) -> int:
        return {"ula64": 64, "ura8x8": 64, "single": 1}[self.array]


# Entity characteristics: height [m], tx power [dBm], antenna per kind.
ENTITY_TABLE = {
    NodeKind.DONOR: (25.0, 35.0, AntennaConfig("3gpp3d", 8.0, 12.0, "ula64")),
    NodeKind.MIAB_DU: (2.5, 24.0, AntennaConfig("3gpp3d", 8.0, 4.0, "ura8x8")),
    NodeKind.MIAB_MT: (3.5, 24.0, AntennaConfig("omni", 0.0, 0.0, "ula64")),
    NodeKind.PEDESTRIAN_UE: (1.5, 24.0, AntennaConfig("omni", 0.0, 0.0, "single")),
    NodeKind.PASSENGER_UE: (1.8, 24.0, AntennaConfig("omni", 0.0, 0.0, "single")),
}


@dataclass
class Node:
    id: int
    kind: NodeKind
    position: np.ndarray  # (3,) [x, y, z]
    height: float
    tx_power_dbm: float
    antenna: AntennaConfig
    speed_mps: float


@dataclass
class MobilityState:
    """Arc-length shuttle state on a polyline."""

    path: Polyline
    s0: float
    direction: int  # +1 or -1 at t=0
    speed_mps: float
    s: float = 0.0
    heading: int = 1

    def __post_init__(self):
        self.s = self.s0
        self.heading = self.direction

    def step(self, dt: float) -> float:
        """Advance by speed*dt, reflecting at the path ends. Returns new arc position."""
        length = self.path.length
        s = self.s + self.heading * self.speed_mps * dt
        while s < 0.0 or s > length:
            if s < 0.0:
                s = -s
                self.heading = -self.heading
            else:
                s = 2.0 * length - s
                self.heading = -self.heading
        self.s = s
        return s

    def position_at_time(self, t: float) -> np.ndarray:
        """Closed-form position after t seconds from the initial state."""
        return self.path.point_at(fold_reflect(self.s0 + self.direction * self.speed_mps * t, self.path.length))


@dataclass
class Layout:
    blocks: list[Rect]
    street_segments: list[Polyline]
    bounds: Rect
    bus_trajectory: Polyline
    sidewalks: list[Polyline]  # one ring per block

    def validate(self) -> None:
        if len(self.blocks) != 3:
            raise ScenarioError(f"expected exactly 3 blocks, got {len(self.blocks)}")
        for i, a in enumerate(self.blocks):
            for b in self.blocks[i + 1 :]:
                if a.overlaps(b):
                    raise ScenarioError("blocks overlap")
        pts = self.bus_trajectory.points
        for i in range(len(pts) - 1):
            for blk in self.blocks:
                if segment_crosses_rect(pts[i][0], pts[i][1], pts[i + 1][0], pts[i + 1][1], blk):
                    raise ScenarioError("bus trajectory intersects a building block")
                if blk.contains_open(pts[i][0], pts[i][1]):
                    raise ScenarioError("bus trajectory intersects a building block")


class ScenarioError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    block_size_m: float = 120.0
    street_width_m: float = 21.0
    ped_counts: tuple[int, int, int] = (5, 40, 5)  # per donor, donor 2 is central
    passenger_count: int = 6
    bus_speed_kmh: float = 50.0
    ped_speed_kmh: float = 3.0
    donor_placement: str = "mid_edge"  # "mid_edge" | "corner"
    # street length driven past the outer blocks on each side; calibrated so
    # the RSRP-only policy splits its attachment time evenly across donors
    trajectory_overhang_m: float = 40.0
    sidewalk_margin_m: float = 2.0


@dataclass
class NodeSet:
    nodes: list[Node]
    donor_ids: list[int]
    mt_id: int
    du_id: int
    passenger_ids: list[int]
    pedestrian_ids: list[int]
    ped_home_donor: dict[int, int]  # ped node id -> donor node id
    bus_mobility: MobilityState
    ped_mobility: dict[int, MobilityState]
    passenger_dx: dict[int, float]  # rigid x offset from bus reference point
    finished: bool = False
    elapsed_s: float = field(default=0.0)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def bus_rigid_ids(self) -> list[int]:
        return [self.mt_id, self.du_id, *self.passenger_ids]

    def _position_cache(self):
        cache = getattr(self, "_pos_cache", None)
        if cache is not None:
            return cache
        base = np.empty((len(self.nodes), 3))
        for n in self.nodes:
            base[n.id] = n.position
        rigid = np.array(self.bus_rigid_ids(), dtype=np.int64)
        rigid_dx = np.array([self.passenger_dx.get(int(nid), 0.0) for nid in rigid])
        ped_ids = np.array(sorted(self.ped_mobility), dtype=np.int64)
        rings: list[Polyline] = []
        ring_idx = np.zeros(len(ped_ids), dtype=np.int64)
        s0 = np.zeros(len(ped_ids))
        direction = np.zeros(len(ped_ids))
        speed = np.zeros(len(ped_ids))
        for k, nid in enumerate(ped_ids):
            mob = self.ped_mobility[int(nid)]
            if mob.path not in rings:
                rings.append(mob.path)
            ring_idx[k] = rings.index(mob.path)
            s0[k] = mob.s0
            direction[k] = mob.direction
            speed[k] = mob.speed_mps
        cache = (base, rigid, rigid_dx, ped_ids, rings, ring_idx, s0, direction, speed)
        self._pos_cache = cache
        return cache

    def positions_at_time(self, t: float) -> np.ndarray:
        """Closed-form (n, 3) positions t seconds after scenario start."""
        base, rigid, rigid_dx, ped_ids, rings, ring_idx, s0, direction, speed = self._position_cache()
        pos = base.copy()
        bus = self.bus_mobility
        bus_xy = bus.path.point_at(min(max(bus.s0 + bus.speed_mps * t, 0.0), bus.path.length))
        pos[rigid, 0] = bus_xy[0] + rigid_dx
        pos[rigid, 1] = bus_xy[1]
        if len(ped_ids):
            for ri, ring in enumerate(rings):
                sel = ring_idx == ri
                if not sel.any():
                    continue
                s = fold_reflect_array(s0[sel] + direction[sel] * speed[sel] * t, ring.length)
                pos[ped_ids[sel], :2] = ring.points_at(s)
        return pos

    def trajectory_slots(self) -> int:
        """Number of slots for the bus to traverse its full trajectory."""
        v = self.bus_mobility.speed_mps
        return int(math.ceil(self.bus_mobility.path.length / (v * SLOT_DURATION_S) - 1e-9))


def _sidewalk_ring(block: Rect, margin: float) -> Polyline:
    x0, y0, x1, y1 = block.xmin - margin, block.ymin - margin, block.xmax + margin, block.ymax + margin
    return Polyline([(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)])


def _make_node(node_id: int, kind: NodeKind, xy, speed_mps: float) -> Node:
    height, tx_dbm, antenna = ENTITY_TABLE[kind]
    pos = np.array([xy[0], xy[1], height], dtype=float)
    return Node(node_id, kind, pos, height, tx_dbm, antenna, speed_mps)


def build_scenario(config: ScenarioConfig, seed: int) -> tuple[Layout, NodeSet]:
    """Place blocks, donors, the bus (MT + DU + passengers) and pedestrians.

    Deterministic for a given (config, seed). Raises ScenarioError on invalid
    configs (negative UE counts, no passengers, trajectory through a block).
    """
    b = config.block_size_m
    w = config.street_width_m
    if b <= 0 or w <= 0:
        raise ScenarioError("block_size_m and street_width_m must be positive")
    if len(config.ped_counts) != 3:
        raise ScenarioError("ped_counts must list one count per donor (3 entries)")
    if any(c < 0 for c in config.ped_counts):
        raise ScenarioError("pedestrian counts must be >= 0")
    if config.passenger_count <= 0:
        raise ScenarioError("passenger_count must be >= 1")
    if config.donor_placement not in ("mid_edge", "corner"):
        raise ScenarioError(f"unknown donor_placement {config.donor_placement!r}")

    blocks = [Rect(i * (b + w), 0.0, i * (b + w) + b, b) for i in range(3)]
    total_x = blocks[-1].xmax
    overhang = config.trajectory_overhang_m
    bus_y = -w / 2.0
    trajectory = Polyline([(-overhang, bus_y), (total_x + overhang, bus_y)])
    sidewalks = [_sidewalk_ring(blk, config.sidewalk_margin_m) for blk in blocks]
    margin = config.sidewalk_margin_m + 5.0
    bounds = Rect(-overhang - margin, -w - margin, total_x + overhang + margin, b + margin)
    layout = Layout(
        blocks=blocks,
        street_segments=[trajectory, *sidewalks],
        bounds=bounds,
        bus_trajectory=trajectory,
        sidewalks=sidewalks,
    )
    layout.validate()

    bus_speed = config.bus_speed_kmh / 3.6
    ped_speed = config.ped_speed_kmh / 3.6
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5CE9A210])))

    nodes: list[Node] = []
    donor_ids: list[int] = []
    for i, blk in enumerate(blocks):
        if config.donor_placement == "mid_edge":
            xy = (0.5 * (blk.xmin + blk.xmax), blk.ymax)
        else:
            xy = (blk.xmax, blk.ymax)
        node = _make_node(len(nodes), NodeKind.DONOR, xy, 0.0)
        nodes.append(node)
        donor_ids.append(node.id)

    bus_mobility = MobilityState(path=trajectory, s0=0.0, direction=1, speed_mps=bus_speed)
    bus_xy = trajectory.point_at(0.0)

    mt = _make_node(len(nodes), NodeKind.MIAB_MT, bus_xy, bus_speed)
    nodes.append(mt)
    du = _make_node(len(nodes), NodeKind.MIAB_DU, bus_xy, bus_speed)
    nodes.append(du)

    passenger_ids: list[int] = []
    passenger_dx: dict[int, float] = {}
    n_pass = config.passenger_count
    for k in range(n_pass):
        # seats spread along an ~11 m bus, centred on the reference point
        dx = (k - (n_pass - 1) / 2.0) * (9.0 / max(n_pass - 1, 1)) if n_pass > 1 else 0.0
        node = _make_node(len(nodes), NodeKind.PASSENGER_UE, (bus_xy[0] + dx, bus_xy[1]), bus_speed)
        nodes.append(node)
        passenger_ids.append(node.id)
        passenger_dx[node.id] = dx

    pedestrian_ids: list[int] = []
    ped_home_donor: dict[int, int] = {}
    ped_mobility: dict[int, MobilityState] = {}
    for donor_idx, count in enumerate(config.ped_counts):
        ring = sidewalks[donor_idx]
        for _ in range(count):
            s0 = float(rng.uniform(0.0, ring.length))
            direction = 1 if rng.random() < 0.5 else -1
            xy = ring.point_at(s0)
            node = _make_node(len(nodes), NodeKind.PEDESTRIAN_UE, xy, ped_speed)
            nodes.append(node)
            pedestrian_ids.append(node.id)
            ped_home_donor[node.id] = donor_ids[donor_idx]
            ped_mobility[node.id] = MobilityState(path=ring, s0=s0, direction=direction, speed_mps=ped_speed)

    return layout, NodeSet(
        nodes=nodes,
        donor_ids=donor_ids,
        mt_id=mt.id,
        du_id=du.id,
        passenger_ids=passenger_ids,
        pedestrian_ids=pedestrian_ids,
        ped_home_donor=ped_home_donor,
        bus_mobility=bus_mobility,
        ped_mobility=ped_mobility,
        passenger_dx=passenger_dx,
    )


def advance_mobility(nodes: NodeSet, layout: Layout, dt: float = SLOT_DURATION_S) -> NodeSet:
    """Advance all mobile nodes by dt seconds (in place; returns the same set).

    The bus moves along its trajectory and clamps at the end (setting
    `finished`); the mIAB MT/DU and all passengers move rigidly with it.
    Pedestrians shuttle along their sidewalk ring, reflecting at the ends.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0:
        return nodes
    nodes.elapsed_s += dt
    bus = nodes.bus_mobility
    s = bus.s + bus.speed_mps * dt
    if s >= bus.path.length:
        s = bus.path.length
        nodes.finished = True
    bus.s = s
    bus_xy = bus.path.point_at(s)
    by_id = {n.id: n for n in nodes.nodes}
    for nid in nodes.bus_rigid_ids():
        node = by_id[nid]
        node.position[0] = bus_xy[0] + nodes.passenger_dx.get(nid, 0.0)
        node.position[1] = bus_xy[1]
    for nid, mob in nodes.ped_mobility.items():
        mob.step(dt)
        xy = mob.path.point_at(mob.s)
        node = by_id[nid]
        node.position[0] = xy[0]
        node.position[1] = xy[1]
    return nodes
