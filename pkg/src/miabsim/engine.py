"""The slot engine: wires scenario, channel, MAC, traffic, topology and
metrics into a deterministic single-threaded simulation run.

Per-slot order: mobility -> gain refresh -> traffic arrivals -> direction ->
scheduling -> half-duplex filter -> SINR with co-scheduled interferers ->
capacity -> buffer drain/forward -> topology adaptation (if due) -> metrics.
"""
from __future__ import annotations

import math

import numpy as np

from . import mac, topology, traffic
from .channel import GainField, NOISE_PER_RB_DBM
from .config import RunConfig
from .mac import DL, UL, N_RBS, RbAllocation, SlotContext
from .metrics import MetricsLedger
from .scenario import SLOT_DURATION_S, build_scenario
from .topology import AttachmentRecord, DonorCandidate, filter_rsrp
from .traffic import Flow, FlowBuffer, Packet

# routing actions on packet completion at a hop
_DELIVER = 0
_TO_DU_DL = 1
_TO_MT_UL = 2

_HOP_ACTION = {
    traffic.DONOR_ACCESS_DL: _DELIVER,
    traffic.DU_ACCESS_DL: _DELIVER,
    traffic.UE_ACCESS_UL: _DELIVER,
    traffic.MT_BACKHAUL_UL: _DELIVER,
    traffic.DONOR_BACKHAUL_DL: _TO_DU_DL,
    traffic.PASSENGER_ACCESS_UL: _TO_MT_UL,
}


class Link:
    __slots__ = ("link_id", "tx", "rx", "cell", "direction", "hop", "buffer", "flow_id", "action")

    def __init__(self, link_id, tx, rx, cell, direction, hop, owner_id, flow_id=None):
        self.link_id = link_id
        self.tx = tx
        self.rx = rx
        self.cell = cell
        self.direction = direction
        self.hop = hop
        self.buffer = FlowBuffer(hop, owner_id)
        self.flow_id = flow_id
        self.action = _HOP_ACTION[hop]


class ConservationError(AssertionError):
    pass


class SimState:
    """Everything one run owns. Deterministic given (config, seed).

    strict_checks turns on full per-slot RB-set validation (used by the test
    suite); the cheap per-cell RB budget check always runs.
    """

    def __init__(self, cfg: RunConfig, seed: int, strict_checks: bool = False):
        self.cfg = cfg
        self.seed = seed
        self.strict_checks = strict_checks
        self.layout, self.nodes = build_scenario(cfg.scenario, seed)
        self.slot = 0
        self.n_slots = cfg.run.duration_slots or self.nodes.trajectory_slots()
        self.gain = GainField(self.nodes, self.layout, cfg.channel, seed)
        self.du_cell = len(self.nodes.donor_ids)  # cells: one per donor, then the DU cell
        self.n_cells = self.du_cell + 1

        self._fading_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xFAD0])))

        self._build_flows_and_links()
        self.attachments: list[AttachmentRecord] = []
        self.n_ta_events = 0
        self.filtered_rsrp: list[float | None] = [None] * len(self.nodes.donor_ids)

        m = cfg.metrics
        self.ledger = MetricsLedger(window_slots=m.window_slots, snapshot_cadence=m.snapshot_cadence_slots)
        self.ledger.n_slots = self.n_slots
        self.window_bits = np.zeros(len(self.flows), dtype=np.int64)
        self.flow_delivered_bits = np.zeros(len(self.flows), dtype=np.int64)
        self.latency_slot_sum = 0
        self.delivered_packets = 0

        # conservation counters (bits)
        self.offered_bits = 0
        self.delivered_bits = 0
        self.dropped_bits = 0

        self.rotation: dict[tuple[int, str], int] = {}
        self.role_toggle = {DL: 0, UL: 0}
        self._next_packet_id = 0

        # Initial attachment by shadow-averaged RSRP: cell selection integrates
        # measurements over many shadowing coherence lengths, so only the
        # geometric component decides the first parent.
        self.gain.refresh(self.nodes.positions_at_time(0.0))
        mt = self.nodes.mt_id
        geo_rsrp = [
            self.gain.rsrp_dbm(d, mt) + float(self.gain.sh_db[d, mt]) for d in self.nodes.donor_ids
        ]
        self.filtered_rsrp = [self.gain.rsrp_dbm(d, mt) for d in self.nodes.donor_ids]
        self.parent_donor = int(np.argmax(geo_rsrp))
        self._pending_target: int | None = None
        self._pending_count = 0
        self._attach_backhaul(self.parent_donor)
        self.attachments.append(AttachmentRecord(donor_id=self.public_donor_id(self.parent_donor), start_slot=0))
        self.ledger.attachments = self.attachments

        # scratch arrays for the per-slot SINR batch; each cell schedules at
        # most N_RBS chunks per slot
        self._noise_mw_rb = 10.0 ** (NOISE_PER_RB_DBM / 10.0)
        self._bits_per_rb_factor = mac.RES_PER_RB_SLOT * cfg.mac.overhead_factor
        cap = self.n_cells * N_RBS
        self._s_tx = np.empty(cap, np.int64)
        self._s_rx = np.empty(cap, np.int64)
        self._s_start = np.empty(cap, np.float64)
        self._s_size = np.empty(cap, np.float64)
        self._s_cell = np.empty(cap, np.int64)

    # ---------- construction ----------

    def _build_flows_and_links(self):
        nodes = self.nodes
        cfg = self.cfg
        self.flows: list[Flow] = []
        self.links: list[Link] = []
        self.cell_links: dict[int, dict[str, list[Link]]] = {
            c: {DL: [], UL: []} for c in range(self.n_cells)
        }
        self.dl_head_buffers: list[FlowBuffer] = []  # parallel to dl flows order
        self.ul_head_buffers: list[FlowBuffer] = []
        self.flow_of_link: dict[int, int] = {}
        self.du_dl_buffer_by_flow: dict[int, FlowBuffer] = {}

        def add_link(tx, rx, cell, direction, hop, owner, flow_id=None) -> Link:
            link = Link(len(self.links), tx, rx, cell, direction, hop, owner, flow_id)
            self.links.append(link)
            self.cell_links[cell][direction].append(link)
            return link

        gen_flows_dl: list[tuple[Flow, FlowBuffer]] = []
        gen_flows_ul: list[tuple[Flow, FlowBuffer]] = []

        # pedestrian single-hop flows
        for ped in nodes.pedestrian_ids:
            donor = nodes.ped_home_donor[ped]
            if cfg.traffic.pedestrian_traffic:
                fdl = Flow(len(self.flows), ped, "Pedestrian", DL)
                self.flows.append(fdl)
                ldl = add_link(donor, ped, donor, DL, traffic.DONOR_ACCESS_DL, donor, fdl.flow_id)
                gen_flows_dl.append((fdl, ldl.buffer))
                ful = Flow(len(self.flows), ped, "Pedestrian", UL)
                self.flows.append(ful)
                lul = add_link(ped, donor, donor, UL, traffic.UE_ACCESS_UL, ped, ful.flow_id)
                gen_flows_ul.append((ful, lul.buffer))

        # passenger two-hop flows through the mIAB node
        self.passenger_flow_dl: dict[int, int] = {}
        for q in nodes.passenger_ids:
            if cfg.traffic.passenger_traffic:
                fdl = Flow(len(self.flows), q, "Passenger", DL)
                self.flows.append(fdl)
                du_dl = add_link(nodes.du_id, q, self.du_cell, DL, traffic.DU_ACCESS_DL, nodes.du_id, fdl.flow_id)
                self.du_dl_buffer_by_flow[fdl.flow_id] = du_dl.buffer
                self.passenger_flow_dl[q] = fdl.flow_id
                gen_flows_dl.append((fdl, None))  # head buffer = current backhaul DL; patched below
                ful = Flow(len(self.flows), q, "Passenger", UL)
                self.flows.append(ful)
                acc_ul = add_link(q, nodes.du_id, self.du_cell, UL, traffic.PASSENGER_ACCESS_UL, q, ful.flow_id)
                gen_flows_ul.append((ful, acc_ul.buffer))

        # backhaul pair; cell assigned at attach time
        self.backhaul_dl = Link(len(self.links), -1, nodes.mt_id, -1, DL, traffic.DONOR_BACKHAUL_DL, -1)
        self.links.append(self.backhaul_dl)
        self.backhaul_ul = Link(len(self.links), nodes.mt_id, -1, -1, UL, traffic.MT_BACKHAUL_UL, nodes.mt_id)
        self.links.append(self.backhaul_ul)

        self.gen_flows_dl = [(f, buf if buf is not None else self.backhaul_dl.buffer) for f, buf in gen_flows_dl]
        self.gen_flows_ul = gen_flows_ul
        self.all_buffers = [l.buffer for l in self.links]

    def _attach_backhaul(self, donor_idx: int) -> None:
        self.backhaul_dl.tx = donor_idx
        self.backhaul_dl.cell = donor_idx
        self.backhaul_ul.rx = donor_idx
        self.backhaul_ul.cell = donor_idx
        self.cell_links[donor_idx][DL].append(self.backhaul_dl)
        self.cell_links[donor_idx][UL].append(self.backhaul_ul)

    def public_donor_id(self, donor_idx: int) -> int:
        return donor_idx + 1

    def record_attachment(self, new_donor_idx: int, slot_index: int) -> None:
        self.attachments[-1].end_slot = slot_index
        self.attachments.append(
            AttachmentRecord(donor_id=self.public_donor_id(new_donor_idx), start_slot=slot_index)
        )

    # ---------- per-slot pieces ----------

    def _generate_traffic(self, slot: int) -> None:
        tr = self.cfg.traffic
        if slot % tr.inter_arrival_slots != 0:
            return
        size = tr.packet_size_bits
        pid = self._next_packet_id
        for flow, buf in self.gen_flows_dl:
            buf.push(Packet(pid, flow.flow_id, size, slot, size))
            pid += 1
        for flow, buf in self.gen_flows_ul:
            buf.push(Packet(pid, flow.flow_id, size, slot, size))
            pid += 1
        n = pid - self._next_packet_id
        self._next_packet_id = pid
        self.offered_bits += n * size

    def _deliver(self, pkt: Packet, slot: int) -> None:
        pkt.delivered_slot = slot
        self.delivered_bits += pkt.size_bits
        self.flow_delivered_bits[pkt.flow_id] += pkt.size_bits
        self.window_bits[pkt.flow_id] += pkt.size_bits
        self.latency_slot_sum += slot - pkt.created_slot
        self.delivered_packets += 1

    def _serve_link(self, link: Link, capacity: int, slot: int) -> None:
        # hot path: equivalent to FlowBuffer.drain + traffic.forward_completed
        buf = link.buffer
        queue = buf.queue
        action = link.action
        cap = capacity
        while cap > 0 and queue:
            pkt = queue[0]
            rem = pkt.remaining_bits
            if rem > cap:
                pkt.remaining_bits = rem - cap
                buf.total_bits -= cap
                return
            queue.popleft()
            buf.total_bits -= rem
            cap -= rem
            if action == _DELIVER:
                self._deliver(pkt, slot)
            elif action == _TO_DU_DL:
                pkt.remaining_bits = pkt.size_bits
                self.du_dl_buffer_by_flow[pkt.flow_id].push(pkt)
            else:
                pkt.remaining_bits = pkt.size_bits
                self.backhaul_ul.buffer.push(pkt)

    def _backhaul_access_bits(self, direction: str) -> tuple[int, int]:
        if direction == DL:
            backhaul = self.backhaul_dl.buffer.total_bits
            access = sum(l.buffer.total_bits for l in self.cell_links[self.du_cell][DL])
        else:
            backhaul = self.backhaul_ul.buffer.total_bits
            access = sum(l.buffer.total_bits for l in self.cell_links[self.du_cell][UL])
        return backhaul, access

    def _step(self, slot: int) -> None:
        cfg = self.cfg
        refresh_period = cfg.channel.gain_refresh_period_slots
        eval_due = slot > 0 and slot % cfg.ta.evaluation_period_slots == 0
        if (slot > 0 and slot % refresh_period == 0) or (eval_due and slot % refresh_period != 0):
            self.gain.refresh(self.nodes.positions_at_time(slot * SLOT_DURATION_S))

        self._generate_traffic(slot)

        direction = cfg.mac.duplex_pattern[slot % len(cfg.mac.duplex_pattern)]
        ctx = SlotContext(slot_index=slot, direction=direction)

        # per-cell round-robin scheduling over links with buffered bits
        proposed: dict[int, RbAllocation] = {}
        for cell in range(self.n_cells):
            links = self.cell_links[cell][direction]
            active = [(l.link_id, l.buffer.total_bits) for l in links if l.buffer.total_bits > 0]
            if not active:
                continue
            rot_key = (cell, direction)
            rot = self.rotation.get(rot_key, 0)
            alloc = mac.schedule_rbs(cell, direction, active, rotation=rot)
            self.rotation[rot_key] = rot + 1
            proposed[cell] = alloc

        # half-duplex arbitration at the mIAB
        backhaul_link = self.backhaul_dl if direction == DL else self.backhaul_ul
        bh_bits, acc_bits = self._backhaul_access_bits(direction)
        if bh_bits > 0 or acc_bits > 0:
            priority_backhaul = (self.role_toggle[direction] % 2) == 0
            proposed, _winner = mac.enforce_half_duplex(
                ctx,
                proposed,
                miab_cell_id=self.du_cell,
                backhaul_link_id=backhaul_link.link_id,
                backhaul_bits=bh_bits,
                access_bits=acc_bits,
                backhaul_priority=priority_backhaul,
            )
        self.role_toggle[direction] += 1

        # half-duplex invariant accounting (cheap, from the filtered allocations)
        miab_alloc = proposed.get(self.du_cell)
        miab_active = miab_alloc is not None and bool(miab_alloc.chunks)
        bh_scheduled = any(
            backhaul_link.link_id in alloc.chunks for c, alloc in proposed.items() if c != self.du_cell
        )
        if miab_active and bh_scheduled:
            self.ledger.half_duplex_violations += 1

        # flatten scheduled links
        k = 0
        sched_links: list[Link] = []
        for cell, alloc in proposed.items():
            if self.strict_checks and alloc.chunks:
                alloc.validate()
            cell_rbs = 0
            for link_id, (start, size) in alloc.chunks.items():
                link = self.links[link_id]
                self._s_tx[k] = link.tx
                self._s_rx[k] = link.rx
                self._s_start[k] = start
                self._s_size[k] = size
                self._s_cell[k] = cell
                sched_links.append(link)
                cell_rbs += size
                k += 1
            if cell_rbs > N_RBS:
                raise AssertionError(f"cell {cell} allocated {cell_rbs} RBs in slot {slot}")

        if k:
            caps = self._sinr_capacity_batch(k)
            for i, link in enumerate(sched_links):
                c = int(caps[i])
                if c > 0:
                    self._serve_link(link, c, slot)

        if eval_due:
            self._evaluate_topology(slot)

        self._record_metrics(slot)

    def _sinr_capacity_batch(self, k: int) -> np.ndarray:
        g = self.gain
        tx = self._s_tx[:k]
        rx = self._s_rx[:k]
        size = self._s_size[:k]
        start = self._s_start[:k]
        cell = self._s_cell[:k]
        p_tx = g.tx_power_mw[tx]
        s_mw = p_tx * g.serv_gain_lin[tx, rx]
        s_mw *= size
        if self.cfg.channel.fast_fading_enabled:
            s_mw = s_mw * self._fade_factors(k, serving=True)
        end = start + size
        ov = np.minimum(end[:, None], end[None, :])
        ov -= np.maximum(start[:, None], start[None, :])
        np.clip(ov, 0.0, None, out=ov)
        ov *= cell[:, None] != cell[None, :]
        pg = g.intf_gain_lin[tx[None, :], rx[:, None]]
        pg = pg * p_tx[None, :]
        if self.cfg.channel.fast_fading_enabled:
            pg = pg * self._fade_factors(k, serving=False)
        ov *= pg
        i_mw = ov.sum(axis=1)
        # both s and i carry a 1/N_RBS PSD factor; fold it into the noise term
        i_mw += (self._noise_mw_rb * N_RBS) * size
        sinr = s_mw / i_mw
        se = np.log1p(sinr)
        se *= 1.4426950408889634  # 1/ln(2)
        np.minimum(se, self.cfg.mac.se_cap, out=se)
        se *= size * self._bits_per_rb_factor
        return np.floor(se).astype(np.int64)

    def _fade_factors(self, k: int, serving: bool):
        # i.i.d. per-slot flat fading power factors: Rician-like (K = 10 dB)
        # approximated for serving links, Rayleigh for interference.
        if serving:
            kf = 10.0
            sigma = math.sqrt(1.0 / (2.0 * (kf + 1.0)))
            re = self._fading_rng.normal(math.sqrt(kf / (kf + 1.0)), sigma, size=k)
            im = self._fading_rng.normal(0.0, sigma, size=k)
            return re * re + im * im
        return self._fading_rng.exponential(1.0, size=(k, k))

    def _evaluate_topology(self, slot: int) -> None:
        cfg = self.cfg.ta
        mt = self.nodes.mt_id
        a = cfg.l3_filter_coefficient
        for i, d in enumerate(self.nodes.donor_ids):
            inst = self.gain.rsrp_dbm(d, mt)
            self.filtered_rsrp[i] = filter_rsrp(self.filtered_rsrp[i], inst, a)
        candidates = [
            DonorCandidate(donor_id=i, bits=self._donor_load(i), rsrp_dbm=self.filtered_rsrp[i])
            for i in range(len(self.nodes.donor_ids))
        ]
        parent = candidates[self.parent_donor]
        if cfg.policy == "standard":
            target = topology.update_parent_standard(parent, candidates, cfg.hysteresis_db)
            if target == self.parent_donor:
                self._pending_target = None
                self._pending_count = 0
                return
            # A3-style time to trigger: the same winner must hold for
            # time_to_trigger_evals consecutive evaluations
            if target == self._pending_target:
                self._pending_count += 1
            else:
                self._pending_target = target
                self._pending_count = 1
            if self._pending_count >= cfg.time_to_trigger_evals:
                self._pending_target = None
                self._pending_count = 0
                topology.execute_ta(self, target, slot)
        else:
            new_parent = topology.update_parent_load_aware(parent, candidates, cfg)
            if new_parent != self.parent_donor:
                topology.execute_ta(self, new_parent, slot)

    def _donor_load(self, donor_idx: int) -> int:
        return traffic.donor_load_bits(l.buffer for l in self.cell_links[donor_idx][DL])

    def _record_metrics(self, slot: int) -> None:
        m = self.cfg.metrics
        if (slot + 1) % m.window_slots == 0:
            self._close_window(slot + 1 - m.window_slots)
        if slot % m.snapshot_cadence_slots == 0:
            self._snapshot(slot)

    def _close_window(self, window_start: int) -> None:
        self.ledger.add_window(window_start, self.flows, self.window_bits)
        self.window_bits[:] = 0

    def _snapshot(self, slot: int) -> None:
        series = {"mt_ul_bits": self.backhaul_ul.buffer.total_bits}
        for i in range(len(self.nodes.donor_ids)):
            series[f"donor_dl_bits_{self.public_donor_id(i)}"] = self._donor_load(i)
        series["du_dl_bits"] = sum(
            l.buffer.total_bits for l in self.cell_links[self.du_cell][DL]
        )
        self.ledger.add_snapshot(slot, series)
        self._check_conservation(slot)

    def buffered_bits_total(self) -> int:
        """Exact bits alive in the system: queue occupancy plus the already
        transmitted part of each buffer's head packet (receiver reassembly)."""
        total = 0
        for buf in self.all_buffers:
            total += buf.total_bits
            if buf.queue:
                head = buf.queue[0]
                total += head.size_bits - head.remaining_bits
        return total

    def _check_conservation(self, slot: int) -> None:
        buffered = self.buffered_bits_total()
        if self.offered_bits != self.delivered_bits + buffered + self.dropped_bits:
            raise ConservationError(
                f"slot {slot}: offered {self.offered_bits} != delivered {self.delivered_bits} "
                f"+ buffered {buffered} + dropped {self.dropped_bits}"
            )

    # ---------- public API ----------

    def run_slot(self) -> "SimState":
        """Execute one slot and advance the clock."""
        self._step(self.slot)
        self.slot += 1
        return self

    def run(self) -> "SimState":
        while self.slot < self.n_slots:
            self._step(self.slot)
            self.slot += 1
        trailing = self.n_slots % self.cfg.metrics.window_slots
        if trailing:
            self._close_window(self.n_slots - trailing)
        self.attachments[-1].end_slot = self.n_slots
        self.ledger.offered_bits = self.offered_bits
        self.ledger.delivered_bits = self.delivered_bits
        self.ledger.dropped_bits = self.dropped_bits
        self.ledger.n_ta_events = self.n_ta_events
        return self


def run_slot(state: SimState) -> SimState:
    return state.run_slot()


def run_simulation(cfg: RunConfig, seed: int) -> SimState:
    state = SimState(cfg, seed)
    return state.run()
