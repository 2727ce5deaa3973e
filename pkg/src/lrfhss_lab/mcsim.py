"""Monte-Carlo event simulator of the LR-FHSS uplink process.

Each trial places devices, draws unslotted-ALOHA start times, generates
hopping sequences, resolves every fragment against its co-channel
overlaps (noise threshold plus sum-interference capture), and decodes
packets.  The D2D variant adds clustering, the four-packet cluster
exchange, and the retransmission fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry, netcode
from .analytic import DataRateProfile, DR5, LinkBudget, noise_power_dbm
from .channel import ShadowedRiceParams, sample_power

#: slot-edge margin rule: a packet is tracked for outage statistics only if
#: its whole window fits in [ToA, T - 2*ToA] (avoids censoring); all
#: packets interfere regardless.
_TRACK_LO_TOAS = 1.0
_TRACK_HI_TOAS = 2.0

#: time on air of one LoRa SF12 D2D packet (500 kHz, 30-byte payload)
LORA_SF12_TOA_S = 0.493


@dataclass(frozen=True)
class Scenario:
    geometry: geometry.SatelliteGeometry = field(default_factory=geometry.SatelliteGeometry)
    fading: ShadowedRiceParams = field(
        default_factory=lambda: ShadowedRiceParams(0.126, 10.1, 0.835))
    link: LinkBudget = field(default_factory=LinkBudget)
    dr: DataRateProfile = DR5
    slot_s: float = 291.1
    n_users: int = 1000
    area_scale: float = 1.0
    d2d_enabled: bool = False
    d_max_km: float = 1.5
    p_lora_success: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.slot_s <= 0.0:
            raise ValueError("slot must be positive")
        if not 0.0 < self.area_scale <= 1.0:
            raise ValueError("area_scale must be in (0, 1]")
        if self.d2d_enabled:
            # worst-case airtime: two DR5 packets plus one SF12 LoRa D2D
            # transmission (500 kHz, 30-byte payload) must fit the 1% duty
            # cycle; the default 291.1 s slot satisfies this with equality
            worst = 2.0 * DR5.toa_s() + LORA_SF12_TOA_S
            if worst > 0.01 * self.slot_s + 1e-9:
                raise ValueError("slot too short for 1% duty cycle with D2D")

    @property
    def area_km2(self) -> float:
        return geometry.footprint_area_km2(self.geometry, self.slot_s) * self.area_scale

    @property
    def density_per_km2(self) -> float:
        return self.n_users / self.area_km2


@dataclass(frozen=True)
class FragmentEvent:
    owner: int
    packet: int
    kind: str                # "header" | "payload"
    start_s: float
    duration_s: float
    group: int
    carrier: int
    rx_power_mw: float
    snr_linear: float


@dataclass(frozen=True)
class OutageReport:
    outage_estimate: float
    std_error: float
    trials: int
    loss_breakdown: dict

    def __post_init__(self):
        if not 0.0 <= self.outage_estimate <= 1.0:
            raise ValueError("estimate must be a probability")


# ---------------------------------------------------------------------------
# Traffic, hopping, fragment resolution
# ---------------------------------------------------------------------------

def generate_traffic(rng: np.random.Generator, scenario: Scenario) -> np.ndarray:
    """One uniform packet start per device in [0, T)."""
    return rng.uniform(0.0, scenario.slot_s, scenario.n_users)


def generate_hops(rng: np.random.Generator, dr: DataRateProfile) -> tuple[int, np.ndarray]:
    """Random group plus an i.i.d. carrier sequence for one packet."""
    group = int(rng.integers(dr.groups))
    carriers = rng.integers(dr.carriers_per_group, size=dr.n_hdr + dr.n_pl)
    return group, carriers


def resolve_fragment(frag: FragmentEvent, cochannel, link: LinkBudget) -> bool:
    """True iff the fragment survives noise and the capture test against
    the summed co-channel interference."""
    if frag.snr_linear <= link.snr_threshold_linear:
        return False
    interference = sum(o.rx_power_mw for o in cochannel)
    if interference == 0.0:
        return True
    return frag.rx_power_mw / interference > link.sir_threshold_linear


def decode_packet(fragment_outcomes, dr: DataRateProfile) -> bool:
    """Header condition: at least one replica survives; payload condition:
    fewer than omega fragments lost."""
    outcomes = list(fragment_outcomes)
    if len(outcomes) != dr.n_hdr + dr.n_pl:
        raise ValueError("need one outcome per fragment")
    if not any(outcomes[:dr.n_hdr]):
        return False
    lost_payload = sum(1 for ok in outcomes[dr.n_hdr:] if not ok)
    return lost_payload < dr.omega()


def cluster_devices(positions, d_max_km: float):
    """Greedy nearest-neighbor pairing: repeatedly match the closest
    unpaired neighbor within range.  Returns (pairs, singles) as index
    lists."""
    n = len(positions)
    if n and hasattr(positions[0], "along_track_km"):
        xy = np.array([[p.along_track_km, p.cross_track_km] for p in positions])
    else:
        xy = np.asarray(positions, dtype=float).reshape(n, 2)
    # uniform grid with d_max cells: candidates live in the 3x3 neighborhood
    cells: dict[tuple[int, int], list[int]] = {}
    def cell_of(i):
        return (int(math.floor(xy[i, 0] / d_max_km)),
                int(math.floor(xy[i, 1] / d_max_km)))
    for i in range(n):
        cells.setdefault(cell_of(i), []).append(i)

    unpaired = set(range(n))
    pairs = []
    for i in range(n):
        if i not in unpaired:
            continue
        cx, cy = cell_of(i)
        best = None
        best_d2 = d_max_km * d_max_km
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                for j in cells.get((cx + ox, cy + oy), ()):
                    if j == i or j not in unpaired:
                        continue
                    dx = xy[i, 0] - xy[j, 0]
                    dy = xy[i, 1] - xy[j, 1]
                    d2 = dx * dx + dy * dy
                    if d2 < best_d2:
                        best_d2 = d2
                        best = j
        if best is not None:
            pairs.append((i, best))
            unpaired.discard(i)
            unpaired.discard(best)
    return pairs, sorted(unpaired)


# ---------------------------------------------------------------------------
# Packet machinery shared by both trial kinds
# ---------------------------------------------------------------------------

class _PacketSim:
    """Accumulates packets, then resolves all fragments bucketed by
    (group, carrier) with a sort-and-sweep per bucket."""

    def __init__(self, scenario: Scenario, rng: np.random.Generator):
        self.sc = scenario
        self.rng = rng
        self.link = scenario.link
        self.dr = scenario.dr
        sigma2_dbm = noise_power_dbm(self.link.noise_figure_db, self.dr.obw_hz)
        self.sigma2_mw = 10.0 ** (sigma2_dbm / 10.0)
        self.eirp_mw = self.link.eirp_mw
        # fragments: per (group, carrier) -> list of (start, end, power, owner)
        self.buckets: dict[tuple[int, int], list] = {}
        self.packets: list[dict] = []

    def sample_gain(self) -> float:
        r = self.sc.geometry.footprint_radius_km * math.sqrt(self.rng.uniform())
        elev = geometry.elevation_from_ground_distance(r, self.sc.geometry)
        return geometry.path_gain_linear(elev, self.link.frequency_mhz,
                                         self.sc.geometry)

    def add_packet(self, owner: int, start: float, gain: float) -> int:
        """Queue one LR-FHSS packet; returns its packet id."""
        dr = self.dr
        group, carriers = generate_hops(self.rng, dr)
        pid = len(self.packets)
        frags = []
        t = start
        for j in range(dr.n_hdr + dr.n_pl):
            dur = dr.t_hdr_s if j < dr.n_hdr else dr.t_pl_s
            h2 = sample_power(self.rng, self.sc.fading)
            power = self.eirp_mw * gain * h2
            key = (group, int(carriers[j]))
            entry = (t, t + dur, power, owner, pid, j)
            self.buckets.setdefault(key, []).append(entry)
            frags.append(entry)
            t += dur
        self.packets.append({"owner": owner, "start": start, "frags": frags})
        return pid

    def resolve(self) -> tuple[list[list[bool]], list[list[bool]]]:
        """Per-fragment outcomes plus a parallel by-noise flag (True when
        the fragment already failed the SNR test, before any capture)."""
        for entries in self.buckets.values():
            entries.sort()
        n_frag = self.dr.n_hdr + self.dr.n_pl
        outcomes = [[False] * n_frag for _ in self.packets]
        by_noise = [[False] * n_frag for _ in self.packets]
        psi = self.link.snr_threshold_linear
        delta = self.link.sir_threshold_linear
        for key, entries in self.buckets.items():
            m = len(entries)
            for idx, (s, e, power, owner, pid, j) in enumerate(entries):
                if power / self.sigma2_mw <= psi:
                    by_noise[pid][j] = True
                    continue
                interference = 0.0
                # sweep neighbors; entries sorted by start
                for o in range(idx - 1, -1, -1):
                    s2, e2, p2, ow2, _, _ = entries[o]
                    if e2 <= s:
                        # earlier starts may still overlap; but with sorted
                        # starts, a gap does not bound earlier entries whose
                        # durations differ, so keep scanning while plausible
                        if s - s2 > 2.0 * self.dr.t_hdr_s + self.dr.t_pl_s:
                            break
                        continue
                    if ow2 != owner:
                        interference += p2
                for o in range(idx + 1, m):
                    s2, e2, p2, ow2, _, _ = entries[o]
                    if s2 >= e:
                        break
                    if ow2 != owner:
                        interference += p2
                if interference > 0.0 and power / interference <= delta:
                    continue
                outcomes[pid][j] = True
        return outcomes, by_noise


def _loss_label(outcomes, by_noise, dr: DataRateProfile) -> str:
    """Attribute a lost packet to deep fade, header collision, or payload
    FEC failure."""
    if all(by_noise[j] for j, ok in enumerate(outcomes) if not ok):
        return "noise"
    if not any(outcomes[:dr.n_hdr]):
        return "header_loss"
    return "payload_loss"


def _tracked_window(scenario: Scenario) -> tuple[float, float]:
    toa = scenario.dr.toa_s()
    return _TRACK_LO_TOAS * toa, scenario.slot_s - _TRACK_HI_TOAS * toa - toa


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

def run_lrfhss_trial(rng: np.random.Generator, scenario: Scenario) -> OutageReport:
    """One slot of the plain LR-FHSS network; outage over tracked packets."""
    if scenario.d2d_enabled:
        raise ValueError("use run_d2d_trial for D2D scenarios")
    sim = _PacketSim(scenario, rng)
    starts = generate_traffic(rng, scenario)
    for dev in range(scenario.n_users):
        sim.add_packet(dev, float(starts[dev]), sim.sample_gain())
    outcomes, by_noise = sim.resolve()

    lo, hi = _tracked_window(scenario)
    tracked = lost = 0
    breakdown = {"noise": 0, "header_loss": 0, "payload_loss": 0,
                 "d2d_unavailable": 0}
    for pkt, out, noisy in zip(sim.packets, outcomes, by_noise):
        if not lo <= pkt["start"] <= hi:
            continue
        tracked += 1
        if not decode_packet(out, scenario.dr):
            lost += 1
            breakdown[_loss_label(out, noisy, scenario.dr)] += 1
    est = lost / tracked if tracked else 0.0
    se = math.sqrt(est * (1.0 - est) / tracked) if tracked else 0.0
    return OutageReport(est, se, tracked, breakdown)


def run_d2d_trial(rng: np.random.Generator, scenario: Scenario) -> OutageReport:
    """One slot of the D2D-aided network.

    Clustered pairs with a successful D2D exchange send their originals
    plus GF(4) parities; failed-D2D pairs and singles fall back to plain
    retransmission.  A tagged device's data is recovered if its original
    decodes, or (cooperative case) any two of the four cluster packets
    decode and the cluster code inverts.
    """
    if not scenario.d2d_enabled:
        raise ValueError("scenario must have d2d_enabled")
    sim = _PacketSim(scenario, rng)
    positions = geometry.sample_positions(
        rng, scenario.n_users, scenario.geometry,
        scenario.slot_s * scenario.area_scale)
    pairs, singles = cluster_devices(positions, scenario.d_max_km)

    toa = scenario.dr.toa_s()
    sessions = []   # (kind, device(s), packet ids)

    def two_starts():
        # original then parity/repeat after a random back-off, both
        # inside the slot
        t1 = rng.uniform(0.0, scenario.slot_s - 2.5 * toa)
        t2 = t1 + toa + rng.uniform(0.0, scenario.slot_s - t1 - 2.0 * toa)
        return t1, t2

    for i, j in pairs:
        coop = rng.uniform() < scenario.p_lora_success
        gi, gj = sim.sample_gain(), sim.sample_gain()
        ti = two_starts()
        tj = two_starts()
        pids = (sim.add_packet(i, ti[0], gi), sim.add_packet(j, tj[0], gj),
                sim.add_packet(i, ti[1], gi), sim.add_packet(j, tj[1], gj))
        sessions.append(("coop" if coop else "rt_pair", (i, j), pids))
    for i in singles:
        g = sim.sample_gain()
        t1, t2 = two_starts()
        pids = (sim.add_packet(i, t1, g), sim.add_packet(i, t2, g))
        sessions.append(("rt_single", (i,), pids))

    outcomes, by_noise = sim.resolve()

    def packet_ok(pid: int) -> bool:
        return decode_packet(outcomes[pid], scenario.dr)

    lo, hi = _tracked_window(scenario)
    tracked = lost = 0
    breakdown = {"noise": 0, "header_loss": 0, "payload_loss": 0,
                 "d2d_unavailable": 0}

    symbols0 = netcode.bytes_to_symbols(b"\xa5")
    symbols1 = netcode.bytes_to_symbols(b"\x3c")

    for kind, devs, pids in sessions:
        if kind == "coop":
            ok = [packet_ok(p) for p in pids]
            for slot_idx, dev in enumerate(devs):
                if not lo <= sim.packets[pids[slot_idx]]["start"] <= hi:
                    continue
                tracked += 1
                own_sym = symbols0 if slot_idx == 0 else symbols1
                other_sym = symbols1 if slot_idx == 0 else symbols0
                recovered = ok[slot_idx]
                if not recovered and sum(ok) >= 2:
                    cw = netcode.encode_cluster(
                        own_sym if slot_idx == 0 else other_sym,
                        other_sym if slot_idx == 0 else own_sym,
                        received_mask=tuple(ok))
                    try:
                        o0, o_ne = netcode.decode_cluster(cw)
                        recovered = (o0, o_ne) == (cw.o0, cw.o_ne)
                    except netcode.DecodeFailure:
                        recovered = False
                if not recovered:
                    lost += 1
                    own_pid = pids[slot_idx]
                    breakdown[_loss_label(outcomes[own_pid], by_noise[own_pid],
                                          scenario.dr)] += 1
        else:
            # RT: device data recovered iff either copy of its own packet
            # decodes; pids alternate per device for pairs
            per_dev = {d: [] for d in devs}
            if kind == "rt_pair":
                per_dev[devs[0]] = [pids[0], pids[2]]
                per_dev[devs[1]] = [pids[1], pids[3]]
            else:
                per_dev[devs[0]] = list(pids)
            for dev, dev_pids in per_dev.items():
                if not lo <= sim.packets[dev_pids[0]]["start"] <= hi:
                    continue
                tracked += 1
                if not any(packet_ok(p) for p in dev_pids):
                    lost += 1
                    # no cooperative protection was available for this loss
                    breakdown["d2d_unavailable"] += 1
    est = lost / tracked if tracked else 0.0
    se = math.sqrt(est * (1.0 - est) / tracked) if tracked else 0.0
    return OutageReport(est, se, tracked, breakdown)


def estimate(reports) -> OutageReport:
    """Pool per-trial reports into one estimate with binomial SE."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one trial")
    total = sum(r.trials for r in reports)
    lost = sum(r.outage_estimate * r.trials for r in reports)
    breakdown: dict = {}
    for r in reports:
        for k, v in r.loss_breakdown.items():
            breakdown[k] = breakdown.get(k, 0) + v
    est = lost / total if total else 0.0
    se = math.sqrt(est * (1.0 - est) / total) if total else 0.0
    return OutageReport(est, se, total, breakdown)


def run_campaign(scenario: Scenario, trials: int) -> OutageReport:
    """Run independent trials with per-trial RNG streams derived from the
    scenario seed."""
    reports = []
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence((scenario.seed, t)))
        if scenario.d2d_enabled:
            reports.append(run_d2d_trial(rng, scenario))
        else:
            reports.append(run_lrfhss_trial(rng, scenario))
    return estimate(reports)
