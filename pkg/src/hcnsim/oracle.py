"""Brute-force reference implementations and the self-check suite.

Everything here recomputes results with naive Python loops, independent of
the vectorised engine, so the two paths can be compared on randomly drawn
small instances (few cells, few users, deterministic channels, tight
capacities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .association import UNSERVED, associate_user
from .channel import sir
from .energy import BsMode, PowerModel
from .simulation import make_engine
from .config import RunConfig, default_config
from .topology import BsKind, NetworkLayout, Position

_PRIORITY = (BsKind.RSBS, BsKind.HSBS, BsKind.CSBS)


@dataclass
class SmallInstance:
    """One randomly drawn mini-network for oracle comparison."""

    kinds: list[BsKind]
    xy: list[tuple[float, float]]
    radius: list[float]
    modes: list[BsMode]
    users: list[tuple[float, float]]
    harvest: list[float]
    sbs_capacity: int
    mbs_capacity: int
    macro_radius: float

    def capacity(self, i: int) -> int:
        return self.mbs_capacity if self.kinds[i] == BsKind.MBS else self.sbs_capacity


def random_instance(rng: np.random.Generator, max_sbs: int = 3,
                    max_users: int = 6) -> SmallInstance:
    macro_radius = 1200.0
    n_sbs = int(rng.integers(1, max_sbs + 1))
    kinds = [BsKind.MBS]
    xy = [(0.0, 0.0)]
    radius = [macro_radius]
    modes = [BsMode.ACTIVE]
    for _ in range(n_sbs):
        kind = BsKind(int(rng.integers(1, 4)))
        kinds.append(kind)
        r = float(rng.uniform(0.0, 0.8 * macro_radius))
        th = float(rng.uniform(0.0, 2.0 * math.pi))
        xy.append((r * math.cos(th), r * math.sin(th)))
        radius.append(float(rng.uniform(150.0, 450.0)))
        if kind == BsKind.CSBS:
            modes.append(BsMode.SLEEP if rng.random() < 0.3 else BsMode.ACTIVE)
        elif kind == BsKind.RSBS:
            modes.append(BsMode.OFF if rng.random() < 0.2 else BsMode.ACTIVE)
        else:
            modes.append(BsMode.ACTIVE)
    n_users = int(rng.integers(0, max_users + 1))
    users = []
    for _ in range(n_users):
        r = macro_radius * math.sqrt(float(rng.random()))
        th = float(rng.uniform(0.0, 2.0 * math.pi))
        users.append((r * math.cos(th), r * math.sin(th)))
    harvest = [float(rng.uniform(20.0, 70.0)) for _ in kinds]
    return SmallInstance(
        kinds=kinds, xy=xy, radius=radius, modes=modes, users=users,
        harvest=harvest,
        sbs_capacity=int(rng.integers(1, 4)),
        mbs_capacity=int(rng.integers(2, 7)),
        macro_radius=macro_radius)


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def oracle_assign(inst: SmallInstance, modes: list[BsMode] | None = None,
                  flat: bool = False) -> list[int]:
    """Assign every user by naive scanning; users processed in id order."""
    modes = inst.modes if modes is None else modes
    left = [inst.capacity(i) for i in range(len(inst.kinds))]
    groups: list[tuple[BsKind, ...]]
    if flat:
        groups = [(BsKind.RSBS, BsKind.HSBS, BsKind.CSBS)]
    else:
        groups = [(k,) for k in _PRIORITY]
    out = []
    for u in inst.users:
        chosen = UNSERVED
        for kinds_now in groups + [(BsKind.MBS,)]:
            best_id, best_d = UNSERVED, math.inf
            for i, kind in enumerate(inst.kinds):
                if kind not in kinds_now or modes[i] != BsMode.ACTIVE or left[i] <= 0:
                    continue
                d = _dist(u, inst.xy[i])
                if d > inst.radius[i]:
                    continue
                if d < best_d or (d == best_d and i < best_id):
                    best_id, best_d = i, d
            if best_id != UNSERVED:
                chosen = best_id
                break
        if chosen != UNSERVED:
            left[chosen] -= 1
        out.append(chosen)
    return out


def oracle_nearest_with_energy(inst: SmallInstance, sbs_model: PowerModel,
                               subcarriers_per_user: int = 1,
                               rf_only: bool = False) -> tuple[list[int], list[BsMode]]:
    """Flat nearest-cell baseline plus the renewable-cell energy rule.

    Any active renewable cell whose slot consumption would exceed its
    harvest switches off (worst deficit first, ties to the lower id) and
    its users are re-homed, until no deficit remains.  The baseline brings
    every BS up first, whatever the instance's modes say.
    """
    modes = [BsMode.ACTIVE] * len(inst.kinds)
    bw = sbs_model.total_bandwidth_hz / sbs_model.n_subcarriers * subcarriers_per_user
    while True:
        assign = oracle_assign(inst, modes=modes, flat=True)
        worst, worst_deficit = -1, 0.0
        for i, kind in enumerate(inst.kinds):
            if kind != BsKind.RSBS or modes[i] != BsMode.ACTIVE:
                continue
            n = sum(1 for a in assign if a == i)
            rf = sbs_model.beta * (n * bw / sbs_model.total_bandwidth_hz) * sbs_model.p_tx_w
            cons = rf if rf_only else sbs_model.p_const_w + rf
            deficit = cons - inst.harvest[i]
            if deficit > 0.0 and (worst < 0 or deficit > worst_deficit):
                worst, worst_deficit = i, deficit
        if worst < 0:
            return assign, modes
        modes[worst] = BsMode.OFF


def oracle_sir(user: tuple[float, float], server: int, active: list[int],
               xy: list[tuple[float, float]], p_tx: list[float],
               alpha: float, cap: float = 1e9) -> float:
    num = 0.0
    den = 0.0
    for i in active:
        d = _dist(user, xy[i])
        rx = p_tx[i] * d ** (-alpha)
        if i == server:
            num = rx
        else:
            den += rx
    if den <= 0.0:
        return cap
    return min(num / den, cap)


# ------------------------------------------------------------------- harness

def _instance_config(inst: SmallInstance) -> RunConfig:
    import dataclasses

    cfg = default_config()
    sbs = dataclasses.replace(cfg.sbs, n_subcarriers=inst.sbs_capacity)
    mbs = dataclasses.replace(cfg.mbs, n_subcarriers=inst.mbs_capacity)
    chan = dataclasses.replace(cfg.channel, deterministic_fading=True)
    return dataclasses.replace(cfg, sbs=sbs, mbs=mbs, channel=chan)


def _instance_engine(inst: SmallInstance):
    layout = NetworkLayout(
        macro_radius_m=inst.macro_radius,
        kinds=tuple(inst.kinds),
        positions=tuple(Position(x, y) for x, y in inst.xy),
        coverage_radii_m=tuple(inst.radius),
        counts=(1, sum(k == BsKind.CSBS for k in inst.kinds),
                sum(k == BsKind.RSBS for k in inst.kinds),
                sum(k == BsKind.HSBS for k in inst.kinds)))
    cfg = _instance_config(inst)
    engine = make_engine(cfg, layout)
    harvest = np.array(inst.harvest)
    engine.new_slot(np.array(inst.users, dtype=float).reshape(-1, 2), harvest)
    engine.modes = np.array([int(m) for m in inst.modes], dtype=np.int8)
    engine.radius = np.array(inst.radius, dtype=float)
    engine.radius[engine.modes == BsMode.OFF] = 0.0
    return engine, cfg


@dataclass
class _Snapshot:
    """Minimal state adapter for the per-user association operation."""

    _xy: np.ndarray
    bs_kinds: np.ndarray
    bs_modes: np.ndarray
    bs_radius_m: np.ndarray
    _capacity: np.ndarray
    _counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self._counts is None:
            self._counts = np.zeros(len(self.bs_kinds), dtype=int)

    def bs_xy(self) -> np.ndarray:
        return self._xy

    def free_user_slots(self) -> np.ndarray:
        return self._capacity - self._counts


@dataclass
class OracleReport:
    name: str
    instances: int
    mismatches: int

    @property
    def passed(self) -> bool:
        return self.mismatches == 0


def check_association(n_instances: int, seed: int = 0) -> list[OracleReport]:
    """Compare engine association paths against the naive oracle."""
    rng = np.random.default_rng(seed)
    per_user = OracleReport("associate_user vs priority oracle", n_instances, 0)
    full_pass = OracleReport("tiered association vs priority oracle", n_instances, 0)
    nearest = OracleReport("nearest-cell baseline vs oracle", n_instances, 0)
    for _ in range(n_instances):
        inst = random_instance(rng)
        engine, cfg = _instance_engine(inst)

        expected = oracle_assign(inst, flat=False)
        got = engine.associate(flat=False)
        if list(got) != expected:
            full_pass.mismatches += 1

        snap = _Snapshot(
            _xy=np.array(inst.xy, dtype=float),
            bs_kinds=np.array([int(k) for k in inst.kinds]),
            bs_modes=np.array([int(m) for m in inst.modes]),
            bs_radius_m=engine.radius.copy(),
            _capacity=np.array([inst.capacity(i) for i in range(len(inst.kinds))]))
        for u, want in zip(inst.users, expected):
            have = associate_user(np.array(u), snap)
            if have != want:
                per_user.mismatches += 1
                break
            if have != UNSERVED:
                snap._counts[have] += 1

        want_assign, want_modes = oracle_nearest_with_energy(inst, cfg.sbs)
        engine2, _ = _instance_engine(inst)
        engine2.modes[:] = BsMode.ACTIVE  # baseline starts everything up
        engine2.radius = np.array(inst.radius, dtype=float)
        res = engine2.run_nearest_bs()
        if list(res.server) != want_assign or \
                [BsMode(int(m)) for m in res.bs_modes] != want_modes:
            nearest.mismatches += 1
    return [per_user, full_pass, nearest]


def check_sir(n_instances: int, seed: int = 0, alpha: float = 3.5,
              rel_tol: float = 1e-12) -> OracleReport:
    """Compare the SIR implementation with naive re-summation (3 BSs, h=1)."""
    rng = np.random.default_rng(seed)
    report = OracleReport("SIR vs re-summation oracle", n_instances, 0)
    for _ in range(n_instances):
        n_bs = 3
        xy = [(float(rng.uniform(-900, 900)), float(rng.uniform(-900, 900)))
              for _ in range(n_bs)]
        p = [float(rng.uniform(1.0, 50.0)) for _ in range(n_bs)]
        user = (float(rng.uniform(-900, 900)), float(rng.uniform(-900, 900)))
        server = int(rng.integers(0, n_bs))
        active = list(range(n_bs))
        got = sir(np.array(user), server, np.array(active),
                  np.array(xy, dtype=float), np.array(p), alpha=alpha)
        want = oracle_sir(user, server, active, xy, p, alpha)
        if not math.isclose(got, want, rel_tol=rel_tol):
            report.mismatches += 1
    return report


def run_oracle_suite(n_instances: int = 500, seed: int = 0,
                     printer=print) -> bool:
    """Run every oracle comparison, print one line per check, return pass/fail."""
    reports = check_association(n_instances, seed)
    reports.append(check_sir(max(100, n_instances // 5), seed + 1))
    ok = True
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        printer(f"[{status}] {r.name}: {r.instances - r.mismatches}/{r.instances} instances agree")
        ok &= r.passed
    return ok
