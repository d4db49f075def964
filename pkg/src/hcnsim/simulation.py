"""Monte Carlo engine: per-sample slots, sweep orchestration, aggregation.

Each sample is one independent slot: drop users, draw each EH cell's
harvest, run the scheme, read off on-grid power and sum rate.  Sample
seeds derive from (master seed, density index, sample index) only, so the
same user drops and harvest draws pair up across schemes and arrival
rates.  Aggregation order is fixed by sample index, which makes sweep
output byte-identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .association import (AssociationResult, SchemeKind, SlotEngine, UNSERVED)
from .channel import rate_matrix_bps, sample_fading
from .config import RunConfig
from .energy import BsMode, EnergyLedger, grid_draws_w
from .topology import BsKind, EH_KINDS, NetworkLayout, build_layout, sample_users


@dataclass
class NetworkState:
    """Read-only snapshot of one finalised slot."""

    layout: NetworkLayout
    bs_kinds: np.ndarray
    bs_modes: np.ndarray
    bs_p_tx_w: np.ndarray
    bs_radius_m: np.ndarray
    bs_used_bw_hz: np.ndarray
    bs_n_users: np.ndarray
    bs_capacity: np.ndarray
    consumption_w: np.ndarray
    ledger_consumption_j: np.ndarray
    harvest_j: np.ndarray
    user_xy: np.ndarray
    server: np.ndarray
    user_class: np.ndarray
    user_bandwidth_hz: np.ndarray
    fading: np.ndarray
    alpha: float
    sir_cap: float
    slot_index: int = 0

    def finalize(self) -> "NetworkState":
        for name, value in self.__dict__.items():
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
        return self

    def bs_xy(self) -> np.ndarray:
        return self.layout.xy()

    def free_user_slots(self) -> np.ndarray:
        return self.bs_capacity - self.bs_n_users

    def active_ids(self) -> np.ndarray:
        return np.flatnonzero(self.bs_modes == BsMode.ACTIVE)

    def grid_draws_w(self) -> np.ndarray:
        return grid_draws_w(self.bs_kinds, self.bs_modes, self.consumption_w, self.harvest_j)

    def grid_power_w(self) -> float:
        return float(self.grid_draws_w().sum())

    def ledgers(self, margin_j: float = 1.0) -> dict[int, EnergyLedger]:
        """Harvest-use ledgers of the EH base stations."""
        out = {}
        for i in np.flatnonzero(np.isin(self.bs_kinds, [int(k) for k in EH_KINDS])):
            out[int(i)] = EnergyLedger(harvested_j=float(self.harvest_j[i]),
                                       consumed_j=float(self.ledger_consumption_j[i]),
                                       margin_j=margin_j)
        return out


@dataclass(frozen=True)
class SampleStats:
    """Scalar outcome of one slot."""

    grid_power_w: float
    sum_rate_bps: float
    n_users: int
    n_unserved: int
    unconverged: bool
    causality_violations: int


@dataclass(frozen=True)
class MetricsRow:
    """Aggregate of one (scheme, arrival rate, density) sweep cell."""

    scheme: SchemeKind
    lambda_e: float
    density: float
    grid_power_w: float
    grid_power_stderr: float
    sum_rate_bps: float
    sum_rate_stderr: float
    ee_bits_per_joule: float
    ee_stderr: float
    unconverged_frac: float
    unserved_frac: float
    samples: int
    causality_violations: int = 0


def sample_seed(master_seed: int, density_index: int, sample_index: int) -> tuple[int, int, int]:
    """Seed key for one sample; scheme and arrival rate stay out on purpose."""
    return (master_seed, density_index, sample_index)


def make_engine(cfg: RunConfig, layout: NetworkLayout | None = None) -> SlotEngine:
    return SlotEngine(layout or build_layout(cfg.layout), cfg.mbs, cfg.sbs, cfg.algo,
                      alpha=cfg.channel.path_loss_exponent,
                      subcarriers_per_user=cfg.channel.subcarriers_per_user)


def _draw_slot(engine: SlotEngine, cfg: RunConfig, density: float, lambda_e: float,
               seed) -> np.ndarray:
    """Feed the engine one sample's randomness; returns the fading matrix."""
    from .energy import harvest_from_uniform

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    user_xy = sample_users(density, engine.layout.macro_radius_m, rng)
    eh_ids = np.flatnonzero(np.isin(engine.kinds, [int(k) for k in EH_KINDS]))
    harvest = np.zeros(engine.n_bs)
    if eh_ids.size:
        harvest[eh_ids] = harvest_from_uniform(rng.random(eh_ids.size), lambda_e)
    fading = sample_fading(rng, (engine.n_bs, len(user_xy)),
                           deterministic=cfg.channel.deterministic_fading)
    engine.new_slot(user_xy, harvest)
    return fading


def _stats_from_result(engine: SlotEngine, cfg: RunConfig, result: AssociationResult,
                       fading: np.ndarray) -> SampleStats:
    served = np.flatnonzero(result.server != UNSERVED)
    active = np.flatnonzero(result.bs_modes == BsMode.ACTIVE)
    if served.size:
        rates = rate_matrix_bps(
            served, result.server[served], active, engine.dist,
            result.bs_p_tx_w, fading, result.user_bandwidth_hz[served],
            cfg.channel.path_loss_exponent, cap=cfg.channel.sir_cap)
        sum_rate = float(rates.sum())
    else:
        sum_rate = 0.0
    consumption = engine.consumption_w(result.bs_n_users)
    grid = float(grid_draws_w(engine.kinds, result.bs_modes, consumption,
                              engine.harvest_j).sum())
    ledger = engine.ledger_consumption_j(result.bs_n_users)
    rsbs = engine.tier_ids[BsKind.RSBS]
    active_rsbs = rsbs[result.bs_modes[rsbs] == BsMode.ACTIVE] if rsbs.size else rsbs
    violations = int(np.count_nonzero(
        ledger[active_rsbs] > engine.harvest_j[active_rsbs])) if active_rsbs.size else 0
    return SampleStats(
        grid_power_w=grid,
        sum_rate_bps=sum_rate,
        n_users=engine.n_users,
        n_unserved=result.n_unserved,
        unconverged=result.unconverged,
        causality_violations=violations,
    )


def simulate_slot(cfg: RunConfig, scheme: SchemeKind, density: float, lambda_e: float,
                  seed, engine: SlotEngine | None = None
                  ) -> tuple[NetworkState, AssociationResult, SampleStats]:
    """Run one slot and keep the full snapshot (for tests and audits)."""
    engine = engine or make_engine(cfg)
    fading = _draw_slot(engine, cfg, density, lambda_e, seed)
    result = engine.run_joint_association(scheme)
    stats = _stats_from_result(engine, cfg, result, fading)
    state = NetworkState(
        layout=engine.layout,
        bs_kinds=engine.kinds.copy(),
        bs_modes=result.bs_modes.copy(),
        bs_p_tx_w=result.bs_p_tx_w.copy(),
        bs_radius_m=result.bs_radius_m.copy(),
        bs_used_bw_hz=result.bs_used_bw_hz.copy(),
        bs_n_users=result.bs_n_users.copy(),
        bs_capacity=engine.capacity.copy(),
        consumption_w=engine.consumption_w(result.bs_n_users),
        ledger_consumption_j=engine.ledger_consumption_j(result.bs_n_users),
        harvest_j=engine.harvest_j.copy(),
        user_xy=engine.user_xy.copy(),
        server=result.server.copy(),
        user_class=result.user_class.copy(),
        user_bandwidth_hz=result.user_bandwidth_hz.copy(),
        fading=fading,
        alpha=cfg.channel.path_loss_exponent,
        sir_cap=cfg.channel.sir_cap,
    ).finalize()
    return state, result, stats


def run_sample(cfg: RunConfig, scheme: SchemeKind, density: float, lambda_e: float,
               seed) -> SampleStats:
    """One slot's scalar outcome for the given seed."""
    engine = make_engine(cfg)
    fading = _draw_slot(engine, cfg, density, lambda_e, seed)
    result = engine.run_joint_association(scheme)
    return _stats_from_result(engine, cfg, result, fading)


# --------------------------------------------------------------------- sweep

_CHUNK_FIELDS = 6  # grid, rate, users, unserved, unconverged, violations


def _run_chunk(cfg: RunConfig, scheme: SchemeKind, density_index: int,
               lambda_e: float, start: int, stop: int) -> np.ndarray:
    engine = make_engine(cfg)
    density = cfg.sweep.densities[density_index]
    out = np.empty((stop - start, _CHUNK_FIELDS))
    for k, s in enumerate(range(start, stop)):
        seed = sample_seed(cfg.sweep.master_seed, density_index, s)
        fading = _draw_slot(engine, cfg, density, lambda_e, seed)
        result = engine.run_joint_association(scheme)
        st = _stats_from_result(engine, cfg, result, fading)
        out[k] = (st.grid_power_w, st.sum_rate_bps, st.n_users, st.n_unserved,
                  st.unconverged, st.causality_violations)
    return out


def _aggregate(scheme: SchemeKind, lambda_e: float, density: float,
               table: np.ndarray) -> MetricsRow:
    n = len(table)
    grid, rate = table[:, 0], table[:, 1]
    users, unserved = table[:, 2], table[:, 3]
    mean_p = float(grid.mean())
    mean_r = float(rate.mean())
    if n > 1:
        se_p = float(grid.std(ddof=1) / math.sqrt(n))
        se_r = float(rate.std(ddof=1) / math.sqrt(n))
        cov = float(np.cov(rate, grid, ddof=1)[0, 1]) / n
    else:
        se_p = se_r = cov = 0.0
    ee = mean_r / mean_p if mean_p > 0 else 0.0
    if mean_p > 0:
        var_ee = (se_r / mean_p) ** 2 + (mean_r * se_p / mean_p ** 2) ** 2 \
            - 2.0 * mean_r * cov / mean_p ** 3
        ee_se = math.sqrt(max(var_ee, 0.0))
    else:
        ee_se = 0.0
    total_users = float(users.sum())
    return MetricsRow(
        scheme=scheme,
        lambda_e=lambda_e,
        density=density,
        grid_power_w=mean_p,
        grid_power_stderr=se_p,
        sum_rate_bps=mean_r,
        sum_rate_stderr=se_r,
        ee_bits_per_joule=ee,
        ee_stderr=ee_se,
        unconverged_frac=float(table[:, 4].mean()),
        unserved_frac=float(unserved.sum() / total_users) if total_users > 0 else 0.0,
        samples=n,
        causality_violations=int(table[:, 5].sum()),
    )


def resolve_threads(requested: int) -> int:
    if requested > 0:
        return requested
    return max(os.cpu_count() or 1, 1)


def sweep_cells(cfg: RunConfig) -> list[tuple[SchemeKind, float, int]]:
    """Sweep grid in output row order: (scheme, lambda_e, density index)."""
    return [(scheme, lam, di)
            for scheme in sorted(cfg.sweep.schemes, key=int)
            for lam in sorted(cfg.sweep.lambda_e)
            for di in range(len(cfg.sweep.densities))]


def run_sweep(cfg: RunConfig, progress=None) -> list[MetricsRow]:
    """Run the full sweep; rows come back sorted by (scheme, lambda_e, density).

    ``progress(row)`` is invoked as each cell completes, in row order, so a
    caller can flush partial output if the sweep is interrupted.
    """
    cells = sweep_cells(cfg)
    n = cfg.sweep.n_samples
    threads = resolve_threads(cfg.sweep.threads)
    densities = cfg.sweep.densities
    rows: list[MetricsRow] = []

    def emit(cell, table) -> None:
        scheme, lam, di = cell
        row = _aggregate(scheme, lam, densities[di], table)
        rows.append(row)
        if progress is not None:
            progress(row)

    if threads == 1:
        for cell in cells:
            scheme, lam, di = cell
            emit(cell, _run_chunk(cfg, scheme, di, lam, 0, n))
        return rows

    chunk = max(1, math.ceil(n / (threads * 4)))
    bounds = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = {cell: [pool.submit(_run_chunk, cfg, cell[0], cell[2], cell[1], a, b)
                          for a, b in bounds]
                   for cell in cells}
        for cell in cells:
            table = np.concatenate([f.result() for f in futures[cell]], axis=0)
            emit(cell, table)
    return rows
