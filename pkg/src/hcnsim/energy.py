"""Per-BS power consumption, energy harvesting and the BS mode machine.

Power for an active BS is the affine load model P_c + beta*(w/W)*P_t.  A
slot is one second long, so joules and watts interchange.  Harvested
energy arrives as whole 1 J packets, Poisson-distributed per slot, and
must be spent in the same slot (no storage).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np
from scipy import stats

from .topology import BsKind, Position


class BsMode(IntEnum):
    ACTIVE = 0
    SLEEP = 1
    OFF = 2


#: Modes each tier may adopt.  MBS and HSBS never leave active duty; a
#: conventional small cell may sleep; a renewable one may switch off.
ALLOWED_MODES: dict[BsKind, frozenset[BsMode]] = {
    BsKind.MBS: frozenset({BsMode.ACTIVE}),
    BsKind.CSBS: frozenset({BsMode.ACTIVE, BsMode.SLEEP}),
    BsKind.RSBS: frozenset({BsMode.ACTIVE, BsMode.OFF}),
    BsKind.HSBS: frozenset({BsMode.ACTIVE}),
}


class TransitionError(ValueError):
    """Raised for a mode a BS tier is not allowed to enter."""


class AllocationError(ValueError):
    """Raised when a BS is asked to carry more bandwidth than it owns."""


@dataclass(frozen=True)
class PowerModel:
    """Constants of the affine consumption model for one tier."""

    p_const_w: float
    beta: float
    p_tx_w: float            # nominal transmit power
    p_min_w: float
    p_max_w: float
    total_bandwidth_hz: float
    n_subcarriers: int
    sleep_power_w: float = 0.0

    def __post_init__(self):
        if not (0 <= self.p_min_w <= self.p_tx_w <= self.p_max_w):
            raise ValueError(
                f"need 0 <= p_min <= p_tx <= p_max, got "
                f"{self.p_min_w}/{self.p_tx_w}/{self.p_max_w}")
        if self.p_const_w <= 0 or self.beta <= 0 or self.total_bandwidth_hz <= 0:
            raise ValueError("p_const_w, beta and total_bandwidth_hz must be > 0")
        if self.n_subcarriers <= 0:
            raise ValueError(f"n_subcarriers must be > 0, got {self.n_subcarriers}")

    def active_power_w(self, used_bandwidth_hz: float, p_tx_w: float | None = None) -> float:
        """P_c + beta*(w/W)*P_t for an active BS at transmit power p_tx."""
        p = self.p_tx_w if p_tx_w is None else p_tx_w
        return self.p_const_w + self.beta * (used_bandwidth_hz / self.total_bandwidth_hz) * p


# Reference constants (macro / small cell): constant power 354.44/38 W,
# transmit power 40/30 W, amplifier coefficient 21.45/5.5, bandwidth
# 10/5 MHz split into 1000/500 subcarriers.
MBS_POWER_MODEL = PowerModel(
    p_const_w=354.44, beta=21.45, p_tx_w=40.0, p_min_w=40.0, p_max_w=40.0,
    total_bandwidth_hz=10e6, n_subcarriers=1000)
SBS_POWER_MODEL = PowerModel(
    p_const_w=38.0, beta=5.5, p_tx_w=30.0, p_min_w=1.0, p_max_w=30.0,
    total_bandwidth_hz=5e6, n_subcarriers=500)


@dataclass(frozen=True)
class BaseStation:
    """One base station of any tier with its runtime operating point."""

    bs_id: int
    kind: BsKind
    position: Position
    model: PowerModel
    nominal_radius_m: float
    mode: BsMode = BsMode.ACTIVE
    p_tx_w: float = 0.0
    used_bandwidth_hz: float = 0.0
    n_users: int = 0

    def __post_init__(self):
        if self.mode not in ALLOWED_MODES[self.kind]:
            raise TransitionError(f"{self.kind.name} cannot be in mode {self.mode.name}")


@dataclass(frozen=True)
class EnergyLedger:
    """Harvest-use balance of one EH base station for one slot."""

    harvested_j: float = 0.0
    consumed_j: float = 0.0
    margin_j: float = 1.0

    @property
    def delta_j(self) -> float:
        return self.harvested_j - self.consumed_j

    @property
    def within_margin(self) -> bool:
        return 0.0 <= self.delta_j <= self.margin_j


def ledger_update(ledger: EnergyLedger, consumed_j: float) -> EnergyLedger:
    """New ledger with this slot's consumption booked (no carryover)."""
    if consumed_j < 0:
        raise ValueError(f"consumed energy must be >= 0, got {consumed_j}")
    return replace(ledger, consumed_j=consumed_j)


def harvest_from_uniform(u, rate_j_per_s: float):
    """Map uniform draws to Poisson(rate) packet counts via the quantile.

    Feeding the same uniforms at a higher rate never yields less energy,
    which keeps paired-seed sweeps monotone in the arrival rate.
    """
    if rate_j_per_s < 0:
        raise ValueError(f"arrival rate must be >= 0, got {rate_j_per_s}")
    if rate_j_per_s == 0:
        return np.zeros_like(np.asarray(u, dtype=float)) if np.ndim(u) else 0.0
    q = stats.poisson.ppf(np.maximum(u, 1e-300), rate_j_per_s)
    return q if np.ndim(u) else float(q)


def harvest_energy(rate_j_per_s: float, rng: np.random.Generator) -> float:
    """One slot's harvested energy: a Poisson(rate) number of 1 J packets."""
    return harvest_from_uniform(rng.random(), rate_j_per_s)


def bs_power(bs: BaseStation, used_bandwidth_hz: float | None = None) -> float:
    """Consumption of one BS in watts.

    Active BSs follow the affine load model, sleeping ones draw their
    fixed sleep power, switched-off ones draw nothing.

    Raises:
        AllocationError: used bandwidth above the BS's total bandwidth.
    """
    w = bs.used_bandwidth_hz if used_bandwidth_hz is None else used_bandwidth_hz
    if w < 0:
        raise AllocationError(f"used bandwidth must be >= 0, got {w}")
    if w > bs.model.total_bandwidth_hz:
        raise AllocationError(
            f"BS {bs.bs_id}: {w} Hz exceeds total bandwidth {bs.model.total_bandwidth_hz} Hz")
    if bs.mode == BsMode.OFF:
        return 0.0
    if bs.mode == BsMode.SLEEP:
        return bs.model.sleep_power_w
    return bs.model.active_power_w(w, bs.p_tx_w)


def mode_transition(bs: BaseStation, target: BsMode) -> BaseStation:
    """Move a BS to ``target`` mode, shedding load when it goes dormant.

    Raises:
        TransitionError: the tier does not support the target mode.
    """
    if target not in ALLOWED_MODES[bs.kind]:
        raise TransitionError(f"{bs.kind.name} cannot enter mode {target.name}")
    if target in (BsMode.SLEEP, BsMode.OFF):
        return replace(bs, mode=target, used_bandwidth_hz=0.0, n_users=0)
    return replace(bs, mode=target)


def grid_draws_w(kinds: np.ndarray, modes: np.ndarray, consumption_w: np.ndarray,
                 harvest_j: np.ndarray) -> np.ndarray:
    """Per-BS on-grid draw in watts.

    Renewable small cells never touch the grid; hybrid ones spend harvest
    first and top up the remainder; everything else is fully grid-fed.
    ``consumption_w`` must already account for the BS mode (sleep/off).
    """
    draws = consumption_w.astype(float).copy()
    rsbs = kinds == BsKind.RSBS
    hsbs = kinds == BsKind.HSBS
    draws[rsbs] = 0.0
    draws[hsbs] = np.maximum(0.0, consumption_w[hsbs] - harvest_j[hsbs])
    return draws


def grid_power(state) -> float:
    """Total on-grid power of a finalised snapshot in watts."""
    return float(grid_draws_w(state.bs_kinds, state.bs_modes,
                              state.consumption_w, state.harvest_j).sum())
