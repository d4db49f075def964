"""User association rules and the joint power/mode adaptation loop.

Three schemes are implemented:

* ``NEAREST_BS``: every BS active at nominal power, each user served by the
  nearest small cell covering it, the macro BS as fallback.
* ``JOINT``: each renewable small cell iteratively retunes transmit powers
  and nearby conventional-cell modes until its energy balance for the slot
  sits inside the margin band.
* ``PROPOSED_JOINT``: same loop, then the macro BS additionally absorbs the
  users of the least-loaded conventional cells (put to sleep) until it
  reaches its fill threshold.

Tier priority for association is renewable > hybrid > conventional > macro;
within a tier the nearest covering BS with a free sub-carrier wins, ties go
to the lower BS id, and user ids are processed in order.  All of it is
deterministic for a given snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .energy import BsMode, PowerModel
from .topology import BsKind, NetworkLayout, Position


class SchemeKind(IntEnum):
    NEAREST_BS = 0
    JOINT = 1
    PROPOSED_JOINT = 2

    @property
    def label(self) -> str:
        return _SCHEME_LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "SchemeKind":
        try:
            return _SCHEME_BY_LABEL[text.strip().lower()]
        except KeyError:
            raise ValueError(
                f"unknown scheme {text!r}; expected one of {sorted(_SCHEME_BY_LABEL)}"
            ) from None


_SCHEME_LABELS = {
    SchemeKind.NEAREST_BS: "nearest_bs",
    SchemeKind.JOINT: "joint",
    SchemeKind.PROPOSED_JOINT: "proposed_joint",
}
_SCHEME_BY_LABEL = {v: k for k, v in _SCHEME_LABELS.items()}


class UserClass(IntEnum):
    """User taxonomy by location and server (macro-area, dormant-cell...)."""

    MMU = 0   # outside every small-cell footprint, served by the macro BS
    SMU = 1   # inside a dormant small cell's footprint, served by the macro BS
    SSU = 2   # inside a dormant small cell's footprint, served by another small cell


#: Class code for users the taxonomy does not name (e.g. served by the
#: small cell they stand in) and for unserved users.
UNCLASSIFIED = -1

#: Server value for users no BS could take.
UNSERVED = -1


@dataclass(frozen=True)
class AlgoParams:
    """Tunables of the adaptation loop."""

    u_min: int = 2            # prospective users needed to keep a CSBS active
    n_th: int = 200           # macro-BS fill threshold for the offload stage
    step: float = 0.1         # multiplicative transmit-power step
    max_iter: int = 200       # per-RSBS iteration cap
    max_sweeps: int = 20      # global convergence sweeps over all RSBSs
    margin_j: float = 1.0     # tolerated energy surplus band [0, C]
    rf_only_ledger: bool = False  # count only RF energy against the harvest

    def __post_init__(self):
        if not 0.0 < self.step < 1.0:
            raise ValueError(f"step must be in (0, 1), got {self.step}")
        if self.margin_j <= 0:
            raise ValueError(f"margin_j must be > 0, got {self.margin_j}")
        if self.max_iter < 1 or self.max_sweeps < 1:
            raise ValueError("max_iter and max_sweeps must be >= 1")


def coverage_radius(p_tx_w: float, nominal_radius_m: float,
                    nominal_p_tx_w: float, alpha: float) -> float:
    """Cell radius at transmit power ``p_tx_w``.

    Scales the nominal radius so the cell-edge received power stays the
    same across power levels: r = r_nom * (p/p_nom)^(1/alpha).
    """
    if min(p_tx_w, nominal_radius_m, nominal_p_tx_w, alpha) <= 0:
        raise ValueError("coverage_radius arguments must all be > 0")
    return nominal_radius_m * (p_tx_w / nominal_p_tx_w) ** (1.0 / alpha)


@dataclass
class AssociationResult:
    """Final snapshot of one slot's association.

    Per user: serving BS id (``UNSERVED`` if none), taxonomy class code and
    allocated bandwidth.  Per BS: mode, transmit power, carried bandwidth
    and user count.
    """

    server: np.ndarray
    user_class: np.ndarray
    user_bandwidth_hz: np.ndarray
    bs_modes: np.ndarray
    bs_p_tx_w: np.ndarray
    bs_radius_m: np.ndarray
    bs_used_bw_hz: np.ndarray
    bs_n_users: np.ndarray
    unconverged: bool = False
    causality_fixes: int = 0

    @property
    def n_unserved(self) -> int:
        return int(np.count_nonzero(self.server == UNSERVED))


def associate_user(user: Position | np.ndarray, state) -> int:
    """Serve one user against a snapshot, returning the BS id (or UNSERVED).

    Priority order renewable > hybrid > conventional > macro; "covering"
    means the user sits within the BS's current radius and the BS still has
    a free sub-carrier allocation.  ``state`` must expose ``bs_xy()``,
    ``bs_kinds``, ``bs_modes``, ``bs_radius_m`` and ``free_user_slots()``.
    """
    xy = np.asarray([user.x, user.y]) if isinstance(user, Position) else np.asarray(user, dtype=float)
    bs_xy = state.bs_xy()
    d = np.hypot(bs_xy[:, 0] - xy[0], bs_xy[:, 1] - xy[1])
    free = state.free_user_slots()
    kinds = np.asarray(state.bs_kinds)
    modes = np.asarray(state.bs_modes)
    radius = np.asarray(state.bs_radius_m)
    for kind in (BsKind.RSBS, BsKind.HSBS, BsKind.CSBS, BsKind.MBS):
        best_id, best_d = UNSERVED, np.inf
        for i in np.flatnonzero(kinds == kind):
            if modes[i] != BsMode.ACTIVE or free[i] <= 0 or d[i] > radius[i]:
                continue
            if d[i] < best_d:
                best_id, best_d = int(i), float(d[i])
        if best_id != UNSERVED:
            return best_id
    return UNSERVED


_TIER_ORDER = (BsKind.RSBS, BsKind.HSBS, BsKind.CSBS)

# plain ints for hot numpy comparisons
_ACTIVE = int(BsMode.ACTIVE)
_SLEEP = int(BsMode.SLEEP)
_OFF = int(BsMode.OFF)


class SlotEngine:
    """Runs one Monte Carlo slot: association plus the adaptation loop.

    Owns mutable per-slot working state (modes, transmit powers, radii) as
    flat arrays indexed by BS id.  Instances are single-threaded; run one
    engine per worker.
    """

    def __init__(self, layout: NetworkLayout, mbs_model: PowerModel,
                 sbs_model: PowerModel, algo: AlgoParams,
                 alpha: float = 3.5, subcarriers_per_user: int = 1):
        self.layout = layout
        self.algo = algo
        self.alpha = alpha
        self._inv_alpha = 1.0 / alpha
        self.n_bs = layout.n_bs
        self.kinds = np.array([int(k) for k in layout.kinds], dtype=np.int8)
        self.bs_xy = layout.xy()
        self.nominal_radius = np.asarray(layout.coverage_radii_m, dtype=float)
        self.models = [mbs_model if k == BsKind.MBS else sbs_model for k in layout.kinds]

        self.nominal_p = np.array([m.p_tx_w for m in self.models])
        self.p_min = np.array([m.p_min_w for m in self.models])
        self.p_max = np.array([m.p_max_w for m in self.models])
        self.p_const = np.array([m.p_const_w for m in self.models])
        self.beta = np.array([m.beta for m in self.models])
        self.total_bw = np.array([m.total_bandwidth_hz for m in self.models])
        self.sleep_power = np.array([m.sleep_power_w for m in self.models])
        if subcarriers_per_user < 1:
            raise ValueError("subcarriers_per_user must be >= 1")
        self.user_bw = np.array(
            [m.total_bandwidth_hz / m.n_subcarriers * subcarriers_per_user for m in self.models])
        self.capacity = np.array(
            [m.n_subcarriers // subcarriers_per_user for m in self.models], dtype=int)

        self.mbs_id = 0
        # widest possible footprint per BS, for static reachability subsets
        self.max_radius = self.nominal_radius * (self.p_max / self.nominal_p) ** (1.0 / alpha)
        self.max_radius[0] = layout.macro_radius_m
        self.tier_ids = {k: np.array(layout.ids_of(k), dtype=int) for k in BsKind}
        self.sbs_ids = np.sort(np.concatenate(
            [self.tier_ids[k] for k in _TIER_ORDER if self.tier_ids[k].size]
        )) if self.n_bs > 1 else np.empty(0, dtype=int)

        # "near" = nominal footprints intersect the RSBS's nominal footprint
        self.near_csbs: dict[int, list[int]] = {}
        self.near_hsbs: dict[int, list[int]] = {}
        for j in self.tier_ids[BsKind.RSBS]:
            dj = np.hypot(self.bs_xy[:, 0] - self.bs_xy[j, 0],
                          self.bs_xy[:, 1] - self.bs_xy[j, 1])
            reach = self.nominal_radius[j] + self.nominal_radius
            self.near_csbs[int(j)] = [int(c) for c in self.tier_ids[BsKind.CSBS] if dj[c] <= reach[c]]
            self.near_hsbs[int(j)] = [int(h) for h in self.tier_ids[BsKind.HSBS] if dj[h] <= reach[h]]

        # per-slot state, set by new_slot()
        self.dist = np.empty((self.n_bs, 0))
        self.user_xy = np.empty((0, 2))
        self.n_users = 0
        self.modes = np.empty(0, dtype=np.int8)
        self.p_tx = np.empty(0)
        self.radius = np.empty(0)
        self.harvest_j = np.zeros(self.n_bs)

    # ---------------------------------------------------------------- slot

    def new_slot(self, user_xy: np.ndarray, harvest_j: np.ndarray) -> None:
        """Load one sample's users and harvest draws and reset BS state."""
        user_xy = np.asarray(user_xy, dtype=float).reshape(-1, 2)
        self.user_xy = user_xy
        self.n_users = len(user_xy)
        self.dist = np.hypot(self.bs_xy[:, 0, None] - user_xy[None, :, 0],
                             self.bs_xy[:, 1, None] - user_xy[None, :, 1])
        self.harvest_j = np.asarray(harvest_j, dtype=float)
        self.modes = np.full(self.n_bs, _ACTIVE, dtype=np.int8)
        self.p_tx = self.nominal_p.copy()
        self.radius = self._radius_from_power()
        self._adapt_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _radius_from_power(self) -> np.ndarray:
        r = self.nominal_radius * (self.p_tx / self.nominal_p) ** (1.0 / self.alpha)
        r[self.mbs_id] = self.layout.macro_radius_m
        r[self.modes == BsMode.OFF] = 0.0
        return r

    def _update_radius(self, i: int) -> None:
        if i == self.mbs_id:
            return
        if self.modes[i] == _OFF:
            self.radius[i] = 0.0
        else:
            self.radius[i] = coverage_radius(
                self.p_tx[i], self.nominal_radius[i], self.nominal_p[i], self.alpha)

    # ---------------------------------------------------------- association

    def _active_rows(self, ids: np.ndarray) -> np.ndarray:
        return ids[self.modes[ids] == _ACTIVE]

    def associate(self, flat: bool) -> np.ndarray:
        """Full association pass; returns the per-user server array.

        Fast path resolves each tier with vectorised nearest-covering
        selection and is exact whenever no BS oversubscribes; otherwise it
        falls back to the per-user sequential pass with identical
        semantics.
        """
        server = np.full(self.n_users, UNSERVED, dtype=int)
        if self.n_users == 0:
            return server
        free = self.capacity.copy()
        groups = [self.sbs_ids] if flat else [self.tier_ids[k] for k in _TIER_ORDER]
        for ids in groups:
            rows = self._active_rows(ids)
            pending = np.flatnonzero(server == UNSERVED)
            if rows.size == 0 or pending.size == 0:
                continue
            sub = self.dist[np.ix_(rows, pending)]
            masked = np.where(sub <= self.radius[rows, None], sub, np.inf)
            best = np.argmin(masked, axis=0)
            ok = np.isfinite(masked[best, np.arange(pending.size)])
            chosen = rows[best[ok]]
            counts = np.bincount(chosen, minlength=self.n_bs)
            if np.any(counts[rows] > free[rows]):
                return self._associate_sequential(flat)
            server[pending[ok]] = chosen
            free -= counts
        pending = np.flatnonzero(server == UNSERVED)
        if pending.size and self.modes[self.mbs_id] == _ACTIVE:
            in_cell = pending[self.dist[self.mbs_id, pending] <= self.radius[self.mbs_id]]
            take = in_cell[: free[self.mbs_id]]
            server[take] = self.mbs_id
        return server

    def _associate_sequential(self, flat: bool) -> np.ndarray:
        server = np.full(self.n_users, UNSERVED, dtype=int)
        free = self.capacity.copy()
        groups = [self.sbs_ids] if flat else [self.tier_ids[k] for k in _TIER_ORDER]
        for u in range(self.n_users):
            for ids in groups + [np.array([self.mbs_id])]:
                rows = self._active_rows(ids)
                rows = rows[(free[rows] > 0) & (self.dist[rows, u] <= self.radius[rows])]
                if rows.size:
                    i = rows[np.argmin(self.dist[rows, u])]
                    server[u] = i
                    free[i] -= 1
                    break
        return server

    # ------------------------------------------------------- adaptation loop

    def _ledger_consumption(self, i: int, n_users: int) -> float:
        rf = self.beta[i] * (n_users * self.user_bw[i] / self.total_bw[i]) * self.p_tx[i]
        return rf if self.algo.rf_only_ledger else self.p_const[i] + rf

    def _step_power(self, i: int, up: bool, clamp_min: bool = True) -> bool:
        p = self.p_tx[i]
        if up:
            new = p * (1.0 + self.algo.step)
            if new > self.p_max[i]:
                new = self.p_max[i]
        else:
            new = p * (1.0 - self.algo.step)
            if clamp_min and new < self.p_min[i]:
                new = self.p_min[i]
        if new == p:
            return False
        self.p_tx[i] = new
        if i != self.mbs_id and self.modes[i] != _OFF:
            self.radius[i] = self.nominal_radius[i] * (new / self.nominal_p[i]) ** self._inv_alpha
        return True

    def _covered_by_active(self, kind: BsKind, users: np.ndarray | None = None) -> np.ndarray:
        rows = self._active_rows(self.tier_ids[kind])
        return self._cover(rows, users)

    def _cover(self, rows: np.ndarray, users: np.ndarray | None = None) -> np.ndarray:
        """Which of ``users`` (default all) lie inside any of ``rows``' cells."""
        n = self.n_users if users is None else users.size
        if rows.size == 0 or n == 0:
            return np.zeros(n, dtype=bool)
        d = self.dist[rows] if users is None else self.dist[np.ix_(rows, users)]
        return (d <= self.radius[rows, None]).any(axis=0)

    def _nearest_covering(self, rows: np.ndarray, users: np.ndarray | None = None
                          ) -> tuple[np.ndarray, np.ndarray]:
        """Per user: (distance, id) of the nearest covering BS among ``rows``."""
        n = self.n_users if users is None else users.size
        if rows.size == 0 or n == 0:
            return np.full(n, np.inf), np.full(n, self.n_bs, dtype=int)
        d = self.dist[rows] if users is None else self.dist[np.ix_(rows, users)]
        masked = np.where(d <= self.radius[rows, None], d, np.inf)
        row = np.argmin(masked, axis=0)
        return masked[row, np.arange(n)], rows[row]

    def _other_rsbs_best(self, j: int, users: np.ndarray | None = None
                         ) -> tuple[np.ndarray, np.ndarray]:
        """Nearest covering active RSBS other than j, per user (dist, id)."""
        others = np.array([k for k in self.tier_ids[BsKind.RSBS]
                           if k != j and self.modes[k] == _ACTIVE], dtype=int)
        return self._nearest_covering(others, users)

    @staticmethod
    def _merge_best(d1, i1, d2, i2) -> tuple[np.ndarray, np.ndarray]:
        take2 = (d2 < d1) | ((d2 == d1) & (i2 < i1))
        return np.where(take2, d2, d1), np.where(take2, i2, i1)

    def _csbs_prospective(self, candidates: list[int],
                          users: np.ndarray | None = None,
                          higher_cov: np.ndarray | None = None,
                          far_best: tuple[np.ndarray, np.ndarray] | None = None,
                          count_only: list[int] | None = None) -> dict[int, int]:
        """Users each candidate CSBS would currently pick up.

        Counts users inside the candidate's footprint that no active
        renewable/hybrid cell covers and that no active conventional cell
        would win first (nearest, ties to the lower id).  ``users`` may
        restrict the count to an index subset that is known to contain
        every reachable user; ``higher_cov`` and ``far_best`` (nearest
        covering active CSBS outside the candidate set) can be passed in
        when the caller caches them, aligned to ``users``.  ``count_only``
        narrows the returned counts while every candidate still competes.
        """
        targets = candidates if count_only is None else count_only
        n = self.n_users if users is None else users.size
        if n == 0:
            return {i: 0 for i in targets}
        if higher_cov is None:
            higher_cov = (self._covered_by_active(BsKind.RSBS, users)
                          | self._covered_by_active(BsKind.HSBS, users))
        near_act = np.array([i for i in candidates if self.modes[i] == _ACTIVE], dtype=int)
        best_d, best_id = self._nearest_covering(near_act, users)
        if far_best is None:
            far = np.array([i for i in self.tier_ids[BsKind.CSBS]
                            if self.modes[i] == _ACTIVE and i not in set(candidates)],
                           dtype=int)
            far_best = self._nearest_covering(far, users)
        best_d, best_id = self._merge_best(best_d, best_id, *far_best)
        out: dict[int, int] = {}
        for i in targets:
            di = self.dist[i] if users is None else self.dist[i, users]
            cov = (di <= self.radius[i]) & ~higher_cov
            if self.modes[i] == _ACTIVE:
                mine = cov & (best_id == i)
            else:
                mine = cov & ((di < best_d) | ((di == best_d) & (i < best_id)))
            out[i] = int(mine.sum())
        return out

    def _apply_csbs_mode_rule(self, near: list[int], activate_only: bool,
                              users=None, higher_cov=None, far_best=None) -> bool:
        """Flip near CSBS modes against the prospective-user threshold."""
        if not near:
            return False
        if activate_only:
            flippable = [i for i in near if self.modes[i] == _SLEEP]
            if not flippable:
                return False
        else:
            flippable = near
        counts = self._csbs_prospective(near, users, higher_cov, far_best,
                                        count_only=flippable)
        changed = False
        for i in flippable:
            wants_active = counts[i] >= self.algo.u_min
            if wants_active and self.modes[i] == _SLEEP:
                self.modes[i] = _ACTIVE
                changed = True
            elif not activate_only and not wants_active and self.modes[i] == _ACTIVE:
                self.modes[i] = _SLEEP
                changed = True
        return changed

    def _adapt_subsets(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Static per-slot user subsets reachable by RSBS j and its near CSBSs."""
        cached = self._adapt_cache.get(j)
        if cached is not None:
            return cached
        s_load = np.flatnonzero(self.dist[j] <= self.max_radius[j])
        near_c = self.near_csbs[j]
        if near_c and self.n_users:
            reach = np.zeros(self.n_users, dtype=bool)
            for c in near_c:
                reach |= self.dist[c] <= self.max_radius[c]
            s_rule = np.flatnonzero(reach)
        else:
            s_rule = np.empty(0, dtype=int)
        self._adapt_cache[j] = (s_load, s_rule)
        return s_load, s_rule

    def _adapt_rsbs(self, j: int) -> tuple[bool, bool]:
        """Drive RSBS j's energy balance into [0, margin]; returns (changed, unconverged)."""
        algo = self.algo
        changed_any = False
        e_j = self.harvest_j[j]
        near_c, near_h = self.near_csbs[j], self.near_hsbs[j]
        s_load, s_rule = self._adapt_subsets(j)
        # caches valid for this call: other RSBSs and non-near CSBSs stay put
        d_j_load = self.dist[j, s_load]
        other_d, other_id = self._other_rsbs_best(j, s_load)
        cap_j = int(self.capacity[j])

        def load_now() -> int:
            mine = (d_j_load <= self.radius[j]) & (
                (d_j_load < other_d) | ((d_j_load == other_d) & (j < other_id)))
            return min(int(mine.sum()), cap_j)

        rsbs_other_cov = self._cover(np.array(
            [k for k in self.tier_ids[BsKind.RSBS] if k != j and self.modes[k] == _ACTIVE],
            dtype=int), s_rule)
        hsbs_cov = self._covered_by_active(BsKind.HSBS, s_rule)
        hsbs_dirty = False
        d_j_rule = self.dist[j, s_rule]
        far_best = None

        def higher_now() -> np.ndarray:
            nonlocal hsbs_cov, hsbs_dirty
            if hsbs_dirty:
                hsbs_cov = self._covered_by_active(BsKind.HSBS, s_rule)
                hsbs_dirty = False
            cov = rsbs_other_cov | hsbs_cov
            if self.modes[j] == _ACTIVE:
                cov = cov | (d_j_rule <= self.radius[j])
            return cov

        def far_best_now() -> tuple[np.ndarray, np.ndarray]:
            nonlocal far_best
            if far_best is None:
                near_set = set(near_c)
                far = np.array([c for c in self.tier_ids[BsKind.CSBS]
                                if self.modes[c] == _ACTIVE and c not in near_set], dtype=int)
                far_best = self._nearest_covering(far, s_rule)
            return far_best

        for _ in range(algo.max_iter):
            delta = e_j - self._ledger_consumption(j, load_now())
            if 0.0 <= delta <= algo.margin_j:
                return changed_any, False
            if delta >= algo.margin_j:
                # surplus: widen green coverage, squeeze the grid-fed cells
                it_changed = self._step_power(j, up=True)
                for h in near_h:
                    if self._step_power(h, up=True):
                        it_changed = hsbs_dirty = True
                for c in near_c:
                    it_changed |= self._step_power(c, up=False)
                it_changed |= self._apply_csbs_mode_rule(
                    near_c, activate_only=False, users=s_rule,
                    higher_cov=higher_now(), far_best=far_best_now())
                if not it_changed:
                    # every knob is clamped; leftover harvest simply goes unused
                    return changed_any, False
            else:
                # deficit: shed load, let hybrids (grid-backed) absorb it
                self._step_power(j, up=False, clamp_min=False)
                it_changed = True
                growable = [h for h in near_h if self.p_tx[h] < self.p_max[h]]
                if growable:
                    for h in growable:
                        if self._step_power(h, up=True):
                            hsbs_dirty = True
                    for c in near_c:
                        self._step_power(c, up=False)
                else:
                    for c in near_c:
                        self._step_power(c, up=True)
                if any(self.modes[c] == _SLEEP for c in near_c):
                    self._apply_csbs_mode_rule(
                        near_c, activate_only=True, users=s_rule,
                        higher_cov=higher_now(), far_best=far_best_now())
                if self.p_tx[j] < self.p_min[j]:
                    self.modes[j] = _OFF
                    self.p_tx[j] = 0.0
                    self._update_radius(j)
                    return True, False
            changed_any |= it_changed
        return changed_any, True

    def _offload_to_mbs(self) -> None:
        """Sleep least-loaded active CSBSs until the macro BS reaches its fill."""
        server = self.associate(flat=False)
        counts = np.bincount(server[server >= 0], minlength=self.n_bs)
        mbs_users = int(counts[self.mbs_id])
        active = [int(i) for i in self.tier_ids[BsKind.CSBS] if self.modes[i] == _ACTIVE]
        while mbs_users <= self.algo.n_th and active:
            i = min(active, key=lambda c: (counts[c], c))
            self.modes[i] = BsMode.SLEEP
            mbs_users += int(counts[i])
            counts[i] = 0
            active.remove(i)

    def _enforce_rsbs_causality(self, server: np.ndarray, flat: bool) -> tuple[np.ndarray, int]:
        """Switch off any RSBS whose slot consumption exceeds its harvest.

        Harvest-use admits no deficit: a renewable cell that cannot pay for
        its final load out of this slot's harvest does not run.  Returns the
        (possibly re-associated) servers and the number of cells dropped.
        """
        fixes = 0
        while True:
            counts = np.bincount(server[server >= 0], minlength=self.n_bs)
            worst, worst_deficit = -1, 0.0
            for j in self.tier_ids[BsKind.RSBS]:
                if self.modes[j] != _ACTIVE:
                    continue
                deficit = self._ledger_consumption(j, int(counts[j])) - self.harvest_j[j]
                if deficit > 0.0 and (worst < 0 or deficit > worst_deficit):
                    worst, worst_deficit = int(j), float(deficit)
            if worst < 0:
                return server, fixes
            self.modes[worst] = _OFF
            self.p_tx[worst] = 0.0
            self._update_radius(worst)
            server = self.associate(flat)
            fixes += 1

    # -------------------------------------------------------------- schemes

    def run_nearest_bs(self) -> AssociationResult:
        """Baseline: all BSs at nominal power, flat nearest-SBS association."""
        server = self.associate(flat=True)
        server, fixes = self._enforce_rsbs_causality(server, flat=True)
        return self._finalize(server, unconverged=False, fixes=fixes)

    def run_joint_association(self, scheme: SchemeKind) -> AssociationResult:
        """Joint power adaptation and mode switching, then final association."""
        if scheme == SchemeKind.NEAREST_BS:
            return self.run_nearest_bs()
        # conventional cells start dormant and earn activation from load
        csbs = self.tier_ids[BsKind.CSBS]
        self.modes[csbs] = _SLEEP
        unconverged = False
        converged = False
        for _ in range(self.algo.max_sweeps):
            changed = False
            for j in self.tier_ids[BsKind.RSBS]:
                if self.modes[j] != _ACTIVE:
                    continue
                ch, unc = self._adapt_rsbs(int(j))
                changed |= ch
                unconverged |= unc
            if not changed:
                converged = True
                break
        if not converged:
            unconverged = True
        if scheme == SchemeKind.PROPOSED_JOINT:
            self._offload_to_mbs()
        server = self.associate(flat=False)
        server, fixes = self._enforce_rsbs_causality(server, flat=False)
        return self._finalize(server, unconverged=unconverged, fixes=fixes)

    # ------------------------------------------------------------- finalize

    def consumption_w(self, counts: np.ndarray) -> np.ndarray:
        """Mode-aware consumption of every BS given per-BS user counts."""
        w = counts * self.user_bw
        cons = self.p_const + self.beta * (w / self.total_bw) * self.p_tx
        cons = np.where(self.modes == _SLEEP, self.sleep_power, cons)
        cons = np.where(self.modes == _OFF, 0.0, cons)
        return cons

    def ledger_consumption_j(self, counts: np.ndarray) -> np.ndarray:
        """Energy booked against the harvest, honouring the ledger setting."""
        rf = self.beta * (counts * self.user_bw / self.total_bw) * self.p_tx
        cons = rf if self.algo.rf_only_ledger else self.p_const + rf
        return np.where(self.modes == _ACTIVE, cons, 0.0)

    def _classify_users(self, server: np.ndarray) -> np.ndarray:
        """Taxonomy codes per user, judged on nominal small-cell footprints."""
        classes = np.full(self.n_users, UNCLASSIFIED, dtype=int)
        if self.n_users == 0:
            return classes
        sbs = self.sbs_ids
        if sbs.size == 0:
            classes[server == self.mbs_id] = UserClass.MMU
            return classes
        inside_any = (self.dist[sbs] <= self.nominal_radius[sbs, None]).any(axis=0)
        dormant = sbs[self.modes[sbs] != _ACTIVE]
        inside_dormant = (
            (self.dist[dormant] <= self.nominal_radius[dormant, None]).any(axis=0)
            if dormant.size else np.zeros(self.n_users, dtype=bool))
        on_mbs = server == self.mbs_id
        on_sbs = (server != UNSERVED) & ~on_mbs
        classes[on_mbs & ~inside_any] = UserClass.MMU
        classes[on_mbs & inside_dormant] = UserClass.SMU
        classes[on_sbs & inside_dormant] = UserClass.SSU
        return classes

    def _finalize(self, server: np.ndarray, unconverged: bool, fixes: int) -> AssociationResult:
        counts = (np.bincount(server[server >= 0], minlength=self.n_bs)
                  if self.n_users else np.zeros(self.n_bs, dtype=int))
        user_bw = np.where(server >= 0, self.user_bw[np.maximum(server, 0)], 0.0)
        return AssociationResult(
            server=server,
            user_class=self._classify_users(server),
            user_bandwidth_hz=user_bw,
            bs_modes=self.modes.copy(),
            bs_p_tx_w=self.p_tx.copy(),
            bs_radius_m=self.radius.copy(),
            bs_used_bw_hz=counts * self.user_bw,
            bs_n_users=counts,
            unconverged=unconverged,
            causality_fixes=fixes,
        )
