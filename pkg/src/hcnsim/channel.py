"""Link gains, SIR and per-user achievable rate.

Interference-limited downlink: thermal noise is neglected, every active BS
interferes with every link at its full current transmit power (reuse
factor 1).  Fading is unit-mean exponential (Rayleigh power) per link, or
exactly 1 in deterministic mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: SIR reported when a user sees no interferer at all (~90 dB).
SIR_CAP = 1e9

#: Path-loss exponent for the reference urban scenario.
DEFAULT_PATH_LOSS_EXPONENT = 3.5


@dataclass(frozen=True)
class LinkGain:
    """One link's propagation state: exponent alpha, fading h, distance r."""

    path_loss_exponent: float = DEFAULT_PATH_LOSS_EXPONENT
    fading: float = 1.0
    distance_m: float = 1.0

    def __post_init__(self):
        if self.path_loss_exponent <= 2.0:
            raise ValueError(f"path loss exponent must exceed 2, got {self.path_loss_exponent}")
        if self.fading < 0:
            raise ValueError(f"fading must be >= 0, got {self.fading}")


def received_power(p_tx_w: float, gain: LinkGain) -> float:
    """Received power p_tx * h * r^(-alpha) in watts.

    Raises:
        ValueError: zero distance (singular path loss) or negative power.
    """
    if p_tx_w < 0:
        raise ValueError(f"transmit power must be >= 0, got {p_tx_w}")
    if gain.distance_m <= 0:
        raise ValueError(f"distance must be > 0, got {gain.distance_m} m")
    return p_tx_w * gain.fading * gain.distance_m ** (-gain.path_loss_exponent)


def sample_fading(rng: np.random.Generator, shape: tuple[int, ...],
                  deterministic: bool = False) -> np.ndarray:
    """Unit-mean exponential fading draws, or all-ones when deterministic."""
    if deterministic:
        return np.ones(shape, dtype=float)
    return rng.standard_exponential(shape)


def sir(user_xy: np.ndarray, server: int, active_ids: np.ndarray,
        bs_xy: np.ndarray, p_tx_w: np.ndarray, fading: np.ndarray | None = None,
        alpha: float = DEFAULT_PATH_LOSS_EXPONENT, cap: float = SIR_CAP) -> float:
    """Signal-to-interference ratio of one user served by ``server``.

    The interference set is every active BS other than the server, each at
    its current transmit power.  ``fading`` holds per-BS channel gains for
    this user (defaults to 1 on every link).  An empty interference set
    yields ``cap``.

    Raises:
        ValueError: server not in the active set, or user co-located with
            an active BS.
    """
    active_ids = np.asarray(active_ids, dtype=int)
    if server not in active_ids:
        raise ValueError(f"server BS {server} is not active")
    d = np.hypot(bs_xy[active_ids, 0] - user_xy[0], bs_xy[active_ids, 1] - user_xy[1])
    if np.any(d <= 0):
        raise ValueError("user is co-located with an active BS (zero distance)")
    h = np.ones(len(active_ids)) if fading is None else np.asarray(fading, dtype=float)[active_ids]
    rx = p_tx_w[active_ids] * h * d ** (-alpha)
    signal = rx[active_ids == server][0]
    interference = float(rx.sum() - signal)
    if interference <= 0.0:
        return cap
    return min(float(signal / interference), cap)


def user_rate(bandwidth_hz: float, sir_value: float) -> float:
    """Shannon rate B * log2(1 + SIR) in bit/s."""
    if bandwidth_hz < 0:
        raise ValueError(f"bandwidth must be >= 0, got {bandwidth_hz}")
    if sir_value < 0:
        raise ValueError(f"SIR must be >= 0, got {sir_value}")
    return bandwidth_hz * np.log2(1.0 + sir_value)


def rate_matrix_bps(served_user_idx: np.ndarray, server_ids: np.ndarray,
                    active_ids: np.ndarray, dist_bs_user: np.ndarray,
                    p_tx_w: np.ndarray, fading: np.ndarray,
                    bandwidth_hz, alpha: float,
                    cap: float = SIR_CAP) -> np.ndarray:
    """Vectorised per-user rates for all served users of one snapshot.

    ``dist_bs_user`` and ``fading`` are (n_bs, n_users); ``server_ids`` maps
    each served user (indexed by ``served_user_idx``) to its serving BS id.
    ``bandwidth_hz`` may be a scalar or one value per served user.
    """
    if served_user_idx.size == 0:
        return np.zeros(0, dtype=float)
    rx = (p_tx_w[active_ids, None]
          * fading[np.ix_(active_ids, served_user_idx)]
          * dist_bs_user[np.ix_(active_ids, served_user_idx)] ** (-alpha))
    total = rx.sum(axis=0)
    # row index of each user's server within the active set
    row_of = np.full(dist_bs_user.shape[0], -1, dtype=int)
    row_of[active_ids] = np.arange(len(active_ids))
    sig = rx[row_of[server_ids], np.arange(len(server_ids))]
    interference = total - sig
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(interference > 0.0, sig / np.maximum(interference, 1e-300), cap)
    ratio = np.minimum(ratio, cap)
    return bandwidth_hz * np.log2(1.0 + ratio)
