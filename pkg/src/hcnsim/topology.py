"""Base-station layout and user placement.

The network is one macro cell: a single macro BS (MBS) at the origin plus
three small-cell tiers placed deterministically on concentric rings.  Users
are dropped as a Poisson point process over the macro disc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class BsKind(IntEnum):
    """Base-station tier: macro, conventional, renewable or hybrid small cell."""

    MBS = 0
    CSBS = 1
    RSBS = 2
    HSBS = 3


#: Tiers that harvest ambient energy (renewable-only and hybrid small cells).
EH_KINDS = (BsKind.RSBS, BsKind.HSBS)


class LayoutError(ValueError):
    """Raised when a layout configuration cannot be realised."""


@dataclass(frozen=True)
class Position:
    """Planar position in metres."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class LayoutConfig:
    """Geometry knobs for the deterministic ring layout.

    Counts default to the reference deployment: one MBS, 24 conventional,
    16 renewable and 9 hybrid small cells inside a 1730 m macro cell with
    350 m small-cell coverage.
    """

    macro_radius_m: float = 1730.0
    sbs_radius_m: float = 350.0
    n_csbs: int = 24
    n_rsbs: int = 16
    n_hsbs: int = 9
    min_separation_m: float = 100.0


@dataclass(frozen=True)
class NetworkLayout:
    """Immutable BS placement: ids are positions' indices, MBS is id 0."""

    macro_radius_m: float
    kinds: tuple[BsKind, ...]
    positions: tuple[Position, ...]
    coverage_radii_m: tuple[float, ...]
    counts: tuple[int, int, int, int] = field(default=(1, 0, 0, 0))

    @property
    def n_bs(self) -> int:
        return len(self.kinds)

    def ids_of(self, kind: BsKind) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k == kind)

    def xy(self) -> np.ndarray:
        """(n_bs, 2) position array."""
        return np.array([(p.x, p.y) for p in self.positions], dtype=float)


def _ring(n: int, radius: float, phase: float) -> list[Position]:
    return [
        Position(radius * math.cos(phase + 2.0 * math.pi * k / n),
                 radius * math.sin(phase + 2.0 * math.pi * k / n))
        for k in range(n)
    ]


def build_layout(cfg: LayoutConfig) -> NetworkLayout:
    """Place all base stations deterministically.

    The MBS sits at the origin and the conventional cells fill two rings
    around it (up to 8 at 0.35*R, the rest at 0.70*R).  The harvesting
    tiers surround the conventional cells: HSBSs on a ring at 0.52*R
    between the two conventional rings, RSBSs on an outer ring at 0.80*R
    rotated half a step so they interleave with the outer conventional
    ring.  The same config always yields the identical layout.

    Raises:
        LayoutError: negative counts, non-positive radii, or two BSs closer
            than ``min_separation_m`` (the offending pair is named).
    """
    if cfg.macro_radius_m <= 0:
        raise LayoutError(f"macro_radius_m must be > 0, got {cfg.macro_radius_m}")
    if cfg.sbs_radius_m <= 0:
        raise LayoutError(f"sbs_radius_m must be > 0, got {cfg.sbs_radius_m}")
    for name in ("n_csbs", "n_rsbs", "n_hsbs"):
        if getattr(cfg, name) < 0:
            raise LayoutError(f"{name} must be >= 0, got {getattr(cfg, name)}")

    R = cfg.macro_radius_m
    kinds: list[BsKind] = [BsKind.MBS]
    positions: list[Position] = [Position(0.0, 0.0)]
    radii: list[float] = [R]

    n_inner = min(cfg.n_csbs, 8)
    n_outer = cfg.n_csbs - n_inner
    csbs = _ring(n_inner, 0.35 * R, 0.0) if n_inner else []
    if n_outer:
        csbs += _ring(n_outer, 0.70 * R, 0.0)
    rsbs = _ring(cfg.n_rsbs, 0.80 * R, math.pi / cfg.n_rsbs) if cfg.n_rsbs else []
    hsbs = _ring(cfg.n_hsbs, 0.52 * R, 0.0) if cfg.n_hsbs else []

    for kind, ring in ((BsKind.CSBS, csbs), (BsKind.RSBS, rsbs), (BsKind.HSBS, hsbs)):
        for pos in ring:
            kinds.append(kind)
            positions.append(pos)
            radii.append(cfg.sbs_radius_m)

    for i in range(len(positions)):
        for j in range(i + 1, len(positions)):
            d = positions[i].distance_to(positions[j])
            if d < cfg.min_separation_m:
                raise LayoutError(
                    f"BS {i} ({kinds[i].name}) and BS {j} ({kinds[j].name}) are "
                    f"{d:.1f} m apart, below the {cfg.min_separation_m:.1f} m minimum"
                )

    counts = (1, cfg.n_csbs, cfg.n_rsbs, cfg.n_hsbs)
    return NetworkLayout(
        macro_radius_m=R,
        kinds=tuple(kinds),
        positions=tuple(positions),
        coverage_radii_m=tuple(radii),
        counts=counts,
    )


def sample_users(density: float, macro_radius_m: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Draw one Poisson point process realisation over the macro disc.

    ``density`` is the expected number of users in the whole macro cell.
    Returns an (n, 2) array of positions in metres; n is Poisson(density).
    """
    if density < 0:
        raise ValueError(f"density must be >= 0, got {density}")
    n = int(rng.poisson(density))
    if n == 0:
        return np.empty((0, 2), dtype=float)
    # radius ~ R*sqrt(U) gives uniform area density on the disc
    r = macro_radius_m * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))
