"""Social potential field between evacuees.

Each pair of evacuees on the same floor within the influence radius interacts
through an inverse-power law ``-c1 / r**sigma1 + c2 / r**sigma2``: negative
values repel, positive values attract. With the default constants the two
terms balance close to 7 m, so evacuees settle into loose groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

from scipy.optimize import brentq

from evacnav.building import BuildingGraph

COINCIDENT_R_M = 0.01
MIN_FORCE = 1e-6


@dataclass(frozen=True)
class SpfParams:
    c1: float = 20.0
    c2: float = 15.0
    sigma1: float = 0.9478
    sigma2: float = 0.8
    influence_radius_m: float = 20.0

    def __post_init__(self) -> None:
        for name in ("c1", "c2", "sigma1", "sigma2", "influence_radius_m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"spf.{name} must be positive, got {getattr(self, name)}")


class ForceVector(NamedTuple):
    fx: float
    fy: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.fx, self.fy)


def pairwise_force(r: float, p: SpfParams = SpfParams()) -> float:
    if not r > 0:
        raise ValueError(f"pairwise_force needs a positive distance, got {r}")
    if r > p.influence_radius_m:
        return 0.0
    return -p.c1 / r**p.sigma1 + p.c2 / r**p.sigma2


def equilibrium_distance(p: SpfParams = SpfParams()) -> float:
    """Distance at which repulsion and attraction cancel."""
    f = lambda r: -p.c1 / r**p.sigma1 + p.c2 / r**p.sigma2
    return brentq(f, 1e-3, 1e4, xtol=1e-12)


def resultant_force(
    self_pos: tuple[float, float],
    others: Iterable[tuple[float, float]],
    p: SpfParams = SpfParams(),
) -> ForceVector:
    """Sum of pairwise forces on an evacuee at ``self_pos``.

    Positive scalars pull toward the other evacuee, negative ones push away.
    A coincident evacuee is treated as sitting 0.01 m away along +x.
    """
    x0, y0 = self_pos
    fx = fy = 0.0
    radius = p.influence_radius_m
    for x, y in others:
        dx, dy = x - x0, y - y0
        r = math.hypot(dx, dy)
        if r > radius:
            continue
        if r == 0.0:
            r, ux, uy = COINCIDENT_R_M, 1.0, 0.0
        else:
            ux, uy = dx / r, dy / r
        f = -p.c1 / r**p.sigma1 + p.c2 / r**p.sigma2
        fx += f * ux
        fy += f * uy
    return ForceVector(fx, fy)


def spf_next_node(
    g: BuildingGraph,
    current: int,
    force: ForceVector | Sequence[float],
    allowed: Callable[[int], bool] | None = None,
) -> int | None:
    """Same-floor neighbour whose direction best matches ``force``.

    Ties go to the smallest node id. ``allowed`` optionally filters
    candidates (e.g. neighbours known to be on fire).
    """
    here = g.node(current)
    fx, fy = force
    norm = math.hypot(fx, fy)
    if norm < MIN_FORCE:
        return None
    best, best_cos = None, -math.inf
    for v in g.adjacency[current]:
        nv = g.nodes[v]
        if nv.floor != here.floor or (allowed is not None and not allowed(v)):
            continue
        dx, dy = nv.x_m - here.x_m, nv.y_m - here.y_m
        d = math.hypot(dx, dy)
        if d == 0.0:
            continue
        cos = (fx * dx + fy * dy) / (norm * d)
        # neighbours are sorted, so strict improvement keeps the smallest id on ties;
        # the tolerance absorbs rounding in otherwise equal cosines
        if cos > best_cos + 1e-12:
            best, best_cos = v, cos
    return best
