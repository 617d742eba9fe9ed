"""Points and closed oriented arcs of the circle R/Z.

All containment and covering predicates are wraparound-aware and take an
absolute endpoint tolerance (default 1e-12).  An arc of length 1 denotes the
full circle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import InputError

TOL = 1e-12


class Angle(float):
    """A point of R/Z, always reduced into [0, 1)."""

    def __new__(cls, value: float) -> "Angle":
        v = float(value) % 1.0
        if v >= 1.0:
            # x % 1.0 rounds up to 1.0 for tiny negative x
            v = 0.0
        return super().__new__(cls, v)


def forward_gap(frm: float, to: float) -> float:
    """Length of the positively oriented walk from `frm` to `to`."""
    g = (float(to) - float(frm)) % 1.0
    if g >= 1.0:
        g = 0.0
    return g


def circle_dist(x: float, y: float) -> float:
    """Shortest distance between two points of R/Z."""
    g = forward_gap(x, y)
    return min(g, 1.0 - g)


def signed_diff(x: float, y: float) -> float:
    """Representative of x - y in [-0.5, 0.5)."""
    d = (float(x) - float(y) + 0.5) % 1.0 - 0.5
    if d >= 0.5:
        d = -0.5
    return d


@dataclass(frozen=True)
class Arc:
    """Closed arc [anchor, anchor + length] of R/Z; length 1 is the full circle."""

    anchor: Angle
    length: float

    def __post_init__(self) -> None:
        if not 0.0 < self.length <= 1.0:
            raise InputError(f"arc length must be in (0, 1], got {self.length}")
        object.__setattr__(self, "anchor", Angle(self.anchor))
        object.__setattr__(self, "length", float(self.length))

    @classmethod
    def full(cls) -> "Arc":
        return cls(Angle(0.0), 1.0)

    @classmethod
    def from_endpoints(cls, left: float, right: float) -> "Arc":
        """Arc from `left` to `right` in positive orientation; endpoints must differ."""
        length = forward_gap(left, right)
        if length == 0.0:
            raise InputError("coincident endpoints give a degenerate arc; use Arc.full() for the circle")
        return cls(Angle(left), length)

    @classmethod
    def centered(cls, center: float, radius: float) -> "Arc":
        if radius <= 0.0:
            raise InputError(f"radius must be positive, got {radius}")
        if 2.0 * radius >= 1.0:
            return cls.full()
        return cls(Angle(center - radius), 2.0 * radius)

    @property
    def is_full(self) -> bool:
        return self.length == 1.0

    @property
    def right(self) -> Angle:
        return Angle(self.anchor + self.length)

    @property
    def midpoint(self) -> Angle:
        return Angle(self.anchor + 0.5 * self.length)

    def as_dict(self) -> dict:
        return {"anchor": float(self.anchor), "length": self.length}


def arc_contains(a: Arc, x: float, tol: float = TOL) -> bool:
    """True iff x lies in the closed arc a."""
    if a.is_full:
        return True
    g = forward_gap(a.anchor, x)
    return g <= a.length + tol or g >= 1.0 - tol


def cover_margin(a: Arc, b: Arc) -> float:
    """How deeply a contains b: min clearance of b's endpoints inside a.

    Positive means a covers b with room to spare, negative means it does not.
    The full circle covers everything with the maximal conceivable margin.
    """
    if a.is_full:
        return 1.0 - b.length if not b.is_full else 1.0
    if b.is_full:
        return a.length - 1.0  # a proper arc never covers the circle
    off = forward_gap(a.anchor, b.anchor)
    if off > 1.0 - TOL:
        off = 0.0
    return min(off, a.length - (off + b.length))


def arc_covers(a: Arc, b: Arc, tol: float = TOL) -> bool:
    """True iff a contains b as closed subsets of the circle."""
    return cover_margin(a, b) >= -tol


def arcs_equal(a: Arc, b: Arc, tol: float = TOL) -> bool:
    if a.is_full or b.is_full:
        return a.is_full and b.is_full
    return circle_dist(a.anchor, b.anchor) <= tol and abs(a.length - b.length) <= tol


def arc_intersects(a: Arc, b: Arc, tol: float = TOL) -> bool:
    """True iff the closed arcs share at least one point."""
    if a.is_full or b.is_full:
        return True
    return forward_gap(a.anchor, b.anchor) <= a.length + tol or forward_gap(b.anchor, a.anchor) <= b.length + tol


def neighborhood(a: Arc, r: float) -> Arc:
    """Closed r-neighborhood of a; saturates to the full circle."""
    if r <= 0.0:
        raise InputError(f"neighborhood radius must be positive, got {r}")
    if a.length + 2.0 * r >= 1.0:
        return Arc.full()
    return Arc(Angle(a.anchor - r), a.length + 2.0 * r)


def image_arc(f: Callable[[float], float], a: Arc) -> Arc:
    """Image of a under an orientation-preserving circle diffeomorphism.

    Endpoint-exact: the image runs from f(left) to f(right) in positive
    orientation.  The full circle maps to the full circle.
    """
    if a.is_full:
        return Arc.full()
    left = Angle(float(f(float(a.anchor))))
    right = Angle(float(f(float(a.right))))
    length = forward_gap(left, right)
    if length == 0.0:
        # injective images of proper arcs are proper; snap tiny collapse
        length = TOL
    return Arc(left, length)


def arc_grid(a: Arc, n: int):
    """n sample points spanning a, endpoints included (n >= 2)."""
    import numpy as np

    if n < 2:
        raise InputError(f"grid size must be >= 2, got {n}")
    span = 1.0 if a.is_full else a.length
    return (float(a.anchor) + np.linspace(0.0, span, n)) % 1.0
