"""Concrete circle-diffeomorphism families and the step skew-product cocycle.

A skew system is an alphabet of k orientation-preserving C^1 circle
diffeomorphisms acting as an iterated function system.  Finite words act by
composition, and every composition carries its accumulated log derivative so
that long words never under- or overflow.

Three map families are built in:

* ``Rotation`` -- rigid rotation, derivative identically 1.
* ``Moebius`` -- the circle map induced on R/Z by z -> (z + t) / (1 + t z)
  on the unit complex circle under x -> exp(2 pi i x).  Fixed points sit at
  x = 0 (derivative (1 - t)/(1 + t)) and x = 0.5 (derivative (1 + t)/(1 - t)).
* ``PiecewiseSmooth`` -- a monotone C^1 piecewise-cubic interpolation through
  prescribed knots in a degree-one lift, used to realize affine expanding
  pieces closed up to a circle diffeomorphism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circle import Angle, Arc
from .errors import InputError

Word = tuple[int, ...]

GOLDEN_ROTATION = (math.sqrt(5.0) - 1.0) / 2.0


def _wrap(x):
    out = np.asarray(x, dtype=float) % 1.0
    return np.where(out >= 1.0, 0.0, out)


class FiberMap:
    """Orientation-preserving circle diffeomorphism with evaluable inverse.

    All four evaluators accept scalars or numpy arrays of points in [0, 1).
    """

    def eval(self, x):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError

    def inv_eval(self, y):
        raise NotImplementedError

    def inv_deriv(self, y):
        raise NotImplementedError

    def inverse(self) -> "FiberMap":
        return _InverseMap(self)

    def __call__(self, x):
        return self.eval(x)

    def describe(self) -> dict:
        raise NotImplementedError


class _InverseMap(FiberMap):
    def __init__(self, base: FiberMap):
        self.base = base

    def eval(self, x):
        return self.base.inv_eval(x)

    def deriv(self, x):
        return self.base.inv_deriv(x)

    def inv_eval(self, y):
        return self.base.eval(y)

    def inv_deriv(self, y):
        return self.base.deriv(y)

    def inverse(self) -> FiberMap:
        return self.base

    def describe(self) -> dict:
        return {"family": "inverse", "of": self.base.describe()}


class Rotation(FiberMap):
    def __init__(self, angle: float):
        self.angle = float(angle) % 1.0

    def eval(self, x):
        return _wrap(np.asarray(x, dtype=float) + self.angle)

    def deriv(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def inv_eval(self, y):
        return _wrap(np.asarray(y, dtype=float) - self.angle)

    def inv_deriv(self, y):
        return np.ones_like(np.asarray(y, dtype=float))

    def describe(self) -> dict:
        return {"family": "rotation", "angle": self.angle}


class Moebius(FiberMap):
    """Circle map of z -> (z + t)/(1 + t z) on the unit circle, t in (-1, 1).

    The induced derivative has the closed form
    (1 - t^2) / (1 + t^2 + 2 t cos(2 pi x)), so the attracting fixed point at
    x = 0 has multiplier (1 - t)/(1 + t) and the repelling one at x = 0.5 has
    multiplier (1 + t)/(1 - t).  The inverse is the t -> -t member.
    """

    def __init__(self, t: float):
        if not -1.0 < t < 1.0:
            raise InputError(f"Moebius parameter must be in (-1, 1), got {t}")
        self.t = float(t)

    def eval(self, x):
        theta = 2.0 * np.pi * np.asarray(x, dtype=float)
        z = np.cos(theta) + 1j * np.sin(theta)
        w = (z + self.t) / (1.0 + self.t * z)
        return _wrap(np.angle(w) / (2.0 * np.pi))

    def deriv(self, x):
        theta = 2.0 * np.pi * np.asarray(x, dtype=float)
        t = self.t
        return (1.0 - t * t) / (1.0 + t * t + 2.0 * t * np.cos(theta))

    def inv_eval(self, y):
        return Moebius(-self.t).eval(y)

    def inv_deriv(self, y):
        return Moebius(-self.t).deriv(y)

    def inverse(self) -> FiberMap:
        return Moebius(-self.t)

    def describe(self) -> dict:
        return {"family": "moebius", "t": self.t}


class PiecewiseSmooth(FiberMap):
    """Monotone C^1 piecewise-cubic circle diffeomorphism through given knots.

    ``knots`` is a sequence of (x, y, slope) triples in a degree-one lift:
    x strictly increasing inside one period, y strictly increasing, slopes
    positive.  The closing knot (x0 + 1, y0 + 1, slope0) is appended
    automatically.  Each segment is the cubic Hermite interpolant; slopes are
    clamped to three times the segment secant where needed, which keeps the
    derivative strictly positive (Fritsch-Carlson box condition).
    """

    def __init__(self, knots: Sequence[tuple[float, float, float]]):
        if len(knots) < 1:
            raise InputError("need at least one knot")
        xs = [float(k[0]) for k in knots]
        ys = [float(k[1]) for k in knots]
        ms = [float(k[2]) for k in knots]
        if any(m <= 0.0 for m in ms):
            raise InputError("knot slopes must be positive")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise InputError("knot abscissae must be strictly increasing")
        if xs[-1] - xs[0] >= 1.0:
            raise InputError("knots must fit inside one period")
        xs.append(xs[0] + 1.0)
        ys.append(ys[0] + 1.0)
        ms.append(ms[0])
        if any(b <= a for a, b in zip(ys, ys[1:])):
            raise InputError("knot ordinates must be strictly increasing within one period")
        secants = [(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)]
        clamped = list(ms)
        for i in range(len(xs) - 1):
            # keep m/secant <= 3 on both segment ends
            cap = 3.0 * secants[i]
            if clamped[i] > cap:
                clamped[i] = cap
            if clamped[i + 1] > cap:
                clamped[i + 1] = cap
        self._x = np.array(xs)
        self._y = np.array(ys)
        self._m = np.array(clamped)
        # cubic coefficients per segment: H(s) = y_i + c1 s + c2 s^2 + c3 s^3
        h = self._x[1:] - self._x[:-1]
        dy = self._y[1:] - self._y[:-1]
        self._h = h
        self._c1 = h * self._m[:-1]
        self._c2 = 3.0 * dy - 2.0 * h * self._m[:-1] - h * self._m[1:]
        self._c3 = -2.0 * dy + h * self._m[:-1] + h * self._m[1:]
        self._input_knots = [(float(a), float(b), float(c)) for a, b, c in knots]

    def _segment(self, xl):
        idx = np.searchsorted(self._x, xl, side="right") - 1
        return np.minimum(np.maximum(idx, 0), len(self._x) - 2)

    def _lift_x(self, x):
        x = np.asarray(x, dtype=float)
        return self._x[0] + (x - self._x[0]) % 1.0

    def _eval_lift(self, xl):
        i = self._segment(xl)
        s = (xl - self._x[i]) / self._h[i]
        return self._y[i] + s * (self._c1[i] + s * (self._c2[i] + s * self._c3[i]))

    def _deriv_lift(self, xl):
        i = self._segment(xl)
        s = (xl - self._x[i]) / self._h[i]
        return (self._c1[i] + s * (2.0 * self._c2[i] + s * 3.0 * self._c3[i])) / self._h[i]

    def eval(self, x):
        return _wrap(self._eval_lift(self._lift_x(x)))

    def deriv(self, x):
        return self._deriv_lift(self._lift_x(x))

    def inv_eval(self, y):
        y = np.asarray(y, dtype=float)
        y0 = self._y[0]
        yl = y0 + (y - y0) % 1.0
        i = np.minimum(np.maximum(np.searchsorted(self._y, yl, side="right") - 1, 0), len(self._y) - 2)
        c1, c2, c3 = self._c1[i], self._c2[i], self._c3[i]
        target = yl - self._y[i]
        # safeguarded Newton on the monotone segment cubic
        s = np.minimum(np.maximum(target / (self._y[i + 1] - self._y[i]), 0.0), 1.0)
        for _ in range(30):
            val = s * (c1 + s * (c2 + s * c3)) - target
            der = c1 + s * (2.0 * c2 + s * 3.0 * c3)
            step = val / der
            s = np.minimum(np.maximum(s - step, 0.0), 1.0)
            if np.all(np.abs(step) < 1e-16):
                break
        return _wrap(self._x[i] + s * self._h[i])

    def inv_deriv(self, y):
        return 1.0 / self._deriv_lift(self._lift_x(self.inv_eval(y)))

    def describe(self) -> dict:
        return {"family": "piecewise_smooth", "knots": self._input_knots}


_FAMILIES = {
    "rotation": lambda p: Rotation(p["angle"]),
    "moebius": lambda p: Moebius(p["t"]),
    "piecewise_smooth": lambda p: PiecewiseSmooth([tuple(k) for k in p["knots"]]),
}


def map_from_description(desc: dict) -> FiberMap:
    try:
        return _FAMILIES[desc["family"]](desc)
    except KeyError as exc:
        raise InputError(f"unknown map family in {desc!r}") from exc


@dataclass(frozen=True)
class SkewSystem:
    """Alphabet of k >= 2 fiber maps driven by the full shift."""

    maps: tuple[FiberMap, ...]

    def __post_init__(self) -> None:
        if len(self.maps) < 2:
            raise InputError(f"a skew system needs k >= 2 maps, got {len(self.maps)}")

    @property
    def k(self) -> int:
        return len(self.maps)

    def map(self, symbol: int) -> FiberMap:
        if not 0 <= symbol < self.k:
            raise InputError(f"symbol {symbol} outside alphabet of size {self.k}")
        return self.maps[symbol]

    def inverse(self) -> "SkewSystem":
        return SkewSystem(tuple(m.inverse() for m in self.maps))

    def describe(self) -> dict:
        return {"k": self.k, "maps": [m.describe() for m in self.maps]}


@dataclass(frozen=True)
class CocycleResult:
    point: Angle
    log_deriv: float


def _check_word(sys: SkewSystem, word: Word) -> None:
    for s in word:
        if not 0 <= s < sys.k:
            raise InputError(f"symbol {s} outside alphabet of size {sys.k}")


def orbit_eval(sys: SkewSystem, word: Word, xs):
    """Vectorized forward composition: returns (points, log derivatives)."""
    _check_word(sys, word)
    pts = _wrap(xs)
    logs = np.zeros_like(pts)
    for s in word:
        f = sys.maps[s]
        logs = logs + np.log(f.deriv(pts))
        pts = _wrap(f.eval(pts))
    return pts, logs


def orbit_eval_backward(sys: SkewSystem, word: Word, xs):
    """Vectorized inverse composition (f_[word])^{-1} with its log derivative."""
    _check_word(sys, word)
    pts = _wrap(xs)
    logs = np.zeros_like(pts)
    for s in reversed(word):
        f = sys.maps[s]
        logs = logs + np.log(f.inv_deriv(pts))
        pts = _wrap(f.inv_eval(pts))
    return pts, logs


def fiber_eval(sys: SkewSystem, word: Word, x: float) -> CocycleResult:
    """f_[word](x) together with log |(f_[word])'(x)|; the empty word is the identity."""
    pts, logs = orbit_eval(sys, word, np.asarray(float(x)))
    return CocycleResult(Angle(float(pts)), float(logs))


def fiber_eval_backward(sys: SkewSystem, word: Word, x: float) -> CocycleResult:
    """(f_[word])^{-1}(x) together with the log derivative of the inverse at x."""
    pts, logs = orbit_eval_backward(sys, word, np.asarray(float(x)))
    return CocycleResult(Angle(float(pts)), float(logs))


def _arc_between(left: float, right: float) -> Arc:
    length = (float(right) - float(left)) % 1.0
    if length == 0.0 or length >= 1.0:
        # endpoints of an injective image collapsed in float; keep a sliver
        length = 1e-15
    return Arc(Angle(left), length)


def word_image(sys: SkewSystem, word: Word, a: Arc) -> Arc:
    """Endpoint-exact image arc of a under f_[word]."""
    if a.is_full:
        return Arc.full()
    pts = np.asarray([float(a.anchor), float(a.right)])
    for s in word:
        pts = _wrap(sys.maps[s].eval(pts))
    return _arc_between(pts[0], pts[1])


def word_preimage(sys: SkewSystem, word: Word, a: Arc) -> Arc:
    """Endpoint-exact preimage arc of a under f_[word]."""
    if a.is_full:
        return Arc.full()
    pts = np.asarray([float(a.anchor), float(a.right)])
    for s in reversed(word):
        pts = _wrap(sys.maps[s].inv_eval(pts))
    return _arc_between(pts[0], pts[1])


def uniform_norm(sys: SkewSystem, grid_size: int = 10_000) -> float:
    """Grid supremum of all fiber derivatives and inverse derivatives.

    Nondecreasing under refinement of the (nested) grid j/N.
    """
    if grid_size < 2:
        raise InputError(f"grid_size must be >= 2, got {grid_size}")
    xs = np.arange(grid_size, dtype=float) / grid_size
    best = 1.0
    for f in sys.maps:
        best = max(best, float(np.max(f.deriv(xs))), float(np.max(f.inv_deriv(xs))))
    return best


def modulus_of_continuity(sys: SkewSystem, delta: float, grid_size: int = 10_000) -> float:
    """Grid approximation of the worst oscillation of log |f_i'| at scale delta."""
    if not 0.0 < delta < 0.5:
        raise InputError(f"delta must be in (0, 0.5), got {delta}")
    if grid_size < 2:
        raise InputError(f"grid_size must be >= 2, got {grid_size}")
    from scipy.ndimage import maximum_filter1d, minimum_filter1d

    xs = np.arange(grid_size, dtype=float) / grid_size
    window = max(2, int(math.floor(delta * grid_size)) + 1)
    worst = 0.0
    for f in sys.maps:
        g = np.log(f.deriv(xs))
        osc = maximum_filter1d(g, window, mode="wrap") - minimum_filter1d(g, window, mode="wrap")
        worst = max(worst, float(np.max(osc)))
    return worst


@dataclass(frozen=True)
class BlenderSpec:
    """Expanding-blender data: domain [a, b], superposition [c, d], branch words.

    The two compositions g0 = f_[word0] and g1 = f_[word1] are required to be
    uniformly expanding by beta on [a, d] and [c, b] respectively, to fix
    g0(a) = g1(c) = a, and to satisfy g0([a, d]) = [a, b], g1([c, b]) in [a, b].
    ``beta_tilde`` is an upper bound for both branch derivatives on those
    intervals.
    """

    a: Angle
    b: Angle
    c: Angle
    d: Angle
    beta: float
    beta_tilde: float
    word0: Word = (0,)
    word1: Word = (1,)

    @property
    def domain(self) -> Arc:
        return Arc.from_endpoints(self.a, self.b)

    @property
    def superposition(self) -> Arc:
        return Arc.from_endpoints(self.c, self.d)

    @property
    def expansion_span0(self) -> Arc:
        return Arc.from_endpoints(self.a, self.d)

    @property
    def expansion_span1(self) -> Arc:
        return Arc.from_endpoints(self.c, self.b)

    def as_dict(self) -> dict:
        return {
            "a": float(self.a), "b": float(self.b), "c": float(self.c), "d": float(self.d),
            "beta": self.beta, "beta_tilde": self.beta_tilde,
            "word0": list(self.word0), "word1": list(self.word1),
        }


def blender_maps() -> tuple[PiecewiseSmooth, PiecewiseSmooth]:
    """The canonical synthetic expanding-blender pair.

    g0 is affine with slope 5/3 on [0, 0.3] fixing 0; g1 is affine with slope
    3/2 on [0.2, 0.5] sending 0.2 to 0.  Both are closed to circle
    diffeomorphisms by a single monotone cubic on the complementary arc.
    """
    g0 = PiecewiseSmooth([(0.0, 0.0, 5.0 / 3.0), (0.3, 0.5, 5.0 / 3.0)])
    g1 = PiecewiseSmooth([(0.2, 0.0, 1.5), (0.5, 0.45, 1.5)])
    return g0, g1


def blender_system() -> tuple[SkewSystem, BlenderSpec]:
    g0, g1 = blender_maps()
    spec = BlenderSpec(
        a=Angle(0.0), b=Angle(0.5), c=Angle(0.2), d=Angle(0.3),
        beta=1.5, beta_tilde=5.0 / 3.0, word0=(0,), word1=(1,),
    )
    return SkewSystem((g0, g1)), spec


def mobius_rotation_system(t: float = 0.5, rotation: float = GOLDEN_ROTATION) -> SkewSystem:
    """Contraction-expansion map plus an irrational rotation, k = 2."""
    return SkewSystem((Moebius(t), Rotation(rotation)))


def rotations_system(angles: Sequence[float] = (0.25, 0.1)) -> SkewSystem:
    return SkewSystem(tuple(Rotation(a) for a in angles))


def system_from_description(desc: dict) -> SkewSystem:
    """Build a system from a config dictionary.

    Either ``{"kind": "blender" | "mobius_rotation" | "rotations", ...params}``
    or ``{"maps": [{...}, ...]}`` with per-map family descriptions.
    """
    kind = desc.get("kind")
    if kind == "blender":
        return blender_system()[0]
    if kind == "mobius_rotation":
        return mobius_rotation_system(desc.get("t", 0.5), desc.get("rotation", GOLDEN_ROTATION))
    if kind == "rotations":
        return rotations_system(desc.get("angles", (0.25, 0.1)))
    if "maps" in desc:
        return SkewSystem(tuple(map_from_description(m) for m in desc["maps"]))
    raise InputError(f"cannot interpret system description {desc!r}")
