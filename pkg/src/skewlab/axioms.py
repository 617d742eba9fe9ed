"""Numerical verification of the covering and accessibility axioms.

The controlled-expanding-covering axiom for a base interval J asks that every
small arc H meeting J admits a word whose composition maps H over a fixed
neighborhood of J, with word length at most ``slope * |log |H|| + intercept``
and pointwise log-derivative at least ``rate`` per step.  This module
estimates those constants on concrete systems, certifies individual
coverings, and implements the two constructive refinements used downstream:
the bounded-length recursion (two-sided word length) and the three-phase
distortion-controlled covering.

Covering words come from interchangeable strategies:

* ``BfsCovering`` -- breadth-first search, shortest word first, lexicographic
  within a length.  Deterministic, exhaustive, exponential in depth.
* ``SuccessorCovering`` -- the deterministic blender iteration: expand inside
  the branch domains until the superposition interval is covered, then follow
  the fixed tail through the boundary fixed point.  Linear time, arbitrarily
  small arcs.
* ``BurstCovering`` -- greedy stages of the form (positioning burst, one
  expansion symbol), chosen by expansion rate.  Handles systems whose
  expansion region must be re-entered by rotation-like bursts at depths far
  beyond breadth-first reach.

Every strategy's output is validated by the same certificate checker, so the
search heuristics never weaken the certified properties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .circle import (
    Arc,
    arc_contains,
    arc_covers,
    arc_grid,
    arc_intersects,
    cover_margin,
    neighborhood,
)
from .errors import ConstructionError, InputError
from .systems import (
    BlenderSpec,
    SkewSystem,
    Word,
    modulus_of_continuity,
    orbit_eval,
    uniform_norm,
    word_image,
    word_preimage,
)

SAFETY = 1e-9


@dataclass(frozen=True)
class CoveringConstants:
    """Constants of the controlled covering axiom for one base interval.

    ``h_max``: largest arc length the covering is certified for.
    ``slope``/``intercept``: word-length envelope l <= slope*|log|H|| + intercept.
    ``margin``: radius of the neighborhood of J that must be covered.
    ``rate``: certified per-step log expansion on the source arc.
    """

    h_max: float
    slope: float
    intercept: float
    margin: float
    rate: float

    def length_bound(self, arc_length: float) -> float:
        return self.slope * abs(math.log(arc_length)) + self.intercept

    def as_dict(self) -> dict:
        return {
            "h_max": self.h_max, "slope": self.slope, "intercept": self.intercept,
            "margin": self.margin, "rate": self.rate,
        }


@dataclass(frozen=True)
class CoveringCertificate:
    """A covering word together with the data needed to recheck it."""

    word: Word
    source: Arc
    target: Arc
    image: Arc
    min_log_deriv: float
    target_met: bool
    core_steps: int | None = None

    @property
    def length(self) -> int:
        return len(self.word)

    def as_dict(self) -> dict:
        return {
            "word": list(self.word), "source": self.source.as_dict(),
            "target": self.target.as_dict(), "image": self.image.as_dict(),
            "min_log_deriv": self.min_log_deriv, "target_met": self.target_met,
            "core_steps": self.core_steps,
        }


def grid_min_log_deriv(sys: SkewSystem, word: Word, source: Arc, grid: int = 1000) -> float:
    """Grid minimum over the source arc of the word's accumulated log derivative."""
    xs = arc_grid(source, grid)
    _, logs = orbit_eval(sys, word, xs)
    return float(np.min(logs))


def make_certificate(
    sys: SkewSystem, word: Word, source: Arc, target: Arc,
    grid: int = 1000, core_steps: int | None = None, safety: float = SAFETY,
) -> CoveringCertificate:
    image = word_image(sys, word, source)
    return CoveringCertificate(
        word=word, source=source, target=target, image=image,
        min_log_deriv=grid_min_log_deriv(sys, word, source, grid),
        target_met=cover_margin(image, target) >= safety,
        core_steps=core_steps,
    )


def revalidate_certificate(
    sys: SkewSystem, cert: CoveringCertificate, rate: float = 0.0, grid: int = 1000
) -> dict:
    """Recompute image, covering, and expansion of a certificate from scratch."""
    fresh = make_certificate(sys, cert.word, cert.source, cert.target, grid, cert.core_steps)
    return {
        "target_met": fresh.target_met,
        "cover_margin": cover_margin(fresh.image, fresh.target),
        "min_log_deriv": fresh.min_log_deriv,
        "expansion_ok": fresh.min_log_deriv >= rate * len(cert.word) - 1e-9,
        "matches": fresh.target_met == cert.target_met
        and abs(fresh.min_log_deriv - cert.min_log_deriv) <= 1e-7,
    }


# ---------------------------------------------------------------------------
# blender conditions and the successor iteration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionResult:
    ok: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True)
class BlenderReport:
    expansion: ConditionResult
    boundary: ConditionResult
    covering: ConditionResult

    @property
    def ok(self) -> bool:
        return self.expansion.ok and self.boundary.ok and self.covering.ok

    def as_dict(self) -> dict:
        return {
            name: {"ok": c.ok, "margin": c.margin, "detail": c.detail}
            for name, c in [("expansion", self.expansion), ("boundary", self.boundary), ("covering", self.covering)]
        }


def _branch_deriv(sys: SkewSystem, word: Word, xs):
    _, logs = orbit_eval(sys, word, xs)
    return np.exp(logs)


def blender_check(
    sys: SkewSystem, spec: BlenderSpec, beta: float | None = None,
    grid_size: int = 10_000, boundary_tol: float = 1e-9, cover_tol: float = 1e-9,
) -> BlenderReport:
    """Check the three expanding-blender conditions on a grid.

    Condition 1: both branch derivatives are at least beta on their expansion
    spans.  Condition 2: branch 0 fixes a and branch 1 sends c to a.
    Condition 3: branch 0 maps [a, d] exactly onto [a, b] and branch 1 maps
    [c, b] into [a, b].
    """
    beta = spec.beta if beta is None else float(beta)
    if beta <= 1.0:
        raise InputError(f"blender expansion constant must exceed 1, got {beta}")
    ga = (spec.c - spec.a) % 1.0
    gd = (spec.d - spec.a) % 1.0
    gb = (spec.b - spec.a) % 1.0
    if not 0.0 < ga < gd < gb:
        raise InputError("blender points must satisfy a < c < d < b in the arc order")

    span0, span1 = spec.expansion_span0, spec.expansion_span1
    d0 = _branch_deriv(sys, spec.word0, arc_grid(span0, grid_size))
    d1 = _branch_deriv(sys, spec.word1, arc_grid(span1, grid_size))
    m_exp = float(min(d0.min(), d1.min()) - beta)
    expansion = ConditionResult(m_exp >= -1e-12, m_exp, f"min g0'={d0.min():.6g}, min g1'={d1.min():.6g}")

    from .circle import circle_dist
    from .systems import fiber_eval

    e0 = circle_dist(fiber_eval(sys, spec.word0, spec.a).point, spec.a)
    e1 = circle_dist(fiber_eval(sys, spec.word1, spec.c).point, spec.a)
    worst = max(e0, e1)
    boundary = ConditionResult(worst <= boundary_tol, boundary_tol - worst, f"|g0(a)-a|={e0:.3g}, |g1(c)-a|={e1:.3g}")

    img0 = word_image(sys, spec.word0, span0)
    img1 = word_image(sys, spec.word1, span1)
    dom = spec.domain
    eq_err = max(
        abs(cover_margin(img0, dom)), abs(cover_margin(dom, img0)),
    )
    inv_margin = cover_margin(dom, img1)
    cov_ok = eq_err <= cover_tol and inv_margin >= -cover_tol
    covering = ConditionResult(
        cov_ok, min(cover_tol - eq_err, inv_margin),
        f"g0 span equality error {eq_err:.3g}, g1 invariance margin {inv_margin:.3g}",
    )
    return BlenderReport(expansion, boundary, covering)


def successor_covering(
    sys: SkewSystem, spec: BlenderSpec, source: Arc,
    target: Arc | None = None, grid: int = 1000, max_steps: int = 10_000,
) -> CoveringCertificate:
    """Deterministic blender covering via the successor iteration.

    Applies branch 0 while the arc sits in [a, d] and branch 1 otherwise,
    stopping once the superposition interval [c, d] is covered; then follows
    the tail (branch 1, then branch 0 repeated) until the image covers
    [a, d].  ``core_steps`` counts the applications made before the arc first
    reaches the superposition length d - c; the iteration expands by a factor
    in [beta, beta_tilde] on every core step.
    """
    dom, sup, span0 = spec.domain, spec.superposition, spec.expansion_span0
    alpha = sup.length
    if target is None:
        target = span0
    if not arc_covers(span0, target, 1e-9):
        raise InputError("successor target must sit inside the branch-0 expansion span")
    if source.length > alpha + 1e-12:
        raise InputError(f"arc length {source.length} exceeds the superposition length {alpha}")
    if cover_margin(dom, source) < -1e-12:
        raise InputError("arc must sit inside the blender domain")

    word: Word = ()
    arc = source
    core: int | None = None
    steps = 0
    while True:
        if core is None and arc.length >= alpha - 1e-12:
            core = steps
        if cover_margin(arc, sup) >= -1e-12:
            break
        if cover_margin(span0, arc) >= -1e-12:
            branch = spec.word0
        elif cover_margin(spec.expansion_span1, arc) >= -1e-12:
            branch = spec.word1
        else:
            raise ConstructionError(
                f"successor step {steps}: arc {arc.as_dict()} escapes both branch domains"
            )
        arc = word_image(sys, branch, arc)
        word = word + branch
        steps += 1
        if cover_margin(dom, arc) < -1e-12:
            raise ConstructionError(f"successor step {steps}: arc left the blender domain")
        if steps > max_steps:
            raise ConstructionError("successor iteration did not terminate")
    if core is None:
        core = steps
    # tail: one branch-1 application drags the covered superposition interval
    # onto [a, a + beta*alpha], then branch 0 expands it over [a, d]
    word = word + spec.word1
    arc = word_image(sys, spec.word1, arc)
    tail_guard = 0
    while cover_margin(arc, span0) < -1e-12:
        word = word + spec.word0
        arc = word_image(sys, spec.word0, arc)
        tail_guard += 1
        if tail_guard > 400:
            raise ConstructionError("successor tail did not reach the expansion span")
    # the tail covering touches the boundary fixed point exactly, so accept
    # closed-arc covering instead of the strict interior safety margin
    return make_certificate(sys, word, source, target, grid, core_steps=core, safety=-1e-12)


# ---------------------------------------------------------------------------
# covering strategies
# ---------------------------------------------------------------------------


class CoveringStrategy:
    """Finds a word mapping a source arc over a target arc, or None."""

    def find(self, sys: SkewSystem, source: Arc, target: Arc) -> Word | None:
        raise NotImplementedError


@dataclass
class BfsCovering(CoveringStrategy):
    """Shortest covering word by breadth-first search, lexicographic in ties.

    The frontier is kept as endpoint arrays; the word behind frontier slot i
    at depth d is exactly the base-k digit expansion of i, so lexicographic
    order coincides with index order and no word tuples are materialized.
    ``rate_floor`` rejects covering candidates whose grid-minimum log
    derivative on the source falls below rate_floor * length.
    """

    max_depth: int = 18
    rate_floor: float = 0.0
    grid: int = 300

    def find(self, sys: SkewSystem, source: Arc, target: Arc) -> Word | None:
        k = sys.k
        lefts = np.asarray([float(source.anchor)])
        rights = np.asarray([float(source.right)])
        t_anchor, t_len = float(target.anchor), target.length
        for depth in range(1, self.max_depth + 1):
            n = lefts.size
            new_l = np.empty(n * k)
            new_r = np.empty(n * k)
            for s in range(k):
                f = sys.maps[s]
                new_l[s::k] = np.asarray(f.eval(lefts))
                new_r[s::k] = np.asarray(f.eval(rights))
            lefts, rights = new_l, new_r
            lengths = (rights - lefts) % 1.0
            off = (t_anchor - lefts) % 1.0
            off[off > 1.0 - 1e-12] = 0.0
            margins = np.minimum(off, lengths - (off + t_len))
            for idx in np.flatnonzero(margins >= SAFETY):
                word = tuple((int(idx) // k ** (depth - 1 - j)) % k for j in range(depth))
                if self.rate_floor <= 0.0:
                    return word
                if grid_min_log_deriv(sys, word, source, self.grid) >= self.rate_floor * depth:
                    return word
        return None


@dataclass
class SuccessorCovering(CoveringStrategy):
    spec: BlenderSpec

    def find(self, sys: SkewSystem, source: Arc, target: Arc) -> Word | None:
        try:
            cert = successor_covering(sys, self.spec, source, target)
        except (InputError, ConstructionError):
            return None
        return cert.word if cert.target_met else None


@dataclass
class BurstCovering(CoveringStrategy):
    """Greedy rate-maximizing stages of (positioning burst, expansion symbol).

    Each stage appends the candidate word (r)^j + (e), j <= burst_cap, r != e,
    with the best per-symbol log gain of arc length; covering is checked after
    every appended symbol.  Fails when no candidate grows the arc.
    """

    burst_cap: int = 25
    max_len: int = 600

    def find(self, sys: SkewSystem, source: Arc, target: Arc) -> Word | None:
        word: Word = ()
        arc = source
        if cover_margin(arc, target) >= SAFETY:
            return word
        while len(word) < self.max_len:
            best: tuple[float, Word] | None = None
            for e in range(sys.k):
                for r in range(sys.k):
                    if r == e:
                        continue
                    burst_arc = arc
                    for j in range(self.burst_cap + 1):
                        cand = (r,) * j + (e,)
                        a2 = word_image(sys, (e,), burst_arc)
                        gain = math.log(a2.length / arc.length)
                        rate = gain / len(cand)
                        if gain > 1e-12 and (best is None or rate > best[0] + 1e-15):
                            best = (rate, cand)
                        burst_arc = word_image(sys, (r,), burst_arc)
            if best is None:
                return None
            for s in best[1]:
                arc = word_image(sys, (s,), arc)
                word = word + (s,)
                if cover_margin(arc, target) >= SAFETY:
                    return word
        return None


def cec_search(
    sys: SkewSystem, base: Arc, source: Arc, margin: float, rate: float,
    max_depth: int = 18, grid: int = 1000, h_max: float | None = None,
) -> CoveringCertificate | None:
    """Breadth-first search for the first word covering the margin-neighborhood
    of the base interval with per-step expansion at least ``rate`` on the source.

    Returns None when the depth budget is exhausted (a normal outcome for
    systems without expansion), and raises on violated preconditions.
    """
    if not arc_intersects(source, base):
        raise InputError("source arc must intersect the base interval")
    if h_max is not None and source.length >= h_max:
        raise InputError(f"source length {source.length} is not below the configured cap {h_max}")
    target = neighborhood(base, margin)
    word = BfsCovering(max_depth=max_depth, rate_floor=rate, grid=min(grid, 300)).find(sys, source, target)
    if word is None:
        return None
    cert = make_certificate(sys, word, source, target, grid)
    if cert.min_log_deriv < rate * len(word) - 1e-12:
        return None
    return cert


# ---------------------------------------------------------------------------
# accessibility
# ---------------------------------------------------------------------------


def accessibility_depth(
    sys: SkewSystem, base: Arc, direction: str,
    grid_size: int = 1000, max_depth: int = 14,
) -> int | None:
    """Smallest m with every grid point inside a word-image of the base arc.

    ``forward``: images under words of length <= m (every point x admits a
    word with the inverse composition sending x into the base).  ``backward``:
    preimages, i.e. every point can be mapped into the base by a word of
    length <= m.  Returns None when max_depth is insufficient.
    """
    if direction not in ("forward", "backward"):
        raise InputError(f"direction must be 'forward' or 'backward', got {direction}")
    xs = np.arange(grid_size, dtype=float) / grid_size
    covered = np.zeros(grid_size, dtype=bool)

    def mark(anchors: np.ndarray, lengths: np.ndarray) -> None:
        nonlocal covered
        rem = np.flatnonzero(~covered)
        if rem.size == 0:
            return
        gaps = (xs[rem][None, :] - anchors[:, None]) % 1.0
        hit = (gaps <= lengths[:, None] + 1e-12) | (gaps >= 1.0 - 1e-12)
        covered[rem[hit.any(axis=0)]] = True

    mark(np.array([float(base.anchor)]), np.array([base.length]))
    if covered.all():
        return 0
    lefts = np.array([float(base.anchor)])
    rights = np.array([float(base.right)])
    maps = sys.maps if direction == "forward" else [m.inverse() for m in sys.maps]
    for depth in range(1, max_depth + 1):
        new_l, new_r = [], []
        for f in maps:
            new_l.append(np.asarray(f.eval(lefts), dtype=float))
            new_r.append(np.asarray(f.eval(rights), dtype=float))
        lefts = np.concatenate(new_l)
        rights = np.concatenate(new_r)
        lengths = (rights - lefts) % 1.0
        mark(lefts, lengths)
        if covered.all():
            return depth
    return None


# ---------------------------------------------------------------------------
# constant fitting
# ---------------------------------------------------------------------------


@dataclass
class AxiomReport:
    constants: CoveringConstants
    m_f: int | None
    m_b: int | None
    samples: list[tuple[float, int, float]]  # (|H|, length, per-step rate)
    failures: int
    degenerate: bool
    verdicts: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.verdicts.values())

    def as_dict(self) -> dict:
        return {
            "constants": self.constants.as_dict(), "m_f": self.m_f, "m_b": self.m_b,
            "samples": [list(s) for s in self.samples], "failures": self.failures,
            "degenerate": self.degenerate, "verdicts": dict(self.verdicts),
        }


def fit_length_envelope(points: Sequence[tuple[float, float]]) -> tuple[float, float, bool]:
    """Minimal-area line above (|log|H||, length) points, minimal slope in ties.

    Fits on the per-abscissa maxima; a single distinct abscissa degenerates to
    a flat envelope (slope 0, intercept = max length).
    """
    best: dict[float, float] = {}
    for x, y in points:
        best[x] = max(best.get(x, -math.inf), y)
    pts = sorted(best.items())
    if not pts:
        raise InputError("cannot fit an envelope to zero samples")
    if len(pts) == 1:
        return 0.0, pts[0][1], True
    from scipy.optimize import linprog

    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    # minimize sum of residuals above the points, tiny extra weight on the
    # slope so exact ties resolve to the smaller slope
    res = linprog(
        c=[float(xs.sum()) + 1e-9, float(len(xs))],
        A_ub=np.column_stack([-xs, -np.ones_like(xs)]),
        b_ub=-ys,
        bounds=[(0, None), (0, None)],
        method="highs",
    )
    if not res.success:
        raise ConstructionError(f"envelope fit failed: {res.message}")
    return float(res.x[0]), float(res.x[1]), False


def fit_cec_constants(
    sys: SkewSystem, base: Arc, sizes: Sequence[float], trials: int,
    margin: float = 0.01, rate_floor: float = 0.0, max_depth: int = 18,
    seed: int = 0, grid: int = 500, strategy: CoveringStrategy | None = None,
    access_depth: int = 14, access_grid: int = 600,
) -> AxiomReport:
    """Sample covering words over arcs of the given sizes and fit the envelope.

    The slope/intercept envelope is fitted over per-size maxima.  The expansion
    constant is the smallest observed per-step log derivative, the size cap is
    the largest size at which every trial succeeded, and the margin is passed
    through as requested.
    """
    sizes = list(sizes)
    if any(b >= a for a, b in zip(sizes, sizes[1:])):
        raise InputError("sizes must be strictly decreasing")
    if any(s >= base.length for s in sizes):
        raise InputError("every size must be smaller than the base interval")
    if trials < 1:
        raise InputError("need at least one trial per size")
    rng = np.random.default_rng(seed)
    target = neighborhood(base, margin)
    samples: list[tuple[float, int, float]] = []
    failures = 0
    perfect_sizes: set[float] = set()
    for size in sizes:
        all_ok = True
        for _ in range(trials):
            offset = rng.uniform(-0.95 * size, base.length - 0.05 * size)
            source = Arc(float(base.anchor) + offset, size)
            if strategy is None:
                cert = cec_search(sys, base, source, margin, rate_floor, max_depth, grid)
            else:
                word = strategy.find(sys, source, target)
                cert = make_certificate(sys, word, source, target, grid) if word is not None else None
                if cert is not None and not cert.target_met:
                    cert = None
            if cert is None:
                failures += 1
                all_ok = False
                continue
            samples.append((size, cert.length, cert.min_log_deriv / cert.length))
        if all_ok:
            perfect_sizes.add(size)
    if samples:
        slope, intercept, degenerate = fit_length_envelope(
            [(abs(math.log(s)), float(l)) for s, l, _ in samples]
        )
        rate = min(r for _, _, r in samples)
    else:
        slope, intercept, degenerate, rate = 0.0, 0.0, True, 0.0
    constants = CoveringConstants(
        h_max=max(perfect_sizes) if perfect_sizes else 0.0,
        slope=slope, intercept=intercept, margin=margin, rate=rate,
    )
    m_f = accessibility_depth(sys, base, "forward", access_grid, access_depth)
    m_b = accessibility_depth(sys, base, "backward", access_grid, access_depth)
    verdicts = {
        "covering": failures == 0 and bool(samples) and rate > 0.0,
        "accessibility_forward": m_f is not None,
        "accessibility_backward": m_b is not None,
    }
    return AxiomReport(constants, m_f, m_b, samples, failures, degenerate, verdicts)


# ---------------------------------------------------------------------------
# bounded-length covering (two-sided word length)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundedCovering:
    certificate: CoveringCertificate
    requested_source: Arc
    sub_source: Arc
    rounds: int
    threshold: float

    @property
    def two_sided_ok(self) -> bool:
        return self.threshold - 1e-9 <= self.certificate.length <= 2.0 * self.threshold + 1e-9

    @property
    def expansion_ok(self) -> bool:
        return self.certificate.min_log_deriv >= 0.0

    def as_dict(self) -> dict:
        return {
            "certificate": self.certificate.as_dict(),
            "requested_source": self.requested_source.as_dict(),
            "sub_source": self.sub_source.as_dict(),
            "rounds": self.rounds, "threshold": self.threshold,
            "two_sided_ok": self.two_sided_ok,
        }


def bounded_covering(
    sys: SkewSystem, base: Arc, source: Arc, constants: CoveringConstants,
    strategy: CoveringStrategy | None = None, max_depth: int = 18, grid: int = 1000,
) -> BoundedCovering:
    """Covering whose word length lands in [L, 2L], L = slope*|log|H|| + intercept.

    Repeats covering rounds, each time re-selecting a source of the original
    length centered in the base interval, until the accumulated length first
    reaches L; the certified source is the pullback of the target through the
    concatenated word, a subinterval of the original arc.
    """
    target = neighborhood(base, constants.margin)
    if source.length > target.length:
        raise InputError("source must fit inside the covering target for the recursion")
    threshold = constants.length_bound(source.length)
    strategy = strategy or BfsCovering(max_depth=max_depth, rate_floor=constants.rate, grid=min(grid, 300))
    word: Word = ()
    current = source
    rounds = 0
    while True:
        piece = strategy.find(sys, current, target)
        if piece is None:
            raise ConstructionError(f"bounded covering round {rounds}: no covering word found")
        word = word + piece
        rounds += 1
        if len(word) >= threshold:
            break
        current = Arc.centered(base.midpoint, source.length / 2.0)
    sub = word_preimage(sys, word, target)
    cert = make_certificate(sys, word, sub, target, grid)
    return BoundedCovering(cert, source, sub, rounds, threshold)


# ---------------------------------------------------------------------------
# distortion-controlled covering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistortionCovering:
    certificate: CoveringCertificate
    sub_source: Arc
    expand_steps: int      # t: prefix taken until the image first exceeds delta
    reentry_steps: int     # s: word bringing the expanded arc back onto the base
    cover_steps: int       # r: final covering word
    delta: float
    k3_prime: float
    log_kd: float
    measured_log_dist: float
    dist_bound: float
    length_bound: float

    @property
    def length_ok(self) -> bool:
        return self.certificate.length <= self.length_bound + 1e-9

    @property
    def dist_ok(self) -> bool:
        return self.measured_log_dist <= self.dist_bound + 1e-9

    def as_dict(self) -> dict:
        return {
            "certificate": self.certificate.as_dict(), "sub_source": self.sub_source.as_dict(),
            "expand_steps": self.expand_steps, "reentry_steps": self.reentry_steps,
            "cover_steps": self.cover_steps, "delta": self.delta, "k3_prime": self.k3_prime,
            "log_kd": self.log_kd, "measured_log_dist": self.measured_log_dist,
            "dist_bound": self.dist_bound, "length_bound": self.length_bound,
            "length_ok": self.length_ok, "dist_ok": self.dist_ok,
        }


def choose_distortion_scale(
    sys: SkewSystem, eps_d: float, slope: float, h_max: float, grid_size: int = 4000
) -> float:
    """Largest dyadic delta below h_max with Mod(delta) <= eps_d / (2*slope)."""
    if eps_d <= 0.0:
        raise InputError("distortion budget must be positive")
    if slope <= 0.0:
        raise InputError("need a positive covering slope to size the distortion scale")
    bound = eps_d / (2.0 * slope)
    delta = min(0.49, h_max)
    for _ in range(60):
        if modulus_of_continuity(sys, delta, grid_size) <= bound:
            return delta
        delta /= 2.0
        if delta < 1e-14:
            break
    raise InputError("no positive scale meets the distortion budget; increase eps_d")


def measured_log_distortion(sys: SkewSystem, word: Word, source: Arc, grid: int = 1000) -> float:
    xs = arc_grid(source, grid)
    _, logs = orbit_eval(sys, word, xs)
    return float(np.max(logs) - np.min(logs))


def covering_with_distortion(
    sys: SkewSystem, base: Arc, source: Arc, eps_d: float, constants: CoveringConstants,
    m_b: int, strategy: CoveringStrategy | None = None,
    max_depth: int = 18, grid: int = 1000, norm_grid: int = 4000,
) -> DistortionCovering:
    """Three-phase covering with distortion linear in |log|H||.

    Phase 1 takes the covering word only until the image first exceeds the
    distortion scale delta; phase 2 re-enters the base interval within the
    backward-accessibility depth; phase 3 covers from an arc of definite size.
    The measured distortion is compared against |log|H|| * eps_d + log K_D,
    where log K_D charges every phase-2/3 step twice the log of the uniform
    norm (a single circle diffeomorphism can distort by the product of its
    derivative supremum and its inverse-derivative supremum).
    """
    if eps_d <= 0.0:
        raise InputError("distortion budget must be positive")
    strategy = strategy or BfsCovering(max_depth=max_depth, rate_floor=constants.rate, grid=min(grid, 300))
    target = neighborhood(base, constants.margin)
    delta = choose_distortion_scale(sys, eps_d, constants.slope, max(constants.h_max, source.length * 2), norm_grid)

    full = strategy.find(sys, source, target)
    if full is None:
        raise ConstructionError("phase 1 (expansion): no covering word found for the source arc")
    arc = source
    t = len(full)
    for i, s in enumerate(full, start=1):
        arc = word_image(sys, (s,), arc)
        if arc.length > delta:
            t = i
            break
    if arc.length <= delta:
        raise ConstructionError("phase 1 (expansion): covering word never exceeded the distortion scale")
    prefix = full[:t]
    expanded = arc

    if arc_intersects(expanded, base):
        reentry: Word = ()
    else:
        reentry_found = None
        k = sys.k
        lefts = np.asarray([float(expanded.anchor)])
        rights = np.asarray([float(expanded.right)])
        for d in range(1, m_b + 1):
            new_l = np.empty(lefts.size * k)
            new_r = np.empty(rights.size * k)
            for s in range(k):
                new_l[s::k] = np.asarray(sys.maps[s].eval(lefts))
                new_r[s::k] = np.asarray(sys.maps[s].eval(rights))
            lefts, rights = new_l, new_r
            lengths = (rights - lefts) % 1.0
            fwd = (float(base.anchor) - lefts) % 1.0
            back = (lefts - float(base.anchor)) % 1.0
            hits = np.flatnonzero((fwd <= lengths + 1e-12) | (back <= base.length + 1e-12))
            if hits.size:
                idx = int(hits[0])
                reentry_found = tuple((idx // k ** (d - 1 - j)) % k for j in range(d))
                break
        if reentry_found is None:
            raise ConstructionError(
                f"phase 2 (re-entry): no word of length <= {m_b} brings the expanded arc onto the base"
            )
        reentry = reentry_found
    returned = word_image(sys, reentry, expanded)

    cover = strategy.find(sys, returned, target)
    if cover is None:
        raise ConstructionError("phase 3 (covering): no covering word found for the returned arc")

    word = prefix + reentry + cover
    cert = make_certificate(sys, word, source, target, grid)
    if not cert.target_met:
        raise ConstructionError("phase 3 (covering): composed word failed to cover the target")
    norm = uniform_norm(sys, norm_grid)
    s_len, r_len = len(reentry), len(cover)
    k3_prime = (
        2.0 * constants.intercept + m_b
        + constants.slope * m_b * math.log(norm) + constants.slope * abs(math.log(delta))
    )
    log_kd = (constants.intercept / constants.slope) * eps_d + (s_len + r_len) * 2.0 * math.log(norm)
    measured = measured_log_distortion(sys, word, source, grid)
    sub = word_preimage(sys, word, target)
    return DistortionCovering(
        certificate=cert, sub_source=sub, expand_steps=t, reentry_steps=s_len,
        cover_steps=r_len, delta=delta, k3_prime=k3_prime, log_kd=log_kd,
        measured_log_dist=measured,
        dist_bound=abs(math.log(source.length)) * eps_d + log_kd,
        length_bound=constants.slope * abs(math.log(source.length)) + k3_prime,
    )
