"""Finite-time exponents, Birkhoff averages, weak* distances, and twin orbits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circle import Angle, Arc, arc_grid, circle_dist, signed_diff
from .errors import InputError
from .systems import SkewSystem, Word, fiber_eval, orbit_eval
from .symbolic import word_to_str

TWIN_GRID = 2**14


def finite_time_exponent(sys: SkewSystem, word: Word, x: float) -> float:
    """Per-step log derivative of the word composition at x."""
    if len(word) == 0:
        raise InputError("finite-time exponent needs a nonempty word")
    return fiber_eval(sys, word, x).log_deriv / len(word)


@dataclass(frozen=True)
class ExponentSummary:
    mean: float
    stddev: float
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    samples: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "mean": self.mean, "stddev": self.stddev,
            "bin_edges": list(self.bin_edges), "counts": list(self.counts),
        }


def exponent_sample(
    sys: SkewSystem, probabilities, horizon: int, trials: int, seed: int = 0, bins: int = 20
) -> ExponentSummary:
    """Monte Carlo finite-time exponents for words drawn i.i.d. from the given law."""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or len(p) != sys.k or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise InputError(f"need a probability vector of length {sys.k}")
    if horizon < 1 or trials < 1:
        raise InputError("horizon and trials must be >= 1")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, 1.0, size=trials)
    symbols = rng.choice(sys.k, size=(trials, horizon), p=p)
    pts = xs.copy()
    logs = np.zeros(trials)
    for step in range(horizon):
        for s in range(sys.k):
            mask = symbols[:, step] == s
            if not mask.any():
                continue
            f = sys.maps[s]
            logs[mask] += np.log(f.deriv(pts[mask]))
            pts[mask] = np.asarray(f.eval(pts[mask]))
        pts %= 1.0
    vals = logs / horizon
    counts, edges = np.histogram(vals, bins=bins)
    return ExponentSummary(
        mean=float(vals.mean()), stddev=float(vals.std()),
        bin_edges=tuple(float(e) for e in edges), counts=tuple(int(c) for c in counts),
        samples=tuple(float(v) for v in vals),
    )


# ---------------------------------------------------------------------------
# test potentials and empirical measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Indicator of a cylinder times a trigonometric function of the fiber.

    psi(word-tail, x) = 1[tail starts with cylinder] * trig(2 pi freq x).
    Finite tails shorter than the cylinder never match.
    """

    cylinder: Word
    freq: int
    phase: str  # "cos" or "sin"

    def __post_init__(self) -> None:
        if self.phase not in ("cos", "sin"):
            raise InputError(f"phase must be 'cos' or 'sin', got {self.phase}")
        if self.phase == "sin" and self.freq == 0:
            raise InputError("sin with frequency 0 is identically zero")

    @property
    def sup_norm(self) -> float:
        return 1.0

    def fiber_values(self, xs):
        arg = 2.0 * np.pi * self.freq * np.asarray(xs, dtype=float)
        return np.cos(arg) if self.phase == "cos" else np.sin(arg)

    def matches(self, tail: Word) -> bool:
        n = len(self.cylinder)
        return len(tail) >= n and tail[:n] == self.cylinder

    def matches_periodic(self, word: Word, offset: int) -> bool:
        if not word:
            return len(self.cylinder) == 0
        return all(word[(offset + i) % len(word)] == c for i, c in enumerate(self.cylinder))

    def label(self) -> str:
        return f"[{word_to_str(self.cylinder)}]*{self.phase}({self.freq}x)"

    def as_dict(self) -> dict:
        return {"cylinder": list(self.cylinder), "freq": self.freq, "phase": self.phase}


def default_family(k: int, count: int) -> "PotentialFamily":
    """The canonical enumeration: cylinder depth then fiber frequency.

    Depth-0 cylinder with frequencies 0 (cos) and 1 (cos, sin); then depth-1
    cylinders in lexicographic order crossed with frequencies <= 2, depth-2
    with frequencies <= 3, and so on, always skipping the zero function.
    """
    members: list[TestFunction] = []
    depth = 0
    while len(members) < count:
        max_freq = depth + 1
        from .symbolic import enumerate_words

        for cyl in enumerate_words(k, depth):
            for freq in range(0, max_freq + 1):
                for phase in ("cos", "sin"):
                    if phase == "sin" and freq == 0:
                        continue
                    members.append(TestFunction(cyl, freq, phase))
                    if len(members) == count:
                        return PotentialFamily(tuple(members))
        depth += 1
    return PotentialFamily(tuple(members))


@dataclass(frozen=True)
class PotentialFamily:
    members: tuple[TestFunction, ...]

    def __len__(self) -> int:
        return len(self.members)

    def fingerprint(self) -> tuple:
        return tuple((m.cylinder, m.freq, m.phase) for m in self.members)

    def as_dict(self) -> dict:
        return {"members": [m.as_dict() for m in self.members]}


def birkhoff_average(sys: SkewSystem, psi: TestFunction, word: Word, x: float) -> float:
    """Average of psi along the finite orbit of (word, x).

    The cylinder factor is evaluated on the remaining suffix of the word;
    exhausted suffixes do not match.
    """
    if len(word) == 0:
        raise InputError("Birkhoff average needs a nonempty word")
    total = 0.0
    pt = float(x)
    for k in range(len(word)):
        if psi.matches(word[k:]):
            total += float(psi.fiber_values(pt))
        pt = float(sys.maps[word[k]].eval(pt))
    return total / len(word)


@dataclass
class EmpiricalMeasure:
    """Orbit-supported approximation of an invariant measure.

    ``periodic`` measures average exactly over one period of the two-sided
    periodic extension of the word; ``sampled`` measures average finite-orbit
    Birkhoff sums over seeded random words.
    """

    kind: str
    word: Word = ()
    point: float = 0.0
    probabilities: tuple[float, ...] = ()
    horizon: int = 0
    trials: int = 0
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def periodic(cls, word: Word, point: float) -> "EmpiricalMeasure":
        if len(word) == 0:
            raise InputError("periodic measure needs a nonempty word")
        return cls(kind="periodic", word=word, point=float(point))

    @classmethod
    def sampled(
        cls, probabilities, horizon: int, trials: int, seed: int = 0
    ) -> "EmpiricalMeasure":
        return cls(
            kind="sampled", probabilities=tuple(float(p) for p in probabilities),
            horizon=int(horizon), trials=int(trials), seed=int(seed),
        )

    def averages(self, sys: SkewSystem, family: PotentialFamily) -> list[float]:
        key = family.fingerprint()
        if key in self._cache:
            return self._cache[key]
        if self.kind == "periodic":
            vals = self._periodic_averages(sys, family)
        elif self.kind == "sampled":
            vals = self._sampled_averages(sys, family)
        else:
            raise InputError(f"unknown measure kind {self.kind!r}")
        self._cache[key] = vals
        return vals

    def _periodic_averages(self, sys: SkewSystem, family: PotentialFamily) -> list[float]:
        p = len(self.word)
        pts = [self.point]
        for s in self.word[:-1]:
            pts.append(float(sys.maps[s].eval(pts[-1])))
        out = []
        for psi in family.members:
            total = 0.0
            for k in range(p):
                if psi.matches_periodic(self.word, k):
                    total += float(psi.fiber_values(pts[k]))
            out.append(total / p)
        return out

    def _sampled_averages(self, sys: SkewSystem, family: PotentialFamily) -> list[float]:
        rng = np.random.default_rng(self.seed)
        sums = np.zeros(len(family))
        for _ in range(self.trials):
            word = tuple(rng.choice(sys.k, size=self.horizon, p=self.probabilities))
            x = rng.uniform()
            for i, psi in enumerate(family.members):
                sums[i] += birkhoff_average(sys, psi, word, x)
        return [float(v / self.trials) for v in sums]


@dataclass(frozen=True)
class MeasureDistance:
    value: float
    truncation_bound: float

    def as_dict(self) -> dict:
        return {"value": self.value, "truncation_bound": self.truncation_bound}


def measure_distance(
    sys: SkewSystem, mu: EmpiricalMeasure, nu: EmpiricalMeasure,
    family: PotentialFamily, truncation: int,
) -> MeasureDistance:
    """Truncated weak* distance sum_{i<K} 2^-(i+1) |mu(psi_i) - nu(psi_i)| / (2 sup|psi_i|).

    The discarded tail is rigorously below 2^-K because every term of the
    full series is at most 2^-(i+1).
    """
    if truncation < 1 or truncation > len(family):
        raise InputError(f"truncation must be in [1, {len(family)}], got {truncation}")
    a = mu.averages(sys, family)
    b = nu.averages(sys, family)
    value = 0.0
    for i in range(truncation):
        psi = family.members[i]
        value += 2.0 ** (-(i + 1)) * abs(a[i] - b[i]) / (2.0 * psi.sup_norm)
    return MeasureDistance(value=value, truncation_bound=2.0 ** (-truncation))


# ---------------------------------------------------------------------------
# distortion along orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistortionReport:
    applicable: bool
    passed: bool
    max_log_dist: float
    worst_ratio: float  # max over prefixes of measured / allowed
    first_violation: int | None
    reason: str = ""

    def as_dict(self) -> dict:
        return {
            "applicable": self.applicable, "passed": self.passed,
            "max_log_dist": self.max_log_dist, "worst_ratio": self.worst_ratio,
            "first_violation": self.first_violation, "reason": self.reason,
        }


def distortion_check(
    sys: SkewSystem, word: Word, zone: Arc, eps_d: float, delta0: float,
    eps: float, k0: float, grid: int = 1000, mod_grid: int = 4000,
) -> DistortionReport:
    """Check that log-distortion along every prefix grows at most like eps_d per step.

    Applicable only when the scale hypothesis holds: Mod(2 delta0) <= eps_d,
    the zone radius is at most delta0 / k0 * exp(-m (eps + eps_d)), and the
    derivative along the center orbit stays below k0 * exp(l * eps) for every
    prefix.  Otherwise the report is marked not applicable.
    """
    from .systems import modulus_of_continuity

    if eps_d <= 0.0 or delta0 <= 0.0 or k0 <= 0.0:
        raise InputError("eps_d, delta0, and k0 must be positive")
    mod = modulus_of_continuity(sys, min(2.0 * delta0, 0.499), mod_grid)
    if mod > eps_d:
        return DistortionReport(False, False, 0.0, 0.0, None, f"Mod(2*delta0)={mod:.3g} exceeds eps_d")
    m = len(word)
    radius = zone.length / 2.0
    allowed_radius = delta0 / k0 * math.exp(-m * (eps + eps_d))
    if radius > allowed_radius * (1.0 + 1e-9):
        return DistortionReport(False, False, 0.0, 0.0, None,
                                f"zone radius {radius:.3g} exceeds the corollary radius {allowed_radius:.3g}")
    center = zone.midpoint
    pt, acc = float(center), 0.0
    for ell, s in enumerate(word, start=1):
        acc += math.log(float(sys.maps[s].deriv(pt)))
        pt = float(sys.maps[s].eval(pt))
        if math.exp(acc) > k0 * math.exp(ell * eps) * (1.0 + 1e-9):
            return DistortionReport(False, False, 0.0, 0.0, None,
                                    f"derivative hypothesis fails at prefix {ell}")
    xs = arc_grid(zone, grid)
    logs = np.zeros_like(xs)
    pts = xs.copy()
    max_dist = 0.0
    worst = 0.0
    violation = None
    for ell, s in enumerate(word, start=1):
        f = sys.maps[s]
        logs = logs + np.log(f.deriv(pts))
        pts = np.asarray(f.eval(pts)) % 1.0
        dist = float(np.max(logs) - np.min(logs))
        max_dist = max(max_dist, dist)
        ratio = dist / (ell * eps_d)
        worst = max(worst, ratio)
        if dist > ell * eps_d + 1e-12 and violation is None:
            violation = ell
    return DistortionReport(True, violation is None, max_dist, worst, violation)


# ---------------------------------------------------------------------------
# twin periodic points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPoint:
    point: Angle
    log_multiplier: float

    def as_dict(self) -> dict:
        return {"point": float(self.point), "log_multiplier": self.log_multiplier}


@dataclass(frozen=True)
class TwinReport:
    status: str  # "ok", "no_fixed_point", "identity_like"
    fixed_points: tuple[FixedPoint, ...]

    @property
    def attracting(self) -> FixedPoint | None:
        cands = [fp for fp in self.fixed_points if fp.log_multiplier < 0.0]
        return min(cands, key=lambda fp: fp.log_multiplier) if cands else None

    @property
    def repelling(self) -> FixedPoint | None:
        cands = [fp for fp in self.fixed_points if fp.log_multiplier >= 0.0]
        return max(cands, key=lambda fp: fp.log_multiplier) if cands else None

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "fixed_points": [fp.as_dict() for fp in self.fixed_points],
            "attracting": self.attracting.as_dict() if self.attracting else None,
            "repelling": self.repelling.as_dict() if self.repelling else None,
        }


def _displacement(sys: SkewSystem, word: Word, xs):
    pts, _ = orbit_eval(sys, word, xs)
    return (pts - xs + 0.5) % 1.0 - 0.5


def twin_periodic(
    sys: SkewSystem, word: Word, grid: int = TWIN_GRID, tol: float = 1e-12
) -> TwinReport:
    """All transversal fixed points of the word composition, with multipliers.

    Fixed points are bracketed by sign changes of the lifted displacement on a
    fine grid and refined by bisection.  A composition whose displacement never
    leaves the identity tolerance is flagged; a fixed-point-free composition
    (rotation-like) is reported as such.  Transversal fixed points of a circle
    diffeomorphism come in attracting/repelling pairs, so whenever one with
    negative log-multiplier exists, one with nonnegative log-multiplier does.
    """
    if len(word) == 0:
        raise InputError("twin search needs a nonempty word")
    xs = np.arange(grid, dtype=float) / grid
    disp = _displacement(sys, word, xs)
    if np.max(np.abs(disp)) < 1e-10:
        return TwinReport("identity_like", ())
    roots: list[float] = []
    d_next = np.roll(disp, -1)
    x_next = np.concatenate([xs[1:], [1.0]])
    candidates = np.flatnonzero(
        (np.sign(disp) * np.sign(d_next) <= 0.0) & (np.abs(disp - d_next) < 0.5)
    )
    for i in candidates:
        lo, hi = xs[i], x_next[i]
        dlo = disp[i]
        if dlo == 0.0:
            roots.append(float(lo))
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            dm = float(_displacement(sys, word, np.asarray([mid % 1.0]))[0])
            if dm == 0.0 or hi - lo < tol:
                break
            if (dm > 0) == (dlo > 0):
                lo, dlo = mid, dm
            else:
                hi = mid
        roots.append(float(0.5 * (lo + hi) % 1.0))
    # dedupe near-identical roots (adjacent brackets can share an endpoint root)
    roots.sort()
    unique: list[float] = []
    for r in roots:
        if not unique or (circle_dist(r, unique[-1]) > 10 * tol and circle_dist(r, unique[0]) > 10 * tol):
            unique.append(r)
    if not unique:
        return TwinReport("no_fixed_point", ())
    fps = tuple(
        FixedPoint(Angle(r), fiber_eval(sys, word, r).log_deriv) for r in unique
    )
    return TwinReport("ok", fps)
