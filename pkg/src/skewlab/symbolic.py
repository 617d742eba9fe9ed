"""Words, subshifts of finite type, and entropy via spectral radius.

Transition matrices are square 0/1 numpy arrays.  Entropy is computed per
strongly connected component: acyclic components contribute nothing, and on
each component with a cycle the Perron root is found by power iteration on
A + I (the shift makes the iteration aperiodic, so it converges for periodic
components such as pure cycles).  Word counts are exact integers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ResourceError

Word = tuple[int, ...]

ENUMERATION_CAP = 2**24
COUNT_CAP = 2**127 - 1


def word_to_str(word: Word) -> str:
    return "".join(str(s) for s in word)


def word_from_str(text: str) -> Word:
    return tuple(int(ch) for ch in text)


def enumerate_words(k: int, n: int, cap: int = ENUMERATION_CAP) -> list[Word]:
    """All k^n words of length n in lexicographic order."""
    if k < 1 or n < 0:
        raise InputError(f"need k >= 1 and n >= 0, got k={k}, n={n}")
    if k**n > cap:
        raise ResourceError(
            f"k^n = {k**n} exceeds the enumeration cap {cap}; use sampling or a candidate list"
        )
    return [tuple(w) for w in itertools.product(range(k), repeat=n)]


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.int64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"transition matrix must be square, got shape {m.shape}")
    if not np.isin(m, (0, 1)).all():
        raise InputError("transition matrix entries must be 0 or 1")
    return m


@dataclass(frozen=True)
class Component:
    """One strongly connected component with its induced submatrix."""

    indices: tuple[int, ...]
    matrix: np.ndarray

    @property
    def has_cycle(self) -> bool:
        return len(self.indices) > 1 or bool(self.matrix[0, 0])


def scc_decompose(a) -> list[Component]:
    """Strongly connected components of the transition graph, by smallest index.

    Iterative Tarjan; every vertex appears in exactly one component.
    """
    m = _as_matrix(a)
    n = m.shape[0]
    succ = [np.flatnonzero(m[i]).tolist() for i in range(n)]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for j in range(pi, len(succ[v])):
                w = succ[v][j]
                if index[w] == -1:
                    work[-1] = (v, j + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    comps.sort(key=min)
    out = []
    for comp in comps:
        idx = np.array(comp)
        out.append(Component(tuple(comp), m[np.ix_(idx, idx)].copy()))
    return out


def _perron_root(m: np.ndarray, rtol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Spectral radius of a nonnegative matrix with a cycle, via power iteration.

    Iterates on A + I so periodic components converge, then subtracts 1.
    """
    n = m.shape[0]
    shifted = m.astype(float) + np.eye(n)
    v = np.ones(n) / n
    lam = 0.0
    for _ in range(max_iter):
        w = shifted @ v
        lam_new = float(w.sum())
        w /= lam_new
        if abs(lam_new - lam) <= rtol * max(1.0, abs(lam_new)) and np.allclose(w, v, rtol=0, atol=rtol):
            return lam_new - 1.0
        v, lam = w, lam_new
    return lam - 1.0


def sft_entropy(a) -> float:
    """Topological entropy (nats) of the subshift of finite type given by a.

    Maximum over irreducible components of log of the Perron root; zero when
    the graph has no cycles.
    """
    radius = 0.0
    for comp in scc_decompose(a):
        if not comp.has_cycle:
            continue
        radius = max(radius, _perron_root(comp.matrix))
    if radius <= 1.0:
        # components with a cycle always have radius >= 1
        return 0.0
    return math.log(radius)


def admissible_word_count(a, n: int, cap: int = COUNT_CAP) -> int:
    """Exact number of admissible words of length n (integer arithmetic)."""
    m = _as_matrix(a)
    if n < 1:
        raise InputError(f"word length must be >= 1, got {n}")
    rows = [[int(x) for x in row] for row in m]
    size = len(rows)
    counts = [1] * size
    for _ in range(n - 1):
        counts = [sum(rows[i][j] * counts[j] for j in range(size)) for i in range(size)]
        if sum(counts) > cap:
            raise ResourceError(f"admissible word count exceeds the {cap.bit_length()}-bit cap")
    total = sum(counts)
    if total > cap:
        raise ResourceError(f"admissible word count exceeds the {cap.bit_length()}-bit cap")
    return total


def full_matrix(size: int) -> np.ndarray:
    return np.ones((size, size), dtype=np.int64)


def golden_mean_matrix() -> np.ndarray:
    return np.array([[1, 1], [1, 0]], dtype=np.int64)
