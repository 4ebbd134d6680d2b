"""Linear assignment: Hungarian (Kuhn-Munkres) solver and a brute-force oracle."""

from __future__ import annotations

import enum
import functools
import itertools

import numpy as np

from .graph import Permutation

BRUTE_FORCE_MAX = 9


class Sense(str, enum.Enum):
    MIN = "min"
    MAX = "max"


def _as_cost(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {c.shape}")
    if c.shape[0] < 1:
        raise ValueError("cost matrix must be at least 1x1")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix has non-finite entries")
    return c


def _hungarian_min(c: np.ndarray) -> np.ndarray:
    """Row-by-row shortest augmenting path with dual potentials, O(m^3).

    Column scans are vectorised; ``argmin`` picks the lowest column index
    among equal reduced costs, which makes tie-breaking deterministic.
    Returns ``col[i]``, the column assigned to row ``i``.
    """
    m = c.shape[0]
    inf = np.inf
    u = np.zeros(m + 1)
    v = np.zeros(m + 1)
    # row_of[j]: row matched to column j (1-based, 0 = free); column 0 is a sentinel
    row_of = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, m + 1):
        row_of[0] = i
        j0 = 0
        minv = np.full(m + 1, inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            free = ~used[1:]
            cur = c[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[row_of[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of[j0] = row_of[j1]
            j0 = j1
    col = np.empty(m, dtype=np.int64)
    col[row_of[1:] - 1] = np.arange(m)
    return col


def solve_lap(c, sense: Sense | str = Sense.MIN) -> tuple[Permutation, float]:
    """Exact linear assignment.

    Returns the permutation ``pi`` (row ``i`` -> column ``pi.map[i]``) and the
    objective ``sum_i c[i, pi(i)]``, optimal under ``sense``.
    """
    c = _as_cost(c)
    sense = Sense(sense)
    work = -c if sense is Sense.MAX else c
    # shift to non-negative costs; assignment is invariant to a constant offset
    col = _hungarian_min(work - work.min())
    return Permutation(col), float(c[np.arange(c.shape[0]), col].sum())


@functools.lru_cache(maxsize=None)
def _all_perms(m: int) -> np.ndarray:
    out = np.array(list(itertools.permutations(range(m))), dtype=np.int64)
    out.setflags(write=False)
    return out


def brute_force_lap(c, sense: Sense | str = Sense.MIN) -> tuple[Permutation, float]:
    """Exhaustive LAP; ties go to the lexicographically smallest map."""
    c = _as_cost(c)
    sense = Sense(sense)
    m = c.shape[0]
    if m > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force limited to m <= {BRUTE_FORCE_MAX}, got {m}")
    perms = _all_perms(m)
    totals = c[np.arange(m), perms].sum(axis=1)
    k = int(np.argmax(totals) if sense is Sense.MAX else np.argmin(totals))
    return Permutation(perms[k]), float(c[np.arange(m), perms[k]].sum())
