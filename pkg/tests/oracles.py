"""Independent reference implementations used to cross-check the library.

Everything here is written from the definitions with plain Python / small
closed forms (cofactor determinants, explicit inverses, brute-force
searches) and shares no code with the package under test.
"""

import math

import numpy as np


def stirling2(n: int, m: int) -> int:
    """Stirling number of the second kind via the standard recurrence."""
    if n == 0:
        return 1 if m == 0 else 0
    if m == 0 or m > n:
        return 0
    return stirling2(n - 1, m - 1) + m * stirling2(n - 1, m)


def dist(p, q) -> float:
    dx = p[0] - q[0]
    dy = p[1] - q[1]
    return math.sqrt(dx * dx + dy * dy)


def brute_minimax_radius(points) -> float:
    """min over candidate centers of the max distance to the set."""
    pts = [tuple(p) for p in points]
    return min(max(dist(c, q) for q in pts) for c in pts)


def brute_hierarchical(points):
    """Bottom-up minimax-linkage agglomeration, written from the definition.

    Returns (levels, merges): levels maps m to the canonical partition of
    indices, merges is the ordered list of (left, right, radius).  Merge
    pair = argmin of the union's brute radius, ties broken on (smallest
    index of the earlier block, smallest index of the later block).
    """
    pts = [tuple(p) for p in points]
    n = len(pts)
    blocks = [frozenset([i]) for i in range(n)]

    def canon(bset):
        return tuple(sorted((tuple(sorted(b)) for b in bset), key=lambda t: t[0]))

    levels = {n: canon(blocks)}
    merges = []
    for m in range(n - 1, 0, -1):
        best = None
        for x in range(len(blocks)):
            for y in range(x + 1, len(blocks)):
                g, h = blocks[x], blocks[y]
                if min(g) > min(h):
                    g, h = h, g
                radius = brute_minimax_radius([pts[i] for i in (g | h)])
                key = (radius, min(g), min(h))
                if best is None or key < best[0]:
                    best = (key, g, h)
        key, g, h = best
        merges.append((tuple(sorted(g)), tuple(sorted(h)), key[0]))
        blocks = [b for b in blocks if b not in (g, h)]
        blocks.append(g | h)
        levels[m] = canon(blocks)
    return levels, merges


def det2(mat: np.ndarray) -> complex:
    """Cofactor determinant of a 2x2 matrix."""
    return mat[..., 0, 0] * mat[..., 1, 1] - mat[..., 0, 1] * mat[..., 1, 0]


def inv2(mat: np.ndarray) -> np.ndarray:
    d = det2(mat)
    return np.array([[mat[1, 1], -mat[0, 1]],
                     [-mat[1, 0], mat[0, 0]]]) / d


def rate_two_user_two_band(noise, h1, h2, w, p1, p2) -> float:
    """Objective for 2 users, 2 BSs, 2 bands via cofactor determinants.

    noise: (2, 2, 2) per-band Hermitian PD; h1, h2: (2, 2) per-band channel
    vectors (band, BS); p1, p2: per-band powers, length 2.
    """
    total = 0.0
    for k in range(2):
        a = noise[k] + p1[k] * np.outer(h1[k], h1[k].conj()) \
            + p2[k] * np.outer(h2[k], h2[k].conj())
        total += w[k] * (math.log2(det2(a).real) - math.log2(det2(noise[k]).real))
    return total


def simplex_grid(budget: float, levels: int) -> np.ndarray:
    """All (p1, p2) with p1 + p2 <= budget on a triangular grid."""
    step = budget / (levels - 1)
    pts = [(i * step, j * step)
           for i in range(levels) for j in range(levels - i)]
    return np.array(pts)


def grid_best_two_users(noise, h1, h2, w, budget1, budget2,
                        levels: int = 36, chunk: int = 128) -> float:
    """Exhaustive grid maximum of the 2-user objective, vectorized per band.

    levels=36 gives 666 grid points per user simplex.
    """
    s1 = simplex_grid(budget1, levels)
    s2 = simplex_grid(budget2, levels)
    log_noise = [math.log2(det2(noise[k]).real) for k in range(2)]
    outer1 = [np.outer(h1[k], h1[k].conj()) for k in range(2)]
    outer2 = [np.outer(h2[k], h2[k].conj()) for k in range(2)]
    best = -np.inf
    for start in range(0, len(s1), chunk):
        x1 = s1[start:start + chunk]
        total = np.zeros((len(x1), len(s2)))
        for k in range(2):
            e = (noise[k][None, None, :, :]
                 + x1[:, k, None, None, None] * outer1[k][None, None, :, :]
                 + s2[None, :, k, None, None] * outer2[k][None, None, :, :])
            d = (e[..., 0, 0] * e[..., 1, 1] - e[..., 0, 1] * e[..., 1, 0]).real
            total += w[k] * (np.log2(d) - log_noise[k])
        best = max(best, float(total.max()))
    return best


def grid_best_single_user(w, g, budget: float, points: int = 10_000) -> float:
    """Best rate sum_k w_k log2(1 + g_k p_k) on a dense 2-band simplex edge."""
    p1 = np.linspace(0.0, budget, points)
    p2 = budget - p1
    rates = w[0] * np.log2(1.0 + g[0] * p1) + w[1] * np.log2(1.0 + g[1] * p2)
    return float(rates.max())
