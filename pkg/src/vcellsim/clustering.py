"""Virtual-cell construction: BS clustering and user affiliation.

The main clustering is bottom-up agglomeration under minimax linkage:
the distance between two groups is the minimax radius of their union,
i.e. the smallest radius of a ball centered at a member point that
covers every point of the union.  Each merge therefore keeps every
cluster coverable by one of its own members, which suits BS groups that
must jointly serve their area.  A seeded Lloyd k-means baseline and an
exhaustive set-partition stream (for the optimal-clustering search) are
provided alongside, plus the two user-affiliation rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

RULE_CLOSEST_BS = "closest_bs"
RULE_BEST_CHANNEL = "best_channel"
RULES = (RULE_CLOSEST_BS, RULE_BEST_CHANNEL)

# Enumerating set partitions grows as the Bell number (B(10) = 115975);
# above this many elements the stream is refused.
ENUMERATION_CAP = 10


class CapacityError(ValueError):
    """Problem size exceeds a hard enumeration limit."""


@dataclass
class Dendrogram:
    """Nested partitions from agglomerative clustering.

    levels[m] is the partition into m blocks, for m = n .. 1;
    merge_records lists (left_block, right_block, radius) in merge order.
    """

    levels: dict[int, tuple[tuple[int, ...], ...]]
    merge_records: list[tuple[tuple[int, ...], tuple[int, ...], float]]

    def to_json_dict(self) -> dict:
        return {
            "levels": {str(m): [list(b) for b in part]
                       for m, part in sorted(self.levels.items())},
            "merges": [{"left": list(l), "right": list(r), "radius": rad}
                       for l, r, rad in self.merge_records],
        }


@dataclass
class VirtualCell:
    bs: tuple[int, ...]
    users: tuple[int, ...]


@dataclass
class VirtualCellPartition:
    """Proper clustering: disjoint BS blocks and user blocks covering both sets."""

    cells: list[VirtualCell]
    affiliation_rule: str
    num_bs: int
    num_users: int

    def validate(self):
        all_bs = sorted(b for c in self.cells for b in c.bs)
        all_users = sorted(u for c in self.cells for u in c.users)
        if any(not c.bs for c in self.cells):
            raise ValueError("virtual cell with empty BS block")
        if all_bs != list(range(self.num_bs)):
            raise ValueError("BS blocks do not partition the BS set")
        if all_users != list(range(self.num_users)):
            raise ValueError("user blocks do not partition the user set")


def canonical_partition(blocks) -> tuple[tuple[int, ...], ...]:
    """Sort each block ascending, then blocks by smallest element."""
    return tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0]))


def _distance_matrix(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)


def minimax_radius(block) -> float:
    """Smallest max-distance from a member point to the rest of the block."""
    pts = np.atleast_2d(np.asarray(block, dtype=float))
    if pts.size == 0:
        raise ValueError("minimax radius of an empty block")
    return float(_distance_matrix(pts).max(axis=1).min())


def minimax_linkage(a, b) -> float:
    """Minimax radius of the union of two disjoint point sets."""
    pa = np.atleast_2d(np.asarray(a, dtype=float))
    pb = np.atleast_2d(np.asarray(b, dtype=float))
    if pa.size == 0 or pb.size == 0:
        raise ValueError("linkage of an empty block")
    for p in pa:
        if np.any(np.all(pb == p, axis=1)):
            raise ValueError("linkage blocks must be disjoint")
    return minimax_radius(np.vstack([pa, pb]))


def hierarchical_cluster(points) -> Dendrogram:
    """Agglomerate singletons under minimax linkage, recording every level.

    Ties in the argmin merge are broken lexicographically on (smallest
    member index of the first block, smallest member index of the second),
    so the dendrogram is a pure function of the input order.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    if n < 1:
        raise ValueError("need at least one point")
    dist = _distance_matrix(pts)

    blocks: list[tuple[int, ...]] = [(i,) for i in range(n)]
    levels = {n: canonical_partition(blocks)}
    merges: list[tuple[tuple[int, ...], tuple[int, ...], float]] = []

    def union_radius(g: tuple[int, ...], h: tuple[int, ...]) -> float:
        idx = list(g + h)
        sub = dist[np.ix_(idx, idx)]
        return float(sub.max(axis=1).min())

    for m in range(n - 1, 0, -1):
        best_key = None
        best_pair = None
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                g, h = blocks[i], blocks[j]
                if min(g) > min(h):
                    g, h = h, g
                key = (union_radius(g, h), min(g), min(h))
                if best_key is None or key < best_key:
                    best_key = key
                    best_pair = (i, j)
        i, j = best_pair
        g, h = blocks[i], blocks[j]
        if min(g) > min(h):
            g, h = h, g
        merges.append((g, h, best_key[0]))
        merged = tuple(sorted(g + h))
        blocks = [b for t, b in enumerate(blocks) if t not in (i, j)]
        blocks.append(merged)
        levels[m] = canonical_partition(blocks)
    return Dendrogram(levels=levels, merge_records=merges)


def kmeans_cluster(points, m: int, seed: int, max_iter: int = 100):
    """Seeded Lloyd iterations; returns a canonical partition of indices.

    Initial centroids are m distinct points chosen uniformly.  Assignment
    runs to a fixpoint or the iteration cap; a cluster left empty by an
    assignment round is repaired by stealing the point farthest from its
    centroid out of the largest cluster.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    if not 1 <= m <= n:
        raise ValueError(f"cluster count {m} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    centroids = pts[rng.choice(n, size=m, replace=False)].copy()
    assign = None
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for c in range(m):
            if not np.any(new_assign == c):
                sizes = np.bincount(new_assign, minlength=m)
                donor = int(sizes.argmax())
                members = np.flatnonzero(new_assign == donor)
                far = members[d2[members, donor].argmax()]
                new_assign[far] = c
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(m):
            centroids[c] = pts[assign == c].mean(axis=0)
    return canonical_partition(
        [tuple(np.flatnonzero(assign == c)) for c in range(m)])


def enumerate_partitions(n: int, m: int, cap: int = ENUMERATION_CAP) -> Iterator[tuple]:
    """Yield every partition of {0..n-1} into exactly m blocks, once each.

    Partitions come out in canonical form (blocks sorted by smallest
    element) and in a stable lexicographic order.
    """
    if not 1 <= m <= n:
        raise ValueError(f"block count {m} outside [1, {n}]")
    if n > cap:
        raise CapacityError(
            f"enumerating partitions of {n} elements exceeds the cap of {cap}")

    def rec(i: int, blocks: list[list[int]]):
        rem = n - i
        if rem == 0:
            if len(blocks) == m:
                yield tuple(tuple(b) for b in blocks)
            return
        if len(blocks) + rem > m:
            for b in blocks:
                b.append(i)
                yield from rec(i + 1, blocks)
                b.pop()
        if len(blocks) < m and len(blocks) + rem >= m:
            blocks.append([i])
            yield from rec(i + 1, blocks)
            blocks.pop()

    # plain return so the range and cap checks fire at call time
    return rec(0, [])


def affiliate_users(topo, channels, bs_partition, rule: str,
                    band_aggregate: str = "sum") -> VirtualCellPartition:
    """Attach every user to the virtual cell of its chosen BS.

    closest_bs picks the BS at minimum Euclidean distance; best_channel
    picks the BS with the largest channel energy, aggregated across bands
    by `band_aggregate` ("sum" or "max").  Ties go to the lowest BS index.
    """
    if rule not in RULES:
        raise ValueError(f"unknown affiliation rule {rule!r}; expected one of {RULES}")
    blocks = canonical_partition(bs_partition)
    num_bs = len(topo.bs_positions)
    num_users = len(topo.user_positions)

    if rule == RULE_CLOSEST_BS:
        diff = topo.user_positions[:, None, :] - topo.bs_positions[None, :, :]
        score = -np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)
    else:
        energy = np.abs(channels.h) ** 2  # (U, B, K)
        if band_aggregate == "sum":
            score = energy.sum(axis=2)
        elif band_aggregate == "max":
            score = energy.max(axis=2)
        else:
            raise ValueError(f"unknown band aggregate {band_aggregate!r}")
    chosen_bs = score.argmax(axis=1)  # first max wins on ties

    cell_of_bs = np.empty(num_bs, dtype=int)
    for ci, block in enumerate(blocks):
        for b in block:
            cell_of_bs[b] = ci
    cells = [VirtualCell(bs=block, users=()) for block in blocks]
    users_per_cell: list[list[int]] = [[] for _ in blocks]
    for u, b in enumerate(chosen_bs):
        users_per_cell[cell_of_bs[b]].append(u)
    for ci, ulist in enumerate(users_per_cell):
        cells[ci] = VirtualCell(bs=blocks[ci], users=tuple(ulist))

    part = VirtualCellPartition(cells=cells, affiliation_rule=rule,
                                num_bs=num_bs, num_users=num_users)
    part.validate()
    return part
