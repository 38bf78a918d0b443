"""Network scoring and Monte Carlo sweeps.

Cells are solved independently, each ignoring transmissions outside its
own virtual cell.  The network is then scored with those transmissions
re-introduced as Gaussian interference: for cell v and band k the noise
covariance is augmented to

    Ntilde = N_k + sum_{u' outside v} p[u',k] h_{u',v,k} h^†

(channel vectors taken toward cell v's BSs) and the achieved rate is the
joint-decoding log-det rate against Ntilde.  Using the full covariance
rather than a per-user scalar SINR keeps the spatial color of the
interference, which the joint receiver actually sees.

run_sweep drives realizations x methods x rules x cluster counts and
returns one row per combination; realizations are independent work items
and may be solved in parallel with identical output.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .allocator import (CellProblem, PowerAllocation, _interference_gram,
                        _logdet2, solve_cell)
from .channel import (ChannelTensor, SimulationConfig, Topology,
                      STREAM_KMEANS, generate_channels, generate_topology)
from .clustering import (RULES, VirtualCellPartition, affiliate_users,
                         enumerate_partitions, hierarchical_cluster,
                         kmeans_cluster)

METHOD_HIERARCHICAL = "hierarchical"
METHOD_KMEANS = "kmeans"
METHOD_EXHAUSTIVE = "exhaustive"
METHODS = (METHOD_HIERARCHICAL, METHOD_KMEANS, METHOD_EXHAUSTIVE)

RESULT_CSV_HEADER = ("realization", "method", "rule", "num_cells",
                     "sum_objective_bps", "achieved_rate_bps")
AGGREGATE_CSV_HEADER = ("method", "rule", "num_cells",
                        "mean_achieved_rate_bps", "stderr_achieved_rate_bps",
                        "mean_sum_objective_bps", "num_realizations")


@dataclass
class NetworkResult:
    """One scored (realization, method, rule, cluster count) combination."""

    realization_index: int
    num_cells: int
    clustering_method: str
    affiliation_rule: str
    per_cell_objective_bps: list[float]
    achieved_sum_rate_bps: float

    @property
    def sum_objective_bps(self) -> float:
        return float(sum(self.per_cell_objective_bps))


@dataclass
class AggregateRow:
    method: str
    rule: str
    num_cells: int
    mean_achieved_rate_bps: float
    stderr_achieved_rate_bps: float
    mean_sum_objective_bps: float
    num_realizations: int


def build_cell_problem(channels: ChannelTensor, topo: Topology,
                       bs_block, user_block) -> CellProblem:
    """Cell-local allocation problem: channels toward the cell's BSs only."""
    bs_idx = list(bs_block)
    user_idx = list(user_block)
    dim = len(bs_idx)
    # (users, BSs, bands) -> (users, bands, BSs)
    h = channels.h[np.ix_(user_idx, bs_idx)].transpose(0, 2, 1)
    noise_cov = channels.noise_power[:, None, None] * np.eye(dim, dtype=complex)
    return CellProblem(h=h, noise_cov=noise_cov,
                       band_widths=channels.band_widths,
                       budgets=topo.power_budgets[user_idx])


def _check_ascent(step_objectives: list[float]):
    prev = 0.0
    for i, s in enumerate(step_objectives):
        if s < prev:
            raise ArithmeticError(
                f"objective decreased at inner step {i}: {prev} -> {s}")
        prev = s


def solve_partition(topo: Topology, channels: ChannelTensor,
                    partition: VirtualCellPartition, tol: float = 1e-8,
                    max_rounds: int = 200,
                    verify_ascent: bool = False) -> list[PowerAllocation]:
    """Solve every cell of the partition independently, in cell order."""
    allocations = []
    for cell in partition.cells:
        prob = build_cell_problem(channels, topo, cell.bs, cell.users)
        alloc = solve_cell(prob, tol=tol, max_rounds=max_rounds,
                           track_steps=verify_ascent)
        if verify_ascent:
            _check_ascent(alloc.step_objectives)
        allocations.append(alloc)
    return allocations


def achieved_sum_rate(channels: ChannelTensor, partition: VirtualCellPartition,
                      allocations: list[PowerAllocation]) -> float:
    """Network rate with out-of-cell transmissions counted as interference.

    With a single cell (or all out-of-cell powers zero) this reproduces
    the interference-free objective bit for bit.
    """
    if len(allocations) != len(partition.cells):
        raise ValueError(
            f"{len(allocations)} allocations for {len(partition.cells)} cells")
    num_users, _, num_bands = channels.h.shape
    p_all = np.zeros((num_users, num_bands))
    for cell, alloc in zip(partition.cells, allocations):
        if alloc.p.shape != (len(cell.users), num_bands):
            raise ValueError(
                f"allocation shape {alloc.p.shape} does not match cell "
                f"({len(cell.users)} users, {num_bands} bands)")
        p_all[list(cell.users)] = alloc.p

    total = 0.0
    all_users = np.arange(num_users)
    for cell, alloc in zip(partition.cells, allocations):
        bs_idx = list(cell.bs)
        dim = len(bs_idx)
        noise = channels.noise_power[:, None, None] * np.eye(dim, dtype=complex)
        out = np.setdiff1d(all_users, np.asarray(cell.users, dtype=int))
        h_out = channels.h[np.ix_(out, bs_idx)].transpose(0, 2, 1)
        n_tilde = noise + _interference_gram(h_out, p_all[out])
        h_cell = channels.h[np.ix_(list(cell.users), bs_idx)].transpose(0, 2, 1)
        cov = n_tilde + _interference_gram(h_cell, alloc.p)
        total += float(channels.band_widths @ (_logdet2(cov) - _logdet2(n_tilde)))
    return total


def score_partition(topo: Topology, channels: ChannelTensor, bs_partition,
                    rule: str, method: str, realization_index: int,
                    tol: float = 1e-8, max_rounds: int = 200,
                    verify_ascent: bool = False) -> NetworkResult:
    """Affiliate, solve all cells, and score one BS partition."""
    partition = affiliate_users(topo, channels, bs_partition, rule)
    allocations = solve_partition(topo, channels, partition, tol=tol,
                                  max_rounds=max_rounds,
                                  verify_ascent=verify_ascent)
    per_cell = [a.objective_bps for a in allocations]
    achieved = achieved_sum_rate(channels, partition, allocations)
    return NetworkResult(realization_index=realization_index,
                         num_cells=len(partition.cells),
                         clustering_method=method, affiliation_rule=rule,
                         per_cell_objective_bps=per_cell,
                         achieved_sum_rate_bps=achieved)


def exhaustive_best_clustering(cfg: SimulationConfig, topo: Topology,
                               channels: ChannelTensor, m: int, rule: str,
                               realization_index: int = 0, tol: float = 1e-8,
                               max_rounds: int = 200,
                               verify_ascent: bool = False):
    """Try every BS partition into m blocks; keep the best achieved rate.

    Returns (bs_partition, NetworkResult).  Ties keep the first partition
    in canonical enumeration order.
    """
    best_part = None
    best_res = None
    for part in enumerate_partitions(cfg.num_bs, m):
        res = score_partition(topo, channels, part, rule,
                              method=METHOD_EXHAUSTIVE,
                              realization_index=realization_index,
                              tol=tol, max_rounds=max_rounds,
                              verify_ascent=verify_ascent)
        if best_res is None or res.achieved_sum_rate_bps > best_res.achieved_sum_rate_bps:
            best_part, best_res = part, res
    return best_part, best_res


def kmeans_seed(cfg: SimulationConfig, realization_index: int, m: int) -> int:
    """Deterministic centroid-init seed per (master seed, realization, m)."""
    ss = np.random.SeedSequence(
        [cfg.master_seed, STREAM_KMEANS, realization_index, m])
    return int(ss.generate_state(1)[0])


def _realization_rows(realization_index: int, cfg: SimulationConfig,
                      methods, rules, tol: float, max_rounds: int,
                      verify_ascent: bool) -> list[NetworkResult]:
    topo = generate_topology(cfg, realization_index)
    channels = generate_channels(cfg, topo, realization_index)
    dendro = None
    if METHOD_HIERARCHICAL in methods:
        dendro = hierarchical_cluster(topo.bs_positions)
    rows = []
    for method in methods:
        for m in range(1, cfg.num_bs + 1):
            for rule in rules:
                if method == METHOD_EXHAUSTIVE:
                    _, res = exhaustive_best_clustering(
                        cfg, topo, channels, m, rule,
                        realization_index=realization_index, tol=tol,
                        max_rounds=max_rounds, verify_ascent=verify_ascent)
                else:
                    if method == METHOD_HIERARCHICAL:
                        part = dendro.levels[m]
                    else:
                        part = kmeans_cluster(topo.bs_positions, m,
                                              kmeans_seed(cfg, realization_index, m))
                    res = score_partition(topo, channels, part, rule,
                                          method=method,
                                          realization_index=realization_index,
                                          tol=tol, max_rounds=max_rounds,
                                          verify_ascent=verify_ascent)
                rows.append(res)
    return rows


def run_sweep(cfg: SimulationConfig, methods=(METHOD_HIERARCHICAL,),
              rules=RULES, workers: int = 1, tol: float = 1e-8,
              max_rounds: int = 200,
              verify_ascent: bool = False) -> list[NetworkResult]:
    """All (realization, method, rule, cluster count) rows, canonically sorted.

    The table is a pure function of (cfg, methods, rules): rows are sorted
    by (realization, method, rule, num_cells), so any worker count yields
    the identical table.
    """
    methods = tuple(methods)
    rules = tuple(rules)
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    for rule in rules:
        if rule not in RULES:
            raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")

    work = partial(_realization_rows, cfg=cfg, methods=methods, rules=rules,
                   tol=tol, max_rounds=max_rounds, verify_ascent=verify_ascent)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_realization = list(pool.map(work, range(cfg.num_realizations)))
    else:
        per_realization = [work(r) for r in range(cfg.num_realizations)]
    rows = [row for rows_r in per_realization for row in rows_r]
    rows.sort(key=lambda r: (r.realization_index, r.clustering_method,
                             r.affiliation_rule, r.num_cells))
    return rows


def aggregate_results(results: list[NetworkResult]) -> list[AggregateRow]:
    """Mean and standard error of achieved rate per (method, rule, m)."""
    groups: dict[tuple, list[NetworkResult]] = {}
    for res in results:
        key = (res.clustering_method, res.affiliation_rule, res.num_cells)
        groups.setdefault(key, []).append(res)
    out = []
    for (method, rule, m), rows in sorted(groups.items()):
        achieved = np.array([r.achieved_sum_rate_bps for r in rows])
        objectives = np.array([r.sum_objective_bps for r in rows])
        n = len(rows)
        stderr = float(achieved.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        out.append(AggregateRow(method=method, rule=rule, num_cells=m,
                                mean_achieved_rate_bps=float(achieved.mean()),
                                stderr_achieved_rate_bps=stderr,
                                mean_sum_objective_bps=float(objectives.mean()),
                                num_realizations=n))
    return out


def write_results_csv(results: list[NetworkResult], path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RESULT_CSV_HEADER)
        for r in results:
            writer.writerow([r.realization_index, r.clustering_method,
                             r.affiliation_rule, r.num_cells,
                             repr(r.sum_objective_bps),
                             repr(r.achieved_sum_rate_bps)])


def write_results_jsonl(results: list[NetworkResult], path: str):
    with open(path, "w") as f:
        for r in results:
            f.write(json.dumps({
                "realization": r.realization_index,
                "method": r.clustering_method,
                "rule": r.affiliation_rule,
                "num_cells": r.num_cells,
                "sum_objective_bps": r.sum_objective_bps,
                "achieved_rate_bps": r.achieved_sum_rate_bps,
                "per_cell_objective_bps": r.per_cell_objective_bps,
            }) + "\n")


def write_aggregate_csv(rows: list[AggregateRow], path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(AGGREGATE_CSV_HEADER)
        for a in rows:
            writer.writerow([a.method, a.rule, a.num_cells,
                             repr(a.mean_achieved_rate_bps),
                             repr(a.stderr_achieved_rate_bps),
                             repr(a.mean_sum_objective_bps),
                             a.num_realizations])


def default_workers() -> int:
    """Worker count from the VCELLSIM_WORKERS environment variable."""
    raw = os.environ.get("VCELLSIM_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"VCELLSIM_WORKERS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"VCELLSIM_WORKERS must be >= 1, got {n}")
    return n
