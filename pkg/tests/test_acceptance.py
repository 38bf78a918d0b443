"""End-to-end acceptance checks, one summary line per criterion.

The heavy Monte Carlo fixtures are session-scoped and instrumented with
the monotone-ascent verifier; criterion 3 asserts that every
instrumented run completed with zero objective descents.
"""

import json
from time import perf_counter

import numpy as np
import pytest

import conftest
from vcellsim.allocator import CellProblem, kkt_residuals, solve_cell
from vcellsim.channel import SimulationConfig, generate_channels, generate_topology
from vcellsim.cli import EXIT_OK, main
from vcellsim.clustering import RULES, hierarchical_cluster, minimax_radius
from vcellsim.evaluation import (exhaustive_best_clustering, run_sweep,
                                 score_partition)

from oracles import (brute_hierarchical, brute_minimax_radius,
                     grid_best_two_users)

NOISE_MW = 7.96214341106997e-14
BUDGET_MW = 199.52623149688787


def record(num: int, status: str, detail: str):
    line = f"criterion {num}: {status} - {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert status in ("PASS", "REPORT"), line


def steps_monotone(steps) -> bool:
    if not steps:
        return True
    return steps[0] >= 0.0 and all(b >= a for a, b in zip(steps, steps[1:]))


@pytest.fixture(scope="session")
def kkt_suite():
    """200 single-user problems over K in {1,2,5,10}, two magnitude regimes."""
    rng = np.random.default_rng(2024)
    bands = (1, 2, 5, 10)
    worst = {"stationarity": 0.0, "slack": 0.0, "budget": 0.0}
    steps_checked = 0
    step_violations = 0
    t0 = perf_counter()
    for i in range(200):
        k = bands[i % 4]
        dim = int(rng.integers(1, 4))
        shape = (1, k, dim)
        if i % 2 == 0:
            h = (rng.standard_normal(shape)
                 + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
            noise_level = 1.0
            w = rng.uniform(0.5, 2.0, size=k)
            budget = float(rng.uniform(0.5, 5.0))
        else:
            # cellular magnitudes: 34..145 dB path loss over thermal noise
            pl_db = rng.uniform(34.0, 145.0, size=shape)
            h = np.sqrt(10.0 ** (-pl_db / 10.0) / 2.0) * (
                rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
            noise_level = NOISE_MW
            w = np.full(k, 20_000.0)
            budget = BUDGET_MW
        noise = noise_level * np.broadcast_to(np.eye(dim, dtype=complex),
                                              (k, dim, dim)).copy()
        prob = CellProblem(h=h, noise_cov=noise, band_widths=w,
                           budgets=np.array([budget]))
        alloc = solve_cell(prob, track_steps=True)
        steps_checked += len(alloc.step_objectives)
        if not steps_monotone(alloc.step_objectives):
            step_violations += 1
        res = kkt_residuals(prob, alloc.p)
        for key in worst:
            worst[key] = max(worst[key], float(res[key].max()))
    return {"worst": worst, "elapsed": perf_counter() - t0,
            "steps_checked": steps_checked,
            "step_violations": step_violations}


@pytest.fixture(scope="session")
def grid_oracle_suite():
    """50 random 2-user / 2-BS / 2-band cells against a dense grid search."""
    rng = np.random.default_rng(77)
    gaps = []
    steps_checked = 0
    step_violations = 0
    t0 = perf_counter()
    for _ in range(50):
        h = (rng.standard_normal((2, 2, 2))
             + 1j * rng.standard_normal((2, 2, 2))) / np.sqrt(2.0)
        h *= rng.uniform(0.5, 1.5, size=(2, 2, 1))
        noise = np.broadcast_to(np.eye(2, dtype=complex), (2, 2, 2)).copy()
        w = rng.uniform(0.5, 2.0, size=2)
        budgets = rng.uniform(0.5, 3.0, size=2)
        prob = CellProblem(h=h, noise_cov=noise, band_widths=w, budgets=budgets)
        alloc = solve_cell(prob, tol=1e-10, track_steps=True)
        steps_checked += len(alloc.step_objectives)
        if not steps_monotone(alloc.step_objectives):
            step_violations += 1
        # 60 levels = 1830 grid points per user simplex, well past the
        # 200-point floor this check calls for
        grid = grid_best_two_users(noise, h[0], h[1], w, float(budgets[0]),
                                   float(budgets[1]), levels=60)
        gaps.append(abs(alloc.objective_bps - grid) / grid)
    return {"max_gap": max(gaps), "elapsed": perf_counter() - t0,
            "steps_checked": steps_checked,
            "step_violations": step_violations}


@pytest.fixture(scope="session")
def dominance_data():
    """Criterion 5 scenario: exhaustive vs hierarchical, fully instrumented."""
    cfg = SimulationConfig(num_bs=5, num_users=20, num_bands=4,
                           num_realizations=20, master_seed=11)
    comparisons = []
    ascent_error = None
    t0 = perf_counter()
    try:
        for r in range(cfg.num_realizations):
            topo = generate_topology(cfg, r)
            channels = generate_channels(cfg, topo, r)
            dendro = hierarchical_cluster(topo.bs_positions)
            for rule in RULES:
                for m in range(1, cfg.num_bs + 1):
                    _, ex = exhaustive_best_clustering(
                        cfg, topo, channels, m, rule, realization_index=r,
                        verify_ascent=True)
                    hier = score_partition(
                        topo, channels, dendro.levels[m], rule,
                        method="hierarchical", realization_index=r,
                        verify_ascent=True)
                    comparisons.append(
                        (r, rule, m, ex.achieved_sum_rate_bps,
                         hier.achieved_sum_rate_bps))
    except ArithmeticError as exc:
        ascent_error = str(exc)
    return {"cfg": cfg, "comparisons": comparisons,
            "elapsed": perf_counter() - t0, "ascent_error": ascent_error}


@pytest.fixture(scope="session")
def trend_data():
    """Criterion 6/7 scenario: the reference sweep at 50 realizations."""
    cfg = SimulationConfig(num_realizations=50, master_seed=1)
    rows = []
    ascent_error = None
    t0 = perf_counter()
    try:
        rows = run_sweep(cfg, methods=("hierarchical",), rules=RULES,
                         verify_ascent=True)
    except ArithmeticError as exc:
        ascent_error = str(exc)
    series = {}
    for row in rows:
        series.setdefault(row.affiliation_rule, {}).setdefault(
            row.num_cells, {})[row.realization_index] = row.achieved_sum_rate_bps
    curves = {}
    for rule, per_m in series.items():
        curves[rule] = np.array(
            [[per_m[m][i] for m in range(1, cfg.num_bs + 1)]
             for i in range(cfg.num_realizations)])
    return {"cfg": cfg, "rows": rows, "curves": curves,
            "elapsed": perf_counter() - t0, "ascent_error": ascent_error}


def test_criterion_1_waterfilling_kkt(kkt_suite):
    worst = kkt_suite["worst"]
    elapsed = kkt_suite["elapsed"]
    ok = (worst["stationarity"] <= 1e-6 and worst["slack"] <= 1e-6
          and worst["budget"] <= 1e-9 and kkt_suite["step_violations"] == 0
          and elapsed < 5.0)
    record(1, "PASS" if ok else "FAIL",
           f"200 single-user problems, worst residuals: stationarity "
           f"{worst['stationarity']:.2e} (<=1e-6), slack {worst['slack']:.2e} "
           f"(<=1e-6), budget {worst['budget']:.2e} (<=1e-9); "
           f"{elapsed:.2f} s (<5 s)")


def test_criterion_2_grid_oracle(grid_oracle_suite):
    gap = grid_oracle_suite["max_gap"]
    elapsed = grid_oracle_suite["elapsed"]
    ok = (gap <= 1e-3 and grid_oracle_suite["step_violations"] == 0
          and elapsed < 60.0)
    record(2, "PASS" if ok else "FAIL",
           f"50 cells vs 1830-point grid search, max relative gap "
           f"{gap:.2e} (<=1e-3); {elapsed:.1f} s (<60 s)")


def test_criterion_3_monotone_ascent(kkt_suite, grid_oracle_suite,
                                     dominance_data, trend_data):
    violations = (kkt_suite["step_violations"]
                  + grid_oracle_suite["step_violations"])
    errors = [e for e in (dominance_data["ascent_error"],
                          trend_data["ascent_error"]) if e]
    steps = kkt_suite["steps_checked"] + grid_oracle_suite["steps_checked"]
    ok = violations == 0 and not errors
    detail = (f"{steps} tracked solver steps plus "
              f"{len(dominance_data['comparisons'])} dominance comparisons and "
              f"{len(trend_data['rows'])} sweep rows under the ascent "
              f"verifier; zero descents")
    if errors:
        detail = f"ascent violation: {errors[0]}"
    record(3, "PASS" if ok else "FAIL", detail)


def test_criterion_4_clustering_oracle():
    rng = np.random.default_rng(4242)
    mismatches = 0
    t0 = perf_counter()
    for _ in range(100):
        n = int(rng.integers(2, 8))
        pts = rng.uniform(0.0, 100.0, size=(n, 2))
        dendro = hierarchical_cluster(pts)
        levels, merges = brute_hierarchical(pts)
        if dendro.levels != levels or dendro.merge_records != merges:
            mismatches += 1
            continue
        for part in dendro.levels.values():
            for block in part:
                lib = minimax_radius(pts[list(block)])
                ref = brute_minimax_radius([tuple(pts[i]) for i in block])
                if lib != ref:
                    mismatches += 1
    elapsed = perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10.0
    record(4, "PASS" if ok else "FAIL",
           f"100 point sets (n<=7): merge sequences, levels and block radii "
           f"all bit-equal to the brute-force oracle, {mismatches} "
           f"mismatches; {elapsed:.1f} s (<10 s)")


def test_criterion_5_exhaustive_dominance(dominance_data):
    comparisons = dominance_data["comparisons"]
    elapsed = dominance_data["elapsed"]
    losses = [(r, rule, m) for r, rule, m, ex, hier in comparisons
              if not ex >= hier]
    expected = 20 * len(RULES) * 5
    ok = (not losses and len(comparisons) == expected
          and dominance_data["ascent_error"] is None and elapsed < 300.0)
    detail = (f"5 BSs / 20 users / 4 bands, 20 realizations, both rules: "
              f"exhaustive >= hierarchical in {len(comparisons)}/{expected} "
              f"cases; {elapsed:.0f} s (<300 s)")
    if dominance_data["ascent_error"]:
        detail = f"ascent violation: {dominance_data['ascent_error']}"
    elif losses:
        detail += f"; first loss at {losses[0]}"
    record(5, "PASS" if ok else "FAIL", detail)


def test_criterion_6_trend(trend_data):
    elapsed = trend_data["elapsed"]
    if trend_data["ascent_error"]:
        record(6, "FAIL", f"ascent violation: {trend_data['ascent_error']}")
    parts = []
    ok = elapsed < 600.0
    for rule in RULES:
        series = trend_data["curves"][rule]
        means = series.mean(axis=0)
        inversions = []
        for m in range(len(means) - 1):
            diff = series[:, m + 1] - series[:, m]
            d = float(diff.mean())
            if d > 0.0:
                se = float(diff.std(ddof=1) / np.sqrt(series.shape[0]))
                inversions.append((m + 1, d, se))
        rule_ok = len(inversions) <= 1 and all(d <= se for _, d, se in inversions)
        ok = ok and rule_ok
        parts.append(f"{rule}: " + " > ".join(f"{v / 1e6:.2f}" for v in means)
                     + f" Mbit/s, {len(inversions)} inversions")
    record(6, "PASS" if ok else "FAIL",
           f"mean achieved rate non-increasing in m over 50 realizations "
           f"({'; '.join(parts)}); {elapsed:.0f} s (<600 s)")


def test_criterion_7_rule_similarity(trend_data):
    if trend_data["ascent_error"]:
        record(7, "FAIL", f"ascent violation: {trend_data['ascent_error']}")
    closest = trend_data["curves"]["closest_bs"].mean(axis=0)
    best = trend_data["curves"]["best_channel"].mean(axis=0)
    gaps = np.abs(closest - best) / np.maximum(closest, best)
    worst_m = int(np.argmax(gaps)) + 1
    max_gap = float(gaps.max())
    status = "PASS" if max_gap < 0.10 else "REPORT"
    detail = (f"closest-BS vs best-channel mean curves differ by at most "
              f"{max_gap:.2%} (at m={worst_m}, threshold 10%)")
    if status == "REPORT":
        detail += "; exceeds threshold, flagged for investigation (not a hard rejection)"
    record(7, status, detail)


def test_criterion_8_determinism(tmp_path, monkeypatch):
    body = {"num_bs": 4, "num_users": 10, "num_bands": 2,
            "num_realizations": 3, "master_seed": 21}
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(body))
    t0 = perf_counter()
    monkeypatch.setenv("VCELLSIM_WORKERS", "1")
    seq = main(["run", "--config", str(config_path),
                "--out", str(tmp_path / "seq"),
                "--methods", "hierarchical,kmeans"])
    monkeypatch.setenv("VCELLSIM_WORKERS", "2")
    par = main(["run", "--config", str(config_path),
                "--out", str(tmp_path / "par"),
                "--methods", "hierarchical,kmeans"])
    elapsed = perf_counter() - t0
    seq_bytes = (tmp_path / "seq" / "results.csv").read_bytes()
    par_bytes = (tmp_path / "par" / "results.csv").read_bytes()
    ok = seq == EXIT_OK and par == EXIT_OK and seq_bytes == par_bytes
    record(8, "PASS" if ok else "FAIL",
           f"results.csv byte-identical between sequential and 2-worker "
           f"runs of the same seed ({len(seq_bytes)} bytes, {elapsed:.1f} s)")
