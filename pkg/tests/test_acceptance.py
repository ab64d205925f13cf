"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the summary
section at the end of the run lists every criterion.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from families import (
    abc_chain,
    depth_family,
    attention_family,
    grid_family,
    random_abc_template,
    random_template,
)
from subarch import cli
from subarch import layers as L
from subarch.abnc import check_ordering, check_weak
from subarch.arch import (
    ArchParamVar,
    ArchTemplate,
    activation,
    dense,
    enumerate_space,
    forward,
    instantiate,
    scale,
    softmax,
)
from subarch.data import gen_data, save_dataset
from subarch.extractor import expected_candidate_count, extract, trace_concordance
from subarch.metrics import (
    error_rate,
    param_size,
    param_size_poly,
    surrogate_error,
    surrogate_inference,
    surrogate_inference_poly,
)
from subarch.oracle import (
    WeightGrid,
    brute_force_ose_dec,
    equal_error_shortest_path,
    exhaustive_opt,
    OseDecInstance,
    reduce_nn_training,
)
from subarch.poly import evaluate
from subarch.report import read_report, sidecar_paths
from subarch.trainer import HyperParams, backprop, fixed_lr, sgd_shuffling_train, step_budget


# -- 1. gradients -------------------------------------------------------------------


def _relu_margin(net, x) -> float:
    """Smallest |pre-activation| feeding any relu; inf if there is none."""
    h, margin = x[None, :], math.inf
    for layer, ws in zip(net.layers, net.weights):
        if layer.kind == "activation" and layer.fn == "relu":
            margin = min(margin, float(np.abs(h).min()))
        h, _ = L.forward(layer, h, ws)
    return margin


def _max_rel_error(net, x, y, h=1e-5) -> float:
    grads = backprop(net, (x, y))
    worst = 0.0
    for ws, gs in zip(net.weights, grads):
        for w, g in zip(ws, gs):
            flat, gflat = w.reshape(-1), g.reshape(-1)
            for k in range(flat.size):
                old = flat[k]
                flat[k] = old + h
                up = (forward(net, x) - y) ** 2
                flat[k] = old - h
                down = (forward(net, x) - y) ** 2
                flat[k] = old
                fd = (up - down) / (2 * h)
                worst = max(worst, abs(fd - gflat[k]) / max(abs(fd), abs(gflat[k]), 1e-6))
    return worst


def _gradient_case(rng, template, space):
    assignment = space.assignments[int(rng.integers(len(space)))]
    net = instantiate(template, assignment, seed=int(rng.integers(2**31)))
    for ws in net.weights:
        for w in ws:
            w *= rng.uniform(0.5, 2.0)
    while True:
        x = rng.standard_normal(template.input_dim)
        if _relu_margin(net, x) > 1e-3:
            break
    return _max_rel_error(net, x, int(rng.integers(2)))


@pytest.mark.criterion(1)
def test_c01_gradient_correctness(criterion):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    errors, kinds = [], set()
    for _ in range(200):
        t, space, used = random_template(rng)
        kinds |= used
        errors.append(_gradient_case(rng, t, space))
    t, space = attention_family(p=3, H=(2, 4), A=(1, 2))
    for _ in range(30):
        errors.append(_gradient_case(rng, t, space))
    kinds.add("attention block")
    elapsed = time.perf_counter() - start
    ok = max(errors) <= 1e-4 and elapsed < 60 and len(kinds) == 7
    criterion(ok, f"{len(errors)} cases, {len(kinds)} layer kinds, max rel err {max(errors):.2e}, "
                  f"{elapsed:.1f}s")
    assert ok


# -- 2. surrogate consistency -----------------------------------------------------


def _census_oracle(layers) -> int:
    """Operation census from resolved shapes, one rule per layer kind."""
    total = 0
    for l in layers:
        if l.kind == "dense":
            total += 2 * l.in_dim * l.out_dim
        elif l.kind in ("activation", "scale"):
            total += l.in_dim
        elif l.kind == "softmax":
            total += 3 * l.in_dim
        elif l.kind == "matmul":
            total += 2 * l.rows * l.inner * l.cols
        elif l.kind == "attention":
            p, H = l.in_dim, l.out_dim
            total += 2 * (3 * p * H + 2 * H * H) + H * H
    return total


@pytest.mark.criterion(2)
def test_c02_surrogate_consistency(criterion):
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    mismatches = 0
    for k in range(200):
        if k % 2:
            t, space, _ = random_template(rng)
        else:
            t, space = random_abc_template(rng)
        a = space.assignments[int(rng.integers(len(space)))]
        p, i = evaluate(param_size_poly(t), a), evaluate(surrogate_inference_poly(t), a)
        resolved = t.resolve(a)
        direct_p = sum(int(np.prod(s)) for l in resolved for s in l.weight_shapes())
        checks = (p == param_size(t, a) == direct_p == instantiate(t, a).num_params(),
                  i == surrogate_inference(t, a) == _census_oracle(resolved),
                  type(p) is int and type(i) is int)
        mismatches += not all(checks)
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10
    criterion(ok, f"200 cases, {mismatches} mismatches, {elapsed:.1f}s")
    assert ok


# -- 3 and 4. error bound and approximation ratio -----------------------------------

SCAN_CAP = 12000
FAMILIES_NEEDED = 20


def _scan_family(rng, k):
    act = str(rng.choice(["tanh", "relu"]))
    h = int(rng.choice([2, 3, 4, 5, 6, 8]))
    eta = float(rng.choice([0.01, 0.02, 0.05, 0.1, 0.2, 0.5]))
    size = int(rng.integers(8, 13))
    noise = float(rng.choice([0.3, 0.6, 1.0]))
    p = int(rng.integers(1, 4))
    t, space = depth_family(act, h, range(1, size + 1), p=p)
    data = gen_data("blobs", 64, p, noise, seed=k)
    return t, space, data, HyperParams(data, eta), k


@pytest.fixture(scope="module")
def bound_instances():
    """Depth families that pass the weak check and order perfectly under their seeds."""
    rng = np.random.default_rng(303)
    found, scanned = [], 0
    start = time.perf_counter()
    while len(found) < FAMILIES_NEEDED and scanned < SCAN_CAP:
        t, space, data, theta, seed = _scan_family(rng, scanned)
        scanned += 1
        if not check_weak(t, ["n"]).holds:
            continue
        full = extract(t, data, space, [theta], 1, 500, master_seed=seed)
        if trace_concordance(full.trace) == 1.0:
            found.append((t, space, data, theta, seed))
    return found, scanned, time.perf_counter() - start


@pytest.fixture(scope="module")
def bound_runs(bound_instances):
    found, _, _ = bound_instances
    runs = []
    for t, space, data, theta, seed in found:
        opt_idx, opt = exhaustive_opt(t, data, space, [theta], 500, master_seed=seed)
        for eps in (1, 2, 3, 4):
            alg = extract(t, data, space, [theta], eps, 500, master_seed=seed).best
            runs.append((eps, opt_idx, opt.w, alg.xi_index, alg.w))
    return runs


@pytest.mark.slow
@pytest.mark.criterion(3)
def test_c03_error_bound(criterion, bound_instances, bound_runs):
    found, scanned, elapsed = bound_instances
    bad = [r for r in bound_runs if abs(r[1] - r[3]) > r[0] - 1]
    ok = len(found) >= FAMILIES_NEEDED and not bad
    criterion(ok, f"{len(found)} families from {scanned} scanned ({elapsed:.0f}s), "
                  f"{len(bound_runs)} runs, {len(bad)} index-distance violations")
    assert ok


@pytest.mark.slow
@pytest.mark.criterion(4)
def test_c04_approximation_ratio(criterion, bound_runs):
    judged = [r for r in bound_runs if r[2] > 0]
    bad = [r for r in judged if abs(r[2] - r[4]) / r[2] > abs(1 - r[0])]
    ok = bool(judged) and not bad
    worst = max((abs(r[2] - r[4]) / r[2] for r in judged), default=float("nan"))
    criterion(ok, f"{len(judged)} runs with OPT_w > 0, worst ratio {worst:.3g}, {len(bad)} violations")
    assert ok


# -- 5. step budget -------------------------------------------------------------------


def _budget_oracle(L, G, F0, F_inf, n, eps) -> int:
    with mpmath.workdps(80):
        v = (3 * mpmath.mpf(str(L)) * mpmath.mpf(str(G)) * (mpmath.mpf(str(F0)) - mpmath.mpf(str(F_inf)))
             * n / mpmath.mpf(str(eps)) ** mpmath.mpf(1.5))
        nearest = mpmath.nint(v)
        if abs(v - nearest) < mpmath.mpf(10) ** -50:
            return int(nearest)
        return int(mpmath.floor(v))


@pytest.mark.criterion(5)
def test_c05_step_budget(criterion):
    exact = step_budget(1, 1, 1, 0, 100, 0.01) == 300000 and fixed_lr(1, 1, 0.01) == 0.1
    rng = np.random.default_rng(505)
    mismatches = 0
    for _ in range(50):
        L = round(float(rng.uniform(0.1, 10)), 3)
        G = round(float(rng.uniform(0.1, 10)), 3)
        F_inf = round(float(rng.uniform(0, 1)), 2)
        F0 = round(F_inf + float(rng.uniform(0, 5)), 3)
        n = int(rng.integers(1, 1000))
        eps = float(rng.choice([0.01, 0.04, 0.25, round(float(rng.uniform(0.001, 1)), 4)]))
        mismatches += step_budget(L, G, F0, F_inf, n, eps) != _budget_oracle(L, G, F0, F_inf, n, eps)
    ok = exact and mismatches == 0
    criterion(ok, f"reference values {'exact' if exact else 'WRONG'}, 50 random tuples, "
                  f"{mismatches} mismatches")
    assert ok


# -- 6. error/surrogate bound -------------------------------------------------------


@pytest.mark.criterion(6)
def test_c06_error_surrogate_bound(criterion):
    rng = np.random.default_rng(606)
    worst, failures = -math.inf, 0
    for k in range(100):
        t, space, _ = random_template(rng) if k % 2 else (*random_abc_template(rng), None)
        a = space.assignments[int(rng.integers(len(space)))]
        net = instantiate(t, a, seed=k)
        kinds = ["blobs", "linear", "xor"] if t.input_dim >= 2 else ["blobs", "linear"]
        data = gen_data(str(rng.choice(kinds)), int(rng.integers(8, 40)),
                        t.input_dim, 0.5, seed=k)
        if k % 3 == 0:
            sgd_shuffling_train(net, HyperParams(data, 0.1, shuffle_seed=k), 100)
        e, e_hat = float(error_rate(net, data)), surrogate_error(net, data)
        worst = max(worst, e - 4 * e_hat)
        failures += not e <= 4 * e_hat + 1e-9
    criterion(failures == 0, f"100 networks, {failures} failures, max e - 4*e_hat = {worst:.3g}")
    assert failures == 0


# -- 7. ordering equivalence ----------------------------------------------------------


def _single_growth_family(rng):
    act = str(rng.choice(["sigmoid", "tanh", "relu"]))
    p = int(rng.integers(1, 4))
    extra = [softmax("h", segment="B")] if rng.integers(2) else []
    if rng.integers(2):
        extra.append(scale("h", 1, 2, segment="B"))
    a_, a_act, b_, b_act, c_, c_act = abc_chain(act, p)
    layers = (a_, a_act, b_, b_act, *extra, c_, c_act)
    t = ArchTemplate(layers, p, variables=("h", "n"), depth_var="n")
    values = tuple(sorted(rng.choice(np.arange(1, 9), size=int(rng.integers(4, 9)), replace=False)))
    if rng.integers(2):
        growth, domains = "h", {"h": values, "n": (int(rng.integers(1, 4)),)}
    else:
        growth, domains = "n", {"h": (int(rng.integers(1, 6)),), "n": values}
    space = enumerate_space([ArchParamVar("h", "dimension", tuple(int(v) for v in domains["h"])),
                             ArchParamVar("n", "depth", tuple(int(v) for v in domains["n"]))], [])
    return t, space, growth


@pytest.mark.criterion(7)
def test_c07_ordering_equivalence(criterion):
    rng = np.random.default_rng(707)
    mismatches = weak_failures = 0
    for _ in range(50):
        t, space, growth = _single_growth_family(rng)
        weak_failures += not check_weak(t, [growth]).holds
        pp, ip = param_size_poly(t), surrogate_inference_poly(t)
        pts = [(evaluate(pp, a), evaluate(ip, a)) for a in space]
        by_p = sorted(range(len(pts)), key=lambda k: (pts[k][0], pts[k][1], k))
        by_i = sorted(range(len(pts)), key=lambda k: (pts[k][1], pts[k][0], k))
        mismatches += by_p != by_i
    ok = mismatches == 0 and weak_failures == 0
    criterion(ok, f"50 families, {weak_failures} not weak, {mismatches} permutation mismatches")
    assert ok


# -- 8. empirical ordering -----------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(8)
def test_c08_empirical_ordering(criterion):
    t, space = depth_family("relu", 4, range(1, 6), p=2)
    data = gen_data("blobs", 64, 2, 1.0, seed=0)
    c = check_ordering(t, space, data, HyperParams(data, 0.2), 500, 5, master_seed=0)
    criterion(c >= 0.8, f"depth 1..5 relu width 4, 5 seeds, s=500, concordance {c:.3f}")
    assert c >= 0.8


# -- 9. oracle agreements ----------------------------------------------------------------


def _tiny_template(p: int):
    layers = (dense(p, "h", bias=False), activation("tanh", "h"),
              dense("h", 1, bias=False), activation("sigmoid", 1))
    t = ArchTemplate(layers, p, variables=("h",))
    return t, enumerate_space([ArchParamVar("h", "dimension", (1, 2))], [])


def _direct_grid_answer(t, a, data, grid, k) -> bool:
    """Exhaustive grid search written against plain numpy, no package forward pass."""
    h = a["h"]
    p = t.input_dim
    for combo in itertools.product(grid, repeat=p * h + h):
        w1 = np.array(combo[:p * h]).reshape(h, p)
        w2 = np.array(combo[p * h:]).reshape(1, h)
        out = 1 / (1 + np.exp(-(np.tanh(data.X @ w1.T) @ w2.T)))[:, 0]
        if Fraction(int(np.count_nonzero((out >= 0.5).astype(int) != data.y)), len(data)) <= k:
            return True
    return False


def _oracle_agreements():
    rng = np.random.default_rng(909)
    fails = {"extract=exhaustive": 0, "shortest path": 0, "monotone": 0, "reduction": 0}

    for k in range(20):
        t, space = random_abc_template(rng)
        data = gen_data("blobs", 32, t.input_dim, 0.8, seed=k)
        thetas = [HyperParams(data, float(rng.choice([0.05, 0.2, 0.5])), shuffle_seed=j)
                  for j in range(int(rng.integers(1, 3)))]
        best = extract(t, data, space, thetas, 1, 60, master_seed=k).best
        idx, rec = exhaustive_opt(t, data, space, thetas, 60, master_seed=k)
        fails["extract=exhaustive"] += (best.xi_index, best.theta_index, best.w) != (idx, rec.theta_index, rec.w)

    for _ in range(50):
        t, space, _ = random_template(rng)
        pp, ip = param_size_poly(t), surrogate_inference_poly(t)
        costs = [evaluate(pp, a) + evaluate(ip, a) for a in space]
        direct = space.assignments[int(np.argmin(costs))]
        fails["shortest path"] += equal_error_shortest_path(t, space) != direct

    grid = WeightGrid((-1.0, 0.0, 1.0))
    for k in range(50):
        t, space = _tiny_template(int(rng.integers(1, 3)))
        data = gen_data("xor" if k % 2 and t.input_dim > 1 else "blobs", int(rng.integers(3, 7)), t.input_dim, 0.3, seed=k)
        tight = (float(rng.integers(2, 12)), float(rng.integers(20, 60)), float(rng.integers(0, 3)) / 4)
        loose = tuple(v + float(rng.integers(0, 10)) / (4 if j == 2 else 1) for j, v in enumerate(tight))
        a1 = brute_force_ose_dec(OseDecInstance(t, data, grid, space, [], *tight))
        a2 = brute_force_ose_dec(OseDecInstance(t, data, grid, space, [], *loose))
        fails["monotone"] += a1.yes and not a2.yes

    for k in range(20):
        t, space = _tiny_template(int(rng.integers(1, 3)))
        a = space.assignments[int(rng.integers(len(space)))]
        data = gen_data("xor" if t.input_dim > 1 else "linear", int(rng.integers(3, 7)),
                        t.input_dim, 0.3, seed=100 + k)
        thr = Fraction(int(rng.integers(0, 3)), 4)
        got = brute_force_ose_dec(reduce_nn_training(t, [a], data, grid, thr)).yes
        fails["reduction"] += got != _direct_grid_answer(t, a, data, grid.levels, thr)
    return fails


@pytest.mark.slow
@pytest.mark.criterion(9)
def test_c09_oracle_agreements(criterion):
    fails = _oracle_agreements()
    ok = not any(fails.values())
    criterion(ok, "20 extract/exhaustive, 50 shortest-path, 50 monotonicity, 20 reduction; failures "
                  + ", ".join(f"{k} {v}" for k, v in fails.items()))
    assert ok


# -- 10. runtime scaling ------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(10)
def test_c10_runtime_scaling(criterion):
    t, space = grid_family("relu", range(1, 17), range(1, 5))
    assert len(space) == 64
    data = gen_data("blobs", 64, 2, 0.8, seed=10)
    thetas = [HyperParams(data, 0.1), HyperParams(data, 0.05, shuffle_seed=1)]
    count_bad = 0
    for eps in range(1, 65):
        r = extract(t, data, space, thetas, eps, 5, master_seed=1)
        want = math.ceil(64 / eps) * 2
        count_bad += r.trained_count != want or expected_candidate_count(64, eps, 2) != want

    times = {}
    for eps in (1, 2, 4, 8, 16, 32, 64):
        best = math.inf
        for _ in range(5):
            start = time.perf_counter()
            extract(t, data, space, thetas[:1], eps, 2000, master_seed=1)
            best = min(best, time.perf_counter() - start)
        times[eps] = best
    pairs = list(zip(list(times)[:-1], list(times)[1:]))
    slow = [(a, b) for a, b in pairs if times[b] > 1.1 * times[a]]
    ok = count_bad == 0 and not slow
    shown = ", ".join(f"{e}:{times[e] * 1000:.1f}ms" for e in times)
    criterion(ok, f"count mismatches {count_bad} over eps 1..64; wall time {shown}")
    assert ok


# -- 11. determinism ---------------------------------------------------------------------


def _extract_cli(workdir, jobs: int, name: str):
    out = workdir / f"{name}.json"
    code = cli.main(["extract", "--config", str(workdir / "config.json"), "--jobs", str(jobs),
                     "--out", str(out)])
    assert code == 0
    report = read_report(out)
    report.pop("timestamp")
    bin_path, manifest_path = sidecar_paths(out)
    return report, bin_path.read_bytes(), manifest_path.read_bytes()


@pytest.mark.criterion(11)
def test_c11_determinism(criterion, tmp_path):
    save_dataset(gen_data("blobs", 80, 2, 0.7, seed=11), tmp_path / "data.csv")
    template, _ = grid_family("tanh", (2, 3, 4), (1, 2, 3))
    config = {
        "template": {**template.to_dict(),
                     "variables": [{"name": "h", "role": "dimension", "domain": [2, 3, 4]},
                                   {"name": "n", "role": "depth", "domain": [1, 2, 3]}]},
        "dataset": "data.csv",
        "thetas": [{"eta": 0.3, "batch_size": 48, "batch_seed": 0}, {"eta": 0.1, "shuffle_seed": 5}],
        "epsilon": 2, "steps": 300, "seed": 42,
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    # Identical config includes the output path, so each repeat overwrites the same files.
    runs = {jobs: [_extract_cli(tmp_path, jobs, f"jobs{jobs}") for _ in range(2)] for jobs in (1, 4)}
    same = {jobs: runs[jobs][0] == runs[jobs][1] for jobs in runs}
    # Across parallelism degrees only the echoed config (jobs, out) and its hash may differ.
    strip = lambda r: {k: v for k, v in r[0].items() if k not in ("config", "config_hash")}
    cross = strip(runs[1][0]) == strip(runs[4][0]) and runs[1][0][1:] == runs[4][0][1:]
    ok = all(same.values()) and cross
    criterion(ok, f"jobs=1 repeat identical {same[1]}, jobs=4 repeat identical {same[4]}, "
                  f"jobs 1 vs 4 identical outside the config echo {cross}")
    assert ok
