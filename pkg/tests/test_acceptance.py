"""Acceptance suite: one test per release criterion.

Each test prints a single pass/fail line (run with ``pytest -v -s
tests/test_acceptance.py`` to see them live). Expected values come from
independent oracles implemented inline: closed-form weighted averages,
explicit normal equations, central finite differences, and a hand-rolled
reference integrator.
"""
import json
import time

import numpy as np
import pytest

from belpm.cli import main as cli_main
from belpm.harness import (
    compare_structures,
    make_henon_spec,
    make_lorenz_spec,
    mse,
    nmse,
    run_experiment,
)
from belpm.kernels import Kernel
from belpm.learning import (
    batch_responses,
    build_neighbor_cache,
    loss_gradients,
    lse_fit_w,
    lse_fit_wa,
    lse_fit_wo,
)
from belpm.network import (
    BelpmModel,
    belpm_predict,
    bl_forward,
    compute_expected_punishments,
    mo_forward,
)
from belpm.series import EmbeddedDataset, HenonParams, LorenzParams, generate_henon, generate_lorenz
from belpm.wknn import wknn_predict


def _report(number, ok, detail):
    print(f"[acceptance {number:02d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {number}: {detail}"


def _random_model(rng, n, k_a, k_o, kernel):
    inputs = rng.normal(size=(n, 3))
    ds = EmbeddedDataset(inputs=inputs, targets=rng.normal(size=n), dim=3, lag=1, horizon=1)
    model = BelpmModel.initialize(ds, k_a=k_a, k_o=k_o, kernel=kernel,
                                  b_a=rng.uniform(0.2, 1.5, size=k_a),
                                  b_o=rng.uniform(0.2, 1.5, size=k_o))
    model.w = rng.normal(size=3)
    model.w_a = rng.normal(size=3)
    model.w_o = rng.normal(size=2)
    compute_expected_punishments(model)
    return model


def _loss_a(model):
    mem = model.memory
    total = 0.0
    for j in range(len(mem)):
        r_a, _ = bl_forward(mem.s_u[j], mem.th_u[j], model, exclude=j)
        p = model.w_a[0] * mem.r_u[j] + model.w_a[1] * r_a + model.w_a[2]
        total += 0.5 * p * p
    return total


def _loss_o(model):
    mem = model.memory
    total = 0.0
    for j in range(len(mem)):
        r_o, _ = mo_forward(mem.s_u[j], model, exclude=j)
        p = model.w_o[0] * r_o + model.w_o[1]
        total += 0.5 * p * p
    return total


def _fd(model, attr, loss, delta=1e-6):
    base = getattr(model, attr).copy()
    grad = np.empty_like(base)
    for m in range(len(base)):
        for sign, slot in ((+1, 0), (-1, 1)):
            probe = base.copy()
            probe[m] += sign * delta
            setattr(model, attr, probe)
            if slot == 0:
                up = loss(model)
            else:
                down = loss(model)
        grad[m] = (up - down) / (2 * delta)
    setattr(model, attr, base)
    return grad


def test_criterion_01_gradient_suite():
    """Analytic kernel-parameter gradients match central finite differences."""
    start = time.perf_counter()
    worst = 0.0
    for kernel in (Kernel("exponential"), Kernel("rational", z=1.0)):
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            n = int(rng.integers(10, 21))
            k_a = int(rng.integers(2, 5))
            k_o = int(rng.integers(2, 5))
            model = _random_model(rng, n, k_a, k_o, kernel)
            ev = batch_responses(model, build_neighbor_cache(model))
            g_a, g_o = loss_gradients(model, ev)
            fd_a = _fd(model, "b_a", _loss_a)
            fd_o = _fd(model, "b_o", _loss_o)
            rel_a = np.linalg.norm(g_a - fd_a) / max(np.linalg.norm(fd_a), 1e-10)
            rel_o = np.linalg.norm(g_o - fd_o) / max(np.linalg.norm(fd_o), 1e-10)
            worst = max(worst, rel_a, rel_o)
    elapsed = time.perf_counter() - start
    _report(1, worst < 1e-4 and elapsed < 30.0,
            f"gradients vs finite differences over 100 random models: worst "
            f"relative error {worst:.2e} (< 1e-4), {elapsed:.1f}s (< 30s)")


def test_criterion_02_oracle_equivalence():
    """Layered forward equals a closed-form weighted average; with primary-only
    weights and constant max/min features the network is plain weighted kNN."""
    rng = np.random.default_rng(7)
    inputs = rng.normal(size=(40, 3))
    targets = rng.normal(size=40)
    ds = EmbeddedDataset(inputs=inputs, targets=targets, dim=3, lag=1, horizon=1)
    b_a = rng.uniform(0.3, 1.4, size=4)
    model = BelpmModel.initialize(ds, k_a=4, k_o=4, kernel=Kernel("exponential"), b_a=b_a)
    th_u = np.stack([inputs.max(axis=1), inputs.min(axis=1)], axis=1)
    worst_layered = 0.0
    for _ in range(1000):
        q = rng.normal(size=3)
        th_q = np.array([q.max(), q.min()])
        r_a, _ = bl_forward(q, th_q, model)
        d = np.linalg.norm(inputs - q, axis=1) + np.linalg.norm(th_u - th_q, axis=1)
        order = np.argsort(d, kind="stable")[:4]
        w = np.exp(-d[order] * b_a)
        closed_form = float(np.dot(w, targets[order]) / w.sum())
        worst_layered = max(worst_layered, abs(r_a - closed_form))

    # constant max/min: inputs of the form [1, u, 0] share thalamus features
    u = rng.uniform(0.05, 0.95, size=30)
    flat_inputs = np.stack([np.ones(30), u, np.zeros(30)], axis=1)
    flat_targets = rng.normal(size=30)
    flat_ds = EmbeddedDataset(inputs=flat_inputs, targets=flat_targets,
                              dim=3, lag=1, horizon=1)
    b = rng.uniform(0.4, 1.2, size=4)
    flat_model = BelpmModel.initialize(flat_ds, k_a=4, k_o=4,
                                       kernel=Kernel("exponential"), b_a=b.copy())
    compute_expected_punishments(flat_model)
    flat_model.w = np.array([1.0, 0.0, 0.0])
    worst_vs_wknn = 0.0
    for _ in range(50):
        q = np.array([1.0, rng.uniform(0.05, 0.95), 0.0])
        r, _ = belpm_predict(q, flat_model)
        baseline = wknn_predict(q, flat_ds, 4, Kernel("exponential"), b)
        worst_vs_wknn = max(worst_vs_wknn, abs(r - baseline))
    _report(2, worst_layered <= 1e-12 and worst_vs_wknn <= 1e-9,
            f"layered vs closed form {worst_layered:.2e} (<= 1e-12); primary-only vs "
            f"weighted kNN {worst_vs_wknn:.2e} (<= 1e-9)")


def test_criterion_03_lse_suite():
    """Every least-squares fit satisfies the normal-equations certificate and
    matches an explicit (A^T A)^-1 A^T y oracle."""
    rng = np.random.default_rng(11)
    worst_orth = 0.0
    worst_match = 0.0
    for i in range(50):
        n = int(rng.integers(10, 40))
        c1, c2, y = rng.normal(size=(3, n))
        if i % 3 == 0:
            coef, _ = lse_fit_w(c1, c2, y)
            design = np.column_stack([c1, c2, np.ones(n)])
        elif i % 3 == 1:
            coef, _ = lse_fit_wa(c1, c2, y)
            design = np.column_stack([c1, c2, np.ones(n)])
        else:
            coef, _ = lse_fit_wo(c1, y)
            design = np.column_stack([c1, np.ones(n)])
        oracle = np.linalg.inv(design.T @ design) @ design.T @ y
        worst_match = max(worst_match, np.max(np.abs(coef - oracle)))
        worst_orth = max(worst_orth, np.max(np.abs(design.T @ (design @ coef - y))))
    _report(3, worst_match <= 1e-8 and worst_orth <= 1e-8,
            f"50 random systems: oracle mismatch {worst_match:.2e}, residual "
            f"orthogonality {worst_orth:.2e} (both <= 1e-8)")


def test_criterion_04_metric_and_generator_anchors():
    """Metric fixed points, exact Henon prefix, 4th-order integrator behavior."""
    y = np.array([0.3, -1.2, 2.4, 0.9, -0.5])
    perfect = nmse(y.copy(), y) == 0.0 and mse(y.copy(), y) == 0.0
    mean_pred = nmse(np.full(5, y.mean()), y) == 1.0

    henon = generate_henon(HenonParams(), n=4).values
    henon_ok = (henon[0] == 0.0 and henon[1] == 1.0
                and abs(henon[2] - (-0.4)) < 1e-15 and abs(henon[3] - 1.076) < 1e-15)

    def reference(state, dt, steps, substeps):
        def deriv(s):
            x, yy, z = s
            return np.array([10.0 * (yy - x), 28.0 * x - yy - x * z,
                             x * yy - (8.0 / 3.0) * z])
        s = np.asarray(state, dtype=float)
        out = [s[0]]
        h = dt / substeps
        for _ in range(steps):
            for _ in range(substeps):
                k1 = deriv(s)
                k2 = deriv(s + 0.5 * h * k1)
                k3 = deriv(s + 0.5 * h * k2)
                k4 = deriv(s + h * k3)
                s = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            out.append(s[0])
        return np.array(out)

    def max_err(dt):
        n = int(round(1.0 / dt))
        coarse = generate_lorenz(LorenzParams(), dt=dt, n=n + 1).values
        return np.max(np.abs(coarse - reference((-15, 0, 0), dt, n, 100)))

    factor = max_err(0.02) / max_err(0.01)
    _report(4, perfect and mean_pred and henon_ok and factor >= 8.0,
            f"nmse(perfect)=0 and nmse(mean)=1 exactly; Henon prefix exact; "
            f"dt-halving error factor {factor:.1f} (>= 8)")


def test_criterion_05_lorenz_directional():
    """Long-horizon Lorenz: trained model within 1.1x of same-k weighted kNN."""
    start = time.perf_counter()
    report = run_experiment(make_lorenz_spec())
    elapsed = time.perf_counter() - start
    row = report.results[0]
    assert row.error is None, row.error
    belpm, wknn = row.belpm["nmse"], row.wknn["nmse"]
    ok = (belpm <= 1.1 * wknn and 0.02 <= belpm <= 1.0 and 0.02 <= wknn <= 1.0
          and elapsed < 60.0)
    _report(5, ok, f"lorenz 500/1400 h30: belpm {belpm:.4f} vs wknn {wknn:.4f} "
                   f"(ratio {belpm / wknn:.3f} <= 1.1), both in [0.02, 1.0], "
                   f"{elapsed:.1f}s (< 60s)")


def test_criterion_06_henon_short_horizon():
    """Henon three-step: model under 0.05 and ahead of the baseline."""
    start = time.perf_counter()
    report = run_experiment(make_henon_spec())
    elapsed = time.perf_counter() - start
    row = report.results[0]
    assert row.error is None, row.error
    belpm, wknn = row.belpm["nmse"], row.wknn["nmse"]
    _report(6, belpm <= 0.05 and belpm < wknn and elapsed < 60.0,
            f"henon 800/100 h3: belpm {belpm:.5f} (<= 0.05) < wknn {wknn:.5f}, "
            f"{elapsed:.1f}s (< 60s)")


def test_criterion_07_second_phase_benefit():
    """Online adaptation never hurts: SLP within 1e-3 of FLP on noisy data."""
    pairs = []
    for seed in range(5):
        spec = make_henon_spec(horizon=1, noise_std=0.1, seed=seed, phase2_epochs=10)
        row = run_experiment(spec).results[0]
        assert row.error is None, row.error
        pairs.append((row.belpm_slp["nmse"], row.belpm["nmse"]))
    ok = all(slp <= flp + 1e-3 for slp, flp in pairs)
    detail = ", ".join(f"seed{i}: slp {s:.4f} vs flp {f:.4f}" for i, (s, f) in enumerate(pairs))
    _report(7, ok, f"noisy henon h1 over 5 seeds: {detail}")


def test_criterion_08_learning_curve_descent():
    """Phase-1 amygdala loss is non-increasing in at least 80% of epochs."""
    drops = total = 0
    for seed in range(5):
        spec = make_henon_spec(horizon=2, noise_std=0.1, seed=seed)
        row = run_experiment(spec).results[0]
        assert row.error is None, row.error
        la = row.history.loss_a
        drops += sum(1 for i in range(1, len(la)) if la[i] <= la[i - 1] + 1e-12)
        total += len(la) - 1
    fraction = drops / total
    _report(8, fraction >= 0.8,
            f"noisy henon h2, 5 seeds: loss_a non-increasing in {drops}/{total} "
            f"epoch steps ({fraction:.0%} >= 80%)")


def test_criterion_09_structure_insensitivity():
    """Neighbor-count changes leave the Henon error within a 50% band."""
    rows = compare_structures(make_henon_spec(), [3, 5, 7])
    assert all(r["error"] is None for r in rows)
    values = [r["results"][0]["belpm"]["nmse"] for r in rows]
    spread = (max(values) - min(values)) / min(values)
    _report(9, spread <= 0.5,
            f"henon h3, k_a in (3,5,7), k_o=2k_a: nmse "
            f"{', '.join(f'{v:.5f}' for v in values)}; spread {spread:.0%} (<= 50%)")


def test_criterion_10_benchmark_determinism(tmp_path):
    """The same spec and seed produce byte-identical report documents."""
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "system": "henon", "n_samples": 260, "discard": 100, "noise_std": 0.05,
        "seed": 13, "split": {"train": 180, "test": 60, "val": 10},
        "horizons": [1, 2],
        "model": {"k_a": 3, "k_o": 6, "train": {"epochs": 5, "phase2_epochs": 2}},
        "baseline": {"enabled": True, "k": 3},
    }))
    outs = []
    for name in ("run1", "run2"):
        outdir = tmp_path / name
        assert cli_main(["benchmark", "--spec", str(spec_path), "--out", str(outdir)]) == 0
        outs.append((outdir / "report.json").read_bytes())
    _report(10, outs[0] == outs[1],
            f"two CLI benchmark runs: report.json byte-identical "
            f"({len(outs[0])} bytes)")
