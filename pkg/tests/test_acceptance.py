"""Acceptance gate: eleven numbered end-to-end checks.

Each check prints exactly one ``criterion N: PASS/FAIL`` line (visible even
under ``-q``) and then asserts. Budgeted runtimes are asserted where stated.
The full file is long-running; criterion 10 alone is a ~20 minute
500-replicate fitting experiment.
"""

import json
import time

import numpy as np
import pytest

from conftest import fd_gradient, fd_jacobian, random_theta
from hmmfisher import cli, ergodicity, fisher, inference, sensitivity, stationary
from hmmfisher.errors import EstimationError
from hmmfisher.estimation import normality_experiment, simulate_stationary_batch


def announce(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
    if not ok:
        pytest.fail(f"criterion {number}: {detail}")


def test_criterion_01_likelihood_oracle(m1, m2, m3, capsys):
    t0 = time.time()
    gen = np.random.default_rng(1)
    models = (m1, m2, m3)
    worst = 0.0
    for i in range(50):
        hmm = models[i % 3]
        theta = random_theta(hmm, gen)
        n = int(gen.integers(1, 9))
        y = gen.choice(np.asarray(hmm.emission_alphabet), size=n)
        a = inference.stationary_loglik(hmm, y, theta=theta)
        b = inference.brute_force_loglik(hmm, y, theta=theta)
        worst = max(worst, abs(a - b))
    elapsed = time.time() - t0
    ok = worst <= 1e-12 and elapsed < 10.0
    announce(capsys, 1, ok,
             f"filter vs path enumeration, max |diff| {worst:.2e} over 50 "
             f"instances ({elapsed:.1f}s)")


def test_criterion_02_derivative_exactness(m1, m2, m3, m4, capsys):
    t0 = time.time()
    worst_score = worst_hess = worst_fi = 0.0
    for mi, hmm in enumerate((m1, m2, m3, m4)):
        gen = np.random.default_rng(100 + mi)
        finite = hmm.emission_alphabet is not None
        for _ in range(100):
            theta = random_theta(hmm, gen, margin=0.1)
            n = int(gen.integers(2, 8))
            if finite:
                y = gen.choice(np.asarray(hmm.emission_alphabet), size=n)
            else:
                y = gen.normal(0.5, 1.5, size=n)
            res = sensitivity.score_hessian_stationary(hmm, y, theta=theta)
            fd_s = fd_gradient(
                lambda t: inference.stationary_loglik(hmm, y, theta=t), theta)
            scale_s = np.maximum(1.0, np.abs(res.score))
            worst_score = max(worst_score,
                              float(np.max(np.abs(res.score - fd_s) / scale_s)))
            fd_h = fd_jacobian(
                lambda t: sensitivity.score_stationary(hmm, y, theta=t)[1],
                theta)
            scale_h = np.maximum(1.0, np.abs(res.hessian))
            worst_hess = max(worst_hess,
                             float(np.max(np.abs(res.hessian - fd_h) / scale_h)))
            fi = sensitivity.score_fisher_identity(hmm, y, theta=theta)
            worst_fi = max(worst_fi,
                           float(np.max(np.abs(fi - res.score) / scale_s)))
    elapsed = time.time() - t0
    ok = (worst_score <= 1e-6 and worst_hess <= 1e-4 and worst_fi <= 1e-8
          and elapsed < 60.0)
    announce(capsys, 2, ok,
             f"score FD rel {worst_score:.2e} (<=1e-6), hessian FD rel "
             f"{worst_hess:.2e} (<=1e-4), identity-route score rel "
             f"{worst_fi:.2e} (<=1e-8), 100 instances per model "
             f"({elapsed:.1f}s)")


def test_criterion_03_first_and_second_moment_identities(m1, capsys):
    worst_mean = worst_forms = 0.0
    for n in range(1, 6):
        est = fisher.info_exact(m1, n)
        worst_mean = max(worst_mean, float(np.max(np.abs(est.expected_score))))
        worst_forms = max(worst_forms,
                          float(np.max(np.abs(est.matrix - est.outer))))
    ok = worst_mean <= 1e-10 and worst_forms <= 1e-9
    announce(capsys, 3, ok,
             f"exact enumeration n<=5: max |E[score]| {worst_mean:.2e} "
             f"(<=1e-10), hessian vs outer-product form gap {worst_forms:.2e} "
             f"(<=1e-9)")


def test_criterion_04_stationary_calculus(m1, m2, m3, m4, capsys):
    gen = np.random.default_rng(4)
    worst_fp = 0.0
    for hmm in (m1, m2, m3, m4):
        for _ in range(5):
            Q = hmm.transition(random_theta(hmm, gen))
            pi = stationary.stationary_distribution(Q)
            worst_fp = max(worst_fp, float(np.max(np.abs(pi @ Q - pi))))

    worst_grad = worst_hess = worst_series = 0.0
    for hmm in (m1, m2, m3, m4):
        for _ in range(3):
            theta = random_theta(hmm, gen, margin=0.1)
            grad = stationary.grad_stationary(hmm, theta)
            fd_g = fd_jacobian(
                lambda t: stationary.stationary_distribution(hmm.transition(t)),
                theta).T
            worst_grad = max(worst_grad, float(np.max(np.abs(grad - fd_g))))
            hess = stationary.hess_stationary(hmm, theta)
            fd_h = np.moveaxis(
                fd_jacobian(lambda t: stationary.grad_stationary(hmm, t), theta),
                2, 1)
            worst_hess = max(worst_hess, float(np.max(np.abs(hess - fd_h))))
            series = stationary.grad_stationary_series(hmm, theta)
            worst_series = max(worst_series,
                               float(np.max(np.abs(series - grad))))

    worst_ident = 0.0
    for _ in range(10):
        theta_alt = random_theta(m1, gen)
        f = gen.uniform(-1.0, 1.0, m1.state_count)
        worst_ident = max(worst_ident,
                          stationary.verify_difference_identity(
                              m1, theta_alt, f)["gap"])

    static = ergodicity.static_bounds_check(m1, trials=200, seed=4)
    poisson = next(r for r in static if r.bound_name == "poisson-sup")

    ok = (worst_fp <= 1e-12 and worst_grad <= 1e-6 and worst_hess <= 1e-4
          and worst_series <= 1e-9 and worst_ident <= 1e-12 and poisson.passed)
    announce(capsys, 4, ok,
             f"fixed-point residual {worst_fp:.2e} (<=1e-12), grad FD "
             f"{worst_grad:.2e} (<=1e-6), hess FD {worst_hess:.2e} (<=1e-4), "
             f"two-route grad gap {worst_series:.2e} (<=1e-9), difference "
             f"identity {worst_ident:.2e} (<=1e-12), solution sup bound "
             f"violation {poisson.max_violation:.2e} over 200 f")


def test_criterion_05_forgetting_bound_suite(m1, capsys):
    t0 = time.time()
    windows = simulate_stationary_batch(m1, 25, 5, first_replicate=0,
                                        count=20, key_prefix=(101,))
    worst = -np.inf
    all_passed = True
    for w in windows:
        post = ergodicity.posterior_forgetting_check(m1, w, k_max=20)
        lik = ergodicity.likelihood_forgetting_check(m1, w, k_max=15)
        worst = max(worst, post.max_violation, lik.max_violation)
        all_passed &= post.passed and lik.passed
    static = ergodicity.static_bounds_check(m1, trials=200, seed=9)
    ratio = next(r for r in static if r.bound_name == "start-likelihood-ratio")
    gradf = next(r for r in static
                 if r.bound_name == "stationary-gradient-functional")
    worst = max(worst, ratio.max_violation, gradf.max_violation)
    all_passed &= ratio.passed and gradf.passed
    elapsed = time.time() - t0
    ok = all_passed and worst <= 1e-12 and elapsed < 120.0
    announce(capsys, 5, ok,
             f"posterior TV k<=20 and start-likelihood k<=15 on 20 windows, "
             f"ratio and gradient-functional bounds on 200 trials: max "
             f"violation {worst:.2e} (<=1e-12) ({elapsed:.1f}s)")


def test_criterion_06_conditional_information_convergence(m1, capsys):
    t0 = time.time()
    sweep = fisher.proposition1_sweep(
        m1, n=2, k_grid=(1, 2, 4, 8, 16, 32), m_grid=(0, 5, 20),
        replicates=50_000, seed=0, workers=1)
    elapsed = time.time() - t0
    ok = (sweep.monotone_ok and sweep.fitted_rate < 1.0 and sweep.terminal_ok
          and elapsed < 900.0)
    announce(capsys, 6, ok,
             f"max-over-m gap non-increasing={sweep.monotone_ok}, fitted rate "
             f"{sweep.fitted_rate:.4f} (<1), terminal gap within 3 stderr="
             f"{sweep.terminal_ok}, R=50000 ({elapsed:.0f}s)")


def test_criterion_07_singular_models(m2, m3, capsys):
    cases = (
        ("M2", m2, [np.array([0.0, 0.0, 1.0, -1.0]) / np.sqrt(2.0)]),
        ("M3-point", m3, [np.array([1.0, 0.0, 0.0, 0.0]),
                          np.array([0.0, 1.0, 0.0, 0.0])]),
    )
    all_singular = True
    worst_exact = 0.0
    worst_mc = -np.inf
    for _, hmm, directions in cases:
        for n in range(1, 7):
            est = fisher.info_exact(hmm, n)
            report = fisher.singularity_test(est)
            all_singular &= report.singular
            for v in directions:
                worst_exact = max(worst_exact, abs(float(v @ est.matrix @ v)))
        asym = fisher.info_asymptotic(hmm, seed=3, horizon=50_000)
        for v in directions:
            quad = abs(float(v @ asym.matrix @ v))
            se = fisher.projected_stderr(asym, v)
            worst_mc = max(worst_mc, quad - (3.0 * se + 1e-12))
    ok = all_singular and worst_exact <= 1e-12 and worst_mc <= 0.0
    announce(capsys, 7, ok,
             f"both models singular at every n<=6 (exact), null-direction "
             f"quadratic forms {worst_exact:.2e} (<=1e-12), asymptotic "
             f"quadratic forms within 3 MC stderr (worst margin "
             f"{worst_mc:.2e})")


def test_criterion_08_nonsingular_scan(m1, capsys):
    scan = fisher.equivalence_scan(m1, n_max=6, seed=11,
                                   asymptotic_horizon=1_000_000)
    n_star = scan.first_nonsingular
    if n_star is None:
        announce(capsys, 8, False, "no nonsingular horizon found up to n=6")
        return
    at_star = scan.reports[n_star - 1]
    cert = fisher.lambda_min_certificate(scan.asymptotic_info)
    ok = (n_star <= 6 and at_star.eigenvalues[0] > at_star.threshold
          and cert["certified"] and scan.consistent)
    announce(capsys, 8, ok,
             f"first nonsingular horizon n*={n_star}, lambda_min "
             f"{at_star.eigenvalues[0]:.3e} > threshold "
             f"{at_star.threshold:.1e}, asymptotic lambda_min "
             f"{cert['lambda_min']:.3e} > 3 stderr {3 * cert['stderr']:.3e}, "
             f"verdicts consistent={scan.consistent}")


def test_criterion_09_route_agreement(m1, capsys):
    t0 = time.time()
    a = fisher.info_asymptotic(m1, route="horizon-average", seed=7,
                               horizon=100_000)
    b = fisher.info_asymptotic(m1, route="conditional-limit", seed=7,
                               window=200, replicates=20_000)
    diff = np.abs(a.matrix - b.matrix)
    combined = 3.0 * np.sqrt(a.stderr ** 2 + b.stderr ** 2)
    ratio = float(np.max(diff / combined))
    elapsed = time.time() - t0
    ok = bool(np.all(diff <= combined)) and elapsed < 600.0
    announce(capsys, 9, ok,
             f"horizon-average vs conditional-limit componentwise within 3 "
             f"combined stderr, worst ratio {ratio:.3f} (<=1) ({elapsed:.0f}s)")


def test_criterion_10_asymptotic_normality(m1, capsys):
    t0 = time.time()
    try:
        report = normality_experiment(m1, n=2000, replicates=500, seed=21,
                                      workers=1)
    except EstimationError as exc:
        elapsed = time.time() - t0
        announce(capsys, 10, False, f"({elapsed:.0f}s) {exc}")
        return
    elapsed = time.time() - t0
    cov_ok = bool(np.all(report.coverage >= 0.91)
                  and np.all(report.coverage <= 0.985))
    ok = (report.frobenius_rel_error <= 0.15 and cov_ok
          and report.excluded_fraction <= 0.02 and elapsed < 1800.0)
    announce(capsys, 10, ok,
             f"frobenius rel error {report.frobenius_rel_error:.3f} (<=0.15), "
             f"coverage {np.round(report.coverage, 3).tolist()} (in "
             f"[0.91,0.985]), excluded {report.excluded_fraction:.1%} (<=2%) "
             f"({elapsed:.0f}s)")


def test_criterion_11_determinism(tmp_path, capsys):
    runs = (
        ("fisher", {"model": {"name": "M1"},
                    "fisher": {"estimator": "monte-carlo", "n_max": 2,
                               "mc_replicates": 3000,
                               "asymptotic_horizon": 5000}}, 12),
        ("prop1", {"model": {"name": "M1"},
                   "prop1": {"n": 1, "k_grid": [1, 2], "m_grid": [0],
                             "replicates": 2000}}, 6),
        ("forgetting", {"model": {"name": "M1"},
                        "forgetting": {"windows": 3, "window_length": 12,
                                       "k_max": 8, "trials": 10}}, 8),
        ("mle", {"model": {"name": "M4"},
                 "mle": {"n": 600, "replicates": 3}}, 29),
    )
    mismatched = []
    for command, doc, seed in runs:
        digests = set()
        for workers in ("1", "4"):
            out = tmp_path / f"{command}_w{workers}"
            out.mkdir()
            cfg = out / "config.json"
            cfg.write_text(json.dumps(doc))
            code = cli.main([command, "--config", str(cfg), "--out", str(out),
                             "--seed", str(seed), "--workers", workers])
            assert code == 0, f"{command} with workers={workers} exited {code}"
            payload = json.loads((out / f"{command}_report.json").read_text())
            digests.add(payload["payload_sha256"])
        if len(digests) != 1:
            mismatched.append(command)
    ok = not mismatched
    announce(capsys, 11, ok,
             "payload digests byte-identical across --workers {1,4} for "
             "fisher, prop1, forgetting, mle"
             + (f"; mismatches: {mismatched}" if mismatched else ""))
