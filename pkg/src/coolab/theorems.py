"""Monte-Carlo and grid-search verification suites for the risk closed forms.

Each ``check_*`` function runs one suite and returns a plain dict with a
``passed`` flag and the observed numeric gaps, so the CLI can serialize the
whole report as JSON.  The suites compare closed-form optima against
brute-force minimizers and directly-measured risks; they never reuse the
formula under test as its own oracle.
"""

from __future__ import annotations

import numpy as np

from .riskmath import (
    RiskMatrix,
    cooperation_risk,
    cross_risk,
    empirical_risk,
    grid_min_dual,
    one_hot,
    optimal_lambda_dual,
    optimal_lambda_multi,
    simplex_grid_min,
    symmetric_min_risk,
)

__all__ = [
    "make_mc_predictors",
    "random_risk_like_matrix",
    "check_dual_closed_form",
    "check_dual_empirical",
    "check_multi_closed_form",
    "check_equicorrelated",
    "run_all_checks",
]


def make_mc_predictors(rng: np.random.Generator, num_samples: int, c: int,
                       wrong_rates, softness: float = 0.2,
                       correlation: float = 0.0):
    """Simulate mostly-correct classifiers over random one-hot truths.

    Each classifier errs independently on a ``wrong_rates[i]`` fraction of
    samples; an erring prediction is a softened spike on a random wrong
    class, a correct one a softened spike on the truth.  ``correlation``
    is the probability that all classifiers share one corruption event
    (same wrong class) on a sample, raising their cross-risk.

    Returns (truths_one_hot, [pred_stack_i ...]) with every row a valid
    distribution.
    """
    labels = rng.integers(0, c, size=num_samples)
    truths = one_hot(labels, c)
    shared = rng.random(num_samples) < correlation
    shared_wrong = (labels + rng.integers(1, c, size=num_samples)) % c
    shared_err = rng.random(num_samples)
    preds = []
    for rate in wrong_rates:
        own_err = rng.random(num_samples)
        wrong = np.where(shared, shared_err < rate, own_err < rate)
        own_wrong = (labels + rng.integers(1, c, size=num_samples)) % c
        spike_class = np.where(shared & wrong, shared_wrong, own_wrong)
        spike_class = np.where(wrong, spike_class, labels)
        fuzz = rng.dirichlet(np.ones(c), size=num_samples)
        preds.append((1.0 - softness) * one_hot(spike_class, c)
                     + softness * fuzz)
    return truths, preds


def check_dual_closed_form(trials: int = 200, seed: int = 0,
                           grid_step: float = 1e-5,
                           tol: float = 1e-6) -> dict:
    """Closed-form two-classifier optimum vs exhaustive 1-D grid search."""
    rng = np.random.default_rng(seed)
    max_gap = 0.0
    max_lambda_gap = 0.0
    beats_both = True
    for _ in range(trials):
        r1, r2 = rng.uniform(0.05, 1.5, size=2)
        r12 = rng.uniform(0.0, 0.999 * min(r1, r2))
        sol = optimal_lambda_dual(r1, r2, r12)
        ref = grid_min_dual(r1, r2, r12, step=grid_step)
        max_gap = max(max_gap, abs(sol.min_risk - ref.min_risk))
        max_lambda_gap = max(max_lambda_gap, abs(sol.lambda_star - ref.lambda_star))
        beats_both = beats_both and sol.min_risk < min(r1, r2)
    return {
        "name": "dual_closed_form_vs_grid",
        "passed": bool(max_gap <= tol and beats_both),
        "trials": trials,
        "grid_step": grid_step,
        "tolerance": tol,
        "max_risk_gap": max_gap,
        "max_lambda_gap": max_lambda_gap,
        "always_below_individual": beats_both,
    }


def check_dual_empirical(num_samples: int = 10_000, c: int = 10,
                         seed: int = 0, correlation: float = 0.0,
                         identity_tol: float = 1e-10,
                         lambda_tol: float = 0.02) -> dict:
    """Measured combination risk vs the quadratic decomposition identity.

    Draws one Monte-Carlo predictor pair, checks that the directly-measured
    risk of the per-sample combination matches l^2 r1 + 2l(1-l) r12 +
    (1-l)^2 r2 at eleven weights, and that the measured-risk minimizer on a
    0.01 grid lands near the closed-form optimum.
    """
    rng = np.random.default_rng(seed)
    truths, (p1, p2) = make_mc_predictors(
        rng, num_samples, c, wrong_rates=(0.3, 0.45), correlation=correlation)
    r1 = empirical_risk(p1, truths)
    r2 = empirical_risk(p2, truths)
    r12 = cross_risk(p1, p2, truths)
    max_identity_gap = 0.0
    for lam in np.linspace(0.0, 1.0, 11):
        measured = empirical_risk(lam * p1 + (1 - lam) * p2, truths)
        quadratic = (lam ** 2 * r1 + 2 * lam * (1 - lam) * r12
                     + (1 - lam) ** 2 * r2)
        max_identity_gap = max(max_identity_gap, abs(measured - quadratic))
    grid = np.linspace(0.0, 1.0, 101)
    measured_risks = [empirical_risk(lam * p1 + (1 - lam) * p2, truths)
                      for lam in grid]
    measured_argmin = float(grid[int(np.argmin(measured_risks))])
    sol = optimal_lambda_dual(r1, r2, r12)
    lambda_gap = abs(measured_argmin - sol.lambda_star)
    return {
        "name": "dual_decomposition_identity",
        "passed": bool(max_identity_gap <= identity_tol
                       and lambda_gap <= lambda_tol),
        "num_samples": num_samples,
        "classes": c,
        "correlation": correlation,
        "risks": {"r1": r1, "r2": r2, "r12": r12},
        "eq2_precondition_holds": bool(0.0 <= r12 < min(r1, r2)),
        "max_identity_gap": max_identity_gap,
        "identity_tolerance": identity_tol,
        "closed_form_lambda": sol.lambda_star,
        "measured_argmin_lambda": measured_argmin,
        "lambda_gap": lambda_gap,
        "lambda_tolerance": lambda_tol,
    }


def random_risk_like_matrix(rng: np.random.Generator, n: int,
                            max_draws: int = 1000) -> tuple[RiskMatrix, int]:
    """Draw a random diagonally-dominant risk-style matrix.

    Diagonals sit in a tight band and off-diagonals in a low band, the
    regime of same-settings classifiers.  Draws whose sum-one optimum
    leaves the simplex are rejected (a simplex grid search cannot attain
    the affine optimum there, and a distribution-valued supervision needs
    non-negative weights); returns the matrix and the rejection count.
    """
    if n == 1:
        return RiskMatrix(rng.uniform(0.3, 0.7, size=(1, 1))), 0
    rejected = 0
    for _ in range(max_draws):
        diag = rng.uniform(0.4, 0.55, size=n)
        off = rng.uniform(0.02, 0.8 * diag.min() / (n - 1), size=(n, n))
        entries = (off + off.T) / 2.0
        entries[np.diag_indices(n)] = diag
        r = RiskMatrix(entries)
        if optimal_lambda_multi(r).weights.min() >= 0.01:
            return r, rejected
        rejected += 1
    raise RuntimeError("could not draw an interior-optimum risk matrix")


def check_multi_closed_form(n_values=(2, 3, 4, 5), trials: int = 50,
                            resolution: float = 1e-3, seed: int = 0,
                            tol: float = 2e-3) -> dict:
    """Lagrange closed form vs simplex grid search for several ensemble sizes."""
    rng = np.random.default_rng(seed)
    per_n = {}
    passed = True
    for n in n_values:
        max_gap = 0.0
        max_sum_err = 0.0
        max_selfcheck = 0.0
        rejected = 0
        for _ in range(trials):
            R, rej = random_risk_like_matrix(rng, n)
            rejected += rej
            sol = optimal_lambda_multi(R)
            ref = simplex_grid_min(R.entries, resolution=resolution)
            max_gap = max(max_gap, abs(sol.min_risk - ref.min_risk))
            max_sum_err = max(max_sum_err, abs(float(sol.weights.sum()) - 1.0))
            max_selfcheck = max(
                max_selfcheck,
                abs(cooperation_risk(sol.weights, R) - sol.min_risk))
        ok = (max_gap <= tol and max_sum_err <= 1e-9 and max_selfcheck <= 1e-9)
        passed = passed and ok
        per_n[str(n)] = {
            "passed": bool(ok),
            "max_grid_gap": max_gap,
            "max_weight_sum_error": max_sum_err,
            "max_quadratic_selfcheck_gap": max_selfcheck,
            "rejected_draws": rejected,
        }
    return {
        "name": "multi_closed_form_vs_simplex_grid",
        "passed": bool(passed),
        "trials_per_n": trials,
        "resolution": resolution,
        "tolerance": tol,
        "per_n": per_n,
    }


def check_equicorrelated(n_values=(1, 2, 3, 4, 5, 6),
                         pairs=((0.4, 0.1), (0.6, 0.0), (0.3, 0.25)),
                         tol: float = 1e-12) -> dict:
    """Equi-correlated shortcut vs the general closed form, plus monotonicity."""
    results = []
    passed = True
    for r_diag, r_off in pairs:
        values = []
        max_gap = 0.0
        for n in n_values:
            shortcut = symmetric_min_risk(n, r_diag, r_off)
            entries = np.full((n, n), r_off)
            entries[np.diag_indices(n)] = r_diag
            general = optimal_lambda_multi(RiskMatrix(entries)).min_risk
            max_gap = max(max_gap, abs(shortcut - general))
            values.append(shortcut)
        decreasing = all(b < a for a, b in zip(values, values[1:]))
        ok = max_gap <= tol and decreasing
        passed = passed and ok
        results.append({
            "r_diag": r_diag,
            "r_off": r_off,
            "passed": bool(ok),
            "max_gap": max_gap,
            "strictly_decreasing": bool(decreasing),
            "values_by_n": values,
        })
    return {
        "name": "equicorrelated_consistency",
        "passed": bool(passed),
        "n_values": list(n_values),
        "tolerance": tol,
        "pairs": results,
    }


def run_all_checks(trials: int = 200, samples: int = 10_000, classes: int = 10,
                   n_values=(2, 3, 4, 5), grid_step: float = 1e-5,
                   resolution: float = 1e-3, correlation: float = 0.0,
                   seed: int = 0) -> dict:
    """Run every suite and bundle the results for the JSON report."""
    checks = [
        check_dual_closed_form(trials=trials, seed=seed, grid_step=grid_step),
        check_dual_empirical(num_samples=samples, c=classes, seed=seed,
                             correlation=correlation),
        check_multi_closed_form(n_values=n_values, resolution=resolution,
                                seed=seed),
        check_equicorrelated(n_values=tuple(range(1, max(n_values) + 2))),
    ]
    return {
        "all_passed": bool(all(c["passed"] for c in checks)),
        "checks": checks,
    }
