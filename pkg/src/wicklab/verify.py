"""Cross-engine acceptance checks.

Each check returns a :class:`CheckResult` with the measured quantities that
decided it.  ``seconds`` is wall-clock time; it is reported but is kept out of
the deterministic part of any output.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .diagrams import (
    WickMomentSpec,
    block_sign_sums,
    convergence_study,
    wick_moment_closed,
    wick_moment_oracle,
    wick_moment_traversal,
)
from .funcgrid import GridFunction, sample
from .hermite import (
    KForm,
    MultiIndexCoeffs,
    clt_ks_distance,
    cosine_basis,
    kform_eval,
    kform_limit_check,
    kform_orthogonality_check,
)
from .moments import McConfig, MomentSpec, exact_expectation, moment_bruteforce, moment_partition_formula
from .numbers import alternating_eulerian_sum, block_coefficient
from .wick import (
    bernoulli_moments,
    noise_moments,
    stochastic_exponent_closed,
    stochastic_exponent_partial,
    wick_polynomials,
)

DEFAULT_SEED = 20240607

__all__ = ["CheckResult", "CHECKS", "run_checks", "format_line", "DEFAULT_SEED"]


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self, timings: bool = False) -> dict:
        out = {"criterion": self.number, "name": self.name, "passed": self.passed, "measured": self.measured}
        if timings:
            out["seconds"] = self.seconds
        return out


def _rel(a: float, b: float) -> float:
    # Scaled difference; the unit floor covers values that vanish exactly.
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _random_grid(rng: np.random.Generator, n: int) -> GridFunction:
    vals = rng.uniform(-1.0, 1.0, n)
    vals[np.abs(vals) < 0.05] = 0.5
    return GridFunction(n, 1, vals)


def _example_specs(seed: int) -> list[WickMomentSpec]:
    rng = np.random.default_rng(seed)
    return [WickMomentSpec(((_random_grid(rng, n), 2), (_random_grid(rng, n), 2))) for n in range(1, 11)]


def check_worked_example(seed: int) -> CheckResult:
    tol = 1e-10
    worst = 0.0
    for spec in _example_specs(seed):
        (f1, _), (f2, _) = spec.factors
        n = spec.n
        expected = 2 * (np.sum(f1.values * f2.values) / n) ** 2 - 2 * np.sum(f1.values**2 * f2.values**2) / n**2
        trav, _ = wick_moment_traversal(spec)
        values = [trav, wick_moment_closed(spec), wick_moment_oracle(spec), float(expected)]
        worst = max(worst, max(_rel(a, b) for a in values for b in values))
    return CheckResult(1, "worked example (:phi^2:, :phi^2:)", worst <= tol, {"max_rel_diff": worst, "tol": tol})


def check_non_orthogonality(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 1)
    tol = 1e-12
    f = _random_grid(rng, 1)
    spec = WickMomentSpec(((f, 3), (f, 1)))
    target = -2.0 * float(f.values[0]) ** 4
    trav, _ = wick_moment_traversal(spec)
    at_one = max(abs(v - target) for v in (trav, wick_moment_closed(spec), wick_moment_oracle(spec)))
    worst_rel = 0.0
    largest = -math.inf
    for n in range(2, 11):
        f = _random_grid(rng, n)
        spec = WickMomentSpec(((f, 3), (f, 1)))
        oracle = wick_moment_oracle(spec)
        trav, _ = wick_moment_traversal(spec)
        for v in (trav, wick_moment_closed(spec)):
            worst_rel = max(worst_rel, _rel(v, oracle))
            largest = max(largest, v)
    passed = at_one <= tol and worst_rel <= 1e-10 and largest < 0
    return CheckResult(
        2,
        "non-orthogonality (:phi^3:, :phi:)",
        passed,
        {"n1_abs_diff": at_one, "n1_target": target, "max_rel_diff": worst_rel, "largest_value": largest},
    )


def _random_moment_spec(rng: np.random.Generator) -> MomentSpec:
    n = int(rng.integers(1, 11))
    K = int(rng.integers(1, 9))
    powers = []
    while K > 0:
        q = int(rng.integers(1, K + 1))
        powers.append(q)
        K -= q
    return MomentSpec(tuple((_random_grid(rng, n), q) for q in powers))


def check_moment_formula(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 2)
    tol = 1e-10
    worst = 0.0
    start = time.perf_counter()
    for _ in range(200):
        spec = _random_moment_spec(rng)
        oracle = moment_bruteforce(spec)
        formula = moment_partition_formula(spec)
        worst = max(worst, abs(formula - oracle) / (1.0 + abs(oracle)))
    elapsed = time.perf_counter() - start
    return CheckResult(
        3,
        "moment formula vs brute force",
        worst <= tol and elapsed < 30.0,
        {"specs": 200, "max_scaled_diff": worst, "tol": tol},
    )


def check_eulerian_identity(seed: int) -> CheckResult:
    mismatched = [s for s in range(2, 21, 2) if alternating_eulerian_sum(s) != block_coefficient(s)]
    collapse_failures = 0
    blocks_checked = 0
    for spec in _example_specs(seed):
        _, terms = wick_moment_traversal(spec)
        for (_, block), total in block_sign_sums(terms).items():
            blocks_checked += 1
            if Fraction(total) != block_coefficient(len(block)):
                collapse_failures += 1
    return CheckResult(
        4,
        "Eulerian sums equal block coefficients",
        not mismatched and collapse_failures == 0,
        {"sizes_mismatched": mismatched, "blocks_checked": blocks_checked, "collapse_failures": collapse_failures},
    )


def _wick_law_errors(moments) -> tuple[float, float, bool]:
    polys = wick_polynomials(moments)
    deriv = 0.0
    mean = 0.0
    monic = True
    for m, p in enumerate(polys):
        monic &= p.coeffs[m] == 1.0
        if m == 0:
            continue
        scale = max(1.0, float(np.max(np.abs(p.coeffs))))
        deriv = max(deriv, float(np.max(np.abs(p.derivative() - m * polys[m - 1].coeffs))) / scale)
        mean = max(mean, abs(float(p.mean())))
    return deriv, mean, monic


def check_wick_laws(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 4)
    tol = 1e-9
    f = _random_grid(rng, 8)
    d1, m1, mon1 = _wick_law_errors(bernoulli_moments(12))
    d2, m2, mon2 = _wick_law_errors(noise_moments(f, 12))
    deriv, mean = max(d1, d2), max(m1, m2)
    return CheckResult(
        5,
        "Wick polynomial laws m <= 12",
        deriv <= tol and mean <= tol and mon1 and mon2,
        {"max_derivative_err": deriv, "max_abs_mean": mean, "monic": bool(mon1 and mon2)},
    )


def check_stochastic_exponent(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 5)
    moments = bernoulli_moments(40)
    alphas = (0.25, 0.5, 1.0)
    series = 0.0
    for a in alphas:
        for x in (-1.0, 1.0):
            exact = math.exp(a * x) / math.cosh(a)
            series = max(series, abs(stochastic_exponent_partial(a, moments, x, 40) - exact))
    mean = 0.0
    for n in (1, 4, 8, 12):
        f = _random_grid(rng, n)
        for a in alphas:
            e = exact_expectation(lambda eps: stochastic_exponent_closed(a, f, eps), n)
            mean = max(mean, abs(e - 1.0))
    return CheckResult(
        6,
        "stochastic exponent",
        series <= 1e-8 and mean <= 1e-10,
        {"max_partial_sum_err": series, "max_mean_err": mean},
    )


CLT_FUNCTIONS = ("sin(2*pi*x)", "exp(x)", "1 + x^2")


def check_clt(seed: int) -> CheckResult:
    start = time.perf_counter()
    dists = [clt_ks_distance(sample(e, 2000), McConfig(100_000, seed + 7 + i)) for i, e in enumerate(CLT_FUNCTIONS)]
    elapsed = time.perf_counter() - start
    return CheckResult(
        7,
        "KS distance to Gaussian at n=2000",
        max(dists) < 0.01 and elapsed < 10.0,
        {"functions": list(CLT_FUNCTIONS), "ks": dists},
    )


def check_convergence_rate(seed: int) -> CheckResult:
    rows = convergence_study([("sin(3*x)", 2), ("x", 2)], [8, 16, 32, 64])
    errs = [r["abs_error"] for r in rows]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    scaled = [r["error_times_n"] for r in rows]
    spread = (max(scaled) - min(scaled)) / min(scaled)
    passed = all(1.6 <= r <= 2.4 for r in ratios) and spread < 0.25
    return CheckResult(8, "diagram vanishing rate O(1/n)", passed, {"ratios": ratios, "error_times_n_spread": spread})


def check_kform_orthogonality(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 9)
    worst_cross = 0.0
    worst_mean = 0.0
    for n in (4, 7, 12):
        forms = {}
        for k in range(1, 5):
            vals = rng.uniform(-1.0, 1.0, (n,) * k)
            forms[k] = KForm(f=GridFunction(n, k, vals))
        for k in range(1, 5):
            worst_mean = max(worst_mean, abs(exact_expectation(lambda e: kform_eval(forms[k], e), n)))
            for m in range(k + 1, 5):
                worst_cross = max(worst_cross, abs(kform_orthogonality_check(forms[k], forms[m])))
    return CheckResult(
        9,
        "k-linear form orthogonality",
        worst_cross <= 1e-12 and worst_mean <= 1e-12,
        {"max_abs_cross": worst_cross, "max_abs_mean": worst_mean},
    )


HERMITE_GRID = (16, 32, 64, 128, 256)


def check_hermite_limit(seed: int) -> CheckResult:
    coeffs = MultiIndexCoeffs.product(cosine_basis(3), [2, 3])
    rows = kform_limit_check(coeffs, HERMITE_GRID, McConfig(100_000, seed + 10))
    gaps = [r["second_gap"] for r in rows]
    ratios = [a / b for a, b in zip(gaps, gaps[1:])]
    last = rows[-1]
    third_z = last["third_gap"] / last["third_se"]
    mean_z = abs(last["mean"] - last["mean_limit"]) / last["mean_se"]
    passed = all(1.5 <= r <= 2.5 for r in ratios) and third_z <= 4.0 and mean_z <= 4.0 and abs(last["second_limit"] - 1) < 1e-6
    return CheckResult(
        10,
        "Hermite limit of A_2 for psi1 (x) psi2",
        passed,
        {
            "second_limit": float(last["second_limit"]),
            "second_gap_ratios": ratios,
            "third_at_n": last["n"],
            "third": last["third"],
            "third_limit": float(last["third_limit"]),
            "third_z": float(third_z),
            "mean_z": float(mean_z),
        },
    )


CHECKS: dict[int, Callable[[int], CheckResult]] = {
    1: check_worked_example,
    2: check_non_orthogonality,
    3: check_moment_formula,
    4: check_eulerian_identity,
    5: check_wick_laws,
    6: check_stochastic_exponent,
    7: check_clt,
    8: check_convergence_rate,
    9: check_kform_orthogonality,
    10: check_hermite_limit,
}

RUNTIME_LIMITS = {1: 1.0, 3: 30.0, 7: 10.0}


def run_checks(seed: int = DEFAULT_SEED, only=None) -> list[CheckResult]:
    out = []
    for number in sorted(only or CHECKS):
        start = time.perf_counter()
        result = CHECKS[number](seed)
        result.seconds = time.perf_counter() - start
        limit = RUNTIME_LIMITS.get(number)
        if limit is not None and result.seconds >= limit:
            result.passed = False
        out.append(result)
    return out


def format_line(r: CheckResult) -> str:
    status = "PASS" if r.passed else "FAIL"
    shown = ", ".join(f"{k}={_short(v)}" for k, v in r.measured.items())
    return f"[{status}] criterion {r.number:2d}: {r.name} ({shown}) {r.seconds:.2f}s"


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, list):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)
