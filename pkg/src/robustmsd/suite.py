"""The runnable property suite behind ``robustmsd verify``.

Each property evaluates one closed-form identity, structural bound or
population-level oracle and reports PASS/FAIL with a one-line detail.
``quick`` shrinks the randomized sample counts, not the tolerances.
"""

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from . import rho as rho_mod
from .criteria import (
    CriterionParams,
    JointState,
    criterion_value,
    hessian_quadform,
    partial_objective_grads,
)
from .verify import (
    DiscreteDist,
    GaussianLosses,
    GradientDist,
    LognormalLosses,
    check_location_concentration,
    check_pair_optimality,
    check_scale_bounds,
    check_scale_optimized_limit,
    check_stationarity_equivalence,
)

__all__ = ["PropertyOutcome", "run_property_suite"]


@dataclass
class PropertyOutcome:
    name: str
    passed: bool
    detail: str

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _conjugate_sup(x: float) -> float:
    fine = np.linspace(-10.0, 10.0, 2_000_001)
    tails = np.geomspace(10.0, 1e6, 20_000)
    u = np.concatenate([fine, tails, -tails])
    return float(np.max(x * u - (np.sqrt(u * u + 1.0) - 1.0)))


def _closed_forms() -> PropertyOutcome:
    checks = [
        abs(rho_mod.rho(0.0)) == 0.0,
        abs(rho_mod.rho(1.0) - (math.sqrt(2.0) - 1.0)) < 1e-12,
        abs(rho_mod.rho(-3.0) - (math.sqrt(10.0) - 1.0)) < 1e-12,
        rho_mod.rho_prime(0.0) == 0.0,
        abs(rho_mod.rho_prime(1.0) - 1.0 / math.sqrt(2.0)) < 1e-12,
        0.999999 < rho_mod.rho_prime(1e6) < 1.0,
        rho_mod.rho_conjugate(0.0) == 0.0,
        abs(rho_mod.rho_conjugate(0.6) - 0.2) < 1e-12,
        rho_mod.rho_conjugate(1.0) == math.inf,
        rho_mod.rho_conjugate(-0.9) > rho_mod.rho_conjugate(-0.1),
        rho_mod.pseudo_huber(0.0, 5.0) == 0.0,
        abs(rho_mod.pseudo_huber(1.0, 1.0) - (math.sqrt(2.0) - 1.0)) < 1e-12,
        abs(rho_mod.pseudo_huber(2.0, 1e4) - 2.0) < 1e-3,
    ]
    sup_err = max(
        abs(rho_mod.rho_conjugate(x) - _conjugate_sup(x))
        for x in (-0.99, -0.9, -0.5, -0.1, 0.0, 0.1, 0.5, 0.9, 0.99)
    )
    ok = all(checks) and sup_err < 1e-6
    return PropertyOutcome(
        "rho_closed_forms", ok, f"conjugate sup deviation {sup_err:.2e}"
    )


def _catoni_grid() -> PropertyOutcome:
    xs = np.linspace(-50.0, 50.0, 10_001)
    bad = [x for x in xs if not rho_mod.catoni_envelope_check(float(x))]
    return PropertyOutcome(
        "catoni_envelope_grid",
        not bad,
        f"{len(xs)} points on [-50, 50], {len(bad)} violations",
    )


def _partial_convexity(n_pairs: int, seed: int) -> PropertyOutcome:
    rng = np.random.Generator(np.random.PCG64(seed))
    losses = rng.normal(size=20) * 3.0
    params = CriterionParams("sunhuber", alpha=0.05, beta=0.1, lam=1.0)

    def value(a, b):
        return criterion_value(losses, JointState(h=np.zeros(1), a=a, b=b), params)

    worst = -math.inf
    for _ in range(n_pairs):
        a1, a2 = rng.normal(scale=5.0, size=2)
        b1, b2 = rng.uniform(1e-3, 10.0, size=2)
        gap = value(0.5 * (a1 + a2), 0.5 * (b1 + b2)) - 0.5 * (
            value(a1, b1) + value(a2, b2)
        )
        worst = max(worst, gap)
    return PropertyOutcome(
        "partial_objective_convexity",
        worst <= 1e-12,
        f"{n_pairs} midpoint pairs, worst gap {worst:.2e}",
    )


def _lipschitz_bound(n_draws: int, seed: int) -> PropertyOutcome:
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = -math.inf
    for _ in range(n_draws):
        x = float(rng.normal(scale=10.0))
        a = float(rng.normal(scale=10.0))
        b = float(rng.uniform(1e-4, 10.0))
        beta = float(rng.uniform(0.0, 1.0))
        ga, gb = partial_objective_grads(x, a, b, beta)
        worst = max(worst, abs(ga) + abs(gb) - (1.0 + max(1.0 - beta, beta)))
    return PropertyOutcome(
        "gradient_one_norm_bound",
        worst <= 1e-12,
        f"{n_draws} draws, worst excess {worst:.2e}",
    )


def _nonsmooth_witness(n_draws: int, seed: int) -> PropertyOutcome:
    rng = np.random.Generator(np.random.PCG64(seed))
    psd_ok = all(
        hessian_quadform(
            float(rng.normal(scale=5.0)),
            float(rng.uniform(1e-6, 10.0)),
            *rng.normal(size=2),
        )
        >= 0.0
        for _ in range(n_draws)
    )
    witness = hessian_quadform(1e-6, 1e-6, 1.0, -1.0)
    return PropertyOutcome(
        "hessian_psd_and_blowup",
        psd_ok and witness > 1e4,
        f"quadform at (x,b)=(1e-6,1e-6): {witness:.3e}",
    )


def _random_dist(rng) -> DiscreteDist:
    m = int(rng.integers(2, 7))
    values = rng.uniform(-5.0, 5.0, m)
    probs = rng.uniform(0.1, 1.0, m)
    return DiscreteDist(values, probs / probs.sum())


def _scale_bounds(n_configs: int, seed: int) -> PropertyOutcome:
    rng = np.random.Generator(np.random.PCG64(seed))
    fails = 0
    for _ in range(n_configs):
        d = _random_dist(rng)
        a = float(rng.uniform(-6.0, 6.0))
        lam = float(rng.uniform(0.2, 3.0))
        beta = float(rng.uniform(0.01, 0.99)) * lam
        if not check_scale_bounds(d, a, beta, lam).passed:
            fails += 1
    return PropertyOutcome(
        "optimal_scale_bounds",
        fails == 0,
        f"{n_configs} random configurations, {fails} failures",
    )


def _scale_limit() -> PropertyOutcome:
    sym = DiscreteDist.from_atoms([(-1.0, 0.5), (1.0, 0.5)])
    const = DiscreteDist.from_atoms([(2.0, 1.0)])
    shifted = DiscreteDist.from_atoms([(2.0, 0.5), (4.0, 0.5)])
    reports = [
        check_scale_optimized_limit(sym, 0.0, 1.0, 0.0),
        check_scale_optimized_limit(const, 2.0, 1.0, 1.0),
        check_scale_optimized_limit(shifted, 3.0, 1.0, 1.0),
    ]
    ok = all(r.verdict == "pass" for r in reports)
    vals = ", ".join(f"{r.scaled_values[-1]:.4f}" for r in reports)
    return PropertyOutcome("scale_optimized_sandwich", ok, f"limits: {vals}")


def _concentration(trials: int, seed: int) -> List[PropertyOutcome]:
    out = []
    for name, losses, s in (
        ("gaussian", GaussianLosses(0.0, 1.0), seed),
        ("lognormal", LognormalLosses(0.0, 1.0), seed + 1),
    ):
        r = check_location_concentration(
            losses, b=20.0, alpha=0.0, lam=1.0, n=2000,
            delta=0.05, trials=trials, seed=s,
        )
        out.append(
            PropertyOutcome(
                f"location_concentration_{name}",
                r.passed,
                f"coverage {r.coverage:.4f} >= required {r.required:.4f}",
            )
        )
    return out


def _stationarity(n_instances: int, seed: int) -> PropertyOutcome:
    fails = 0
    for s in range(n_instances):
        rng = np.random.Generator(np.random.PCG64(seed + s))
        values = rng.uniform(-4.0, 4.0, 5)
        grads = rng.normal(size=(5, 3))
        probs = rng.uniform(0.1, 1.0, 5)
        d = GradientDist(values, grads, probs / probs.sum())
        if not check_stationarity_equivalence(d).passed:
            fails += 1
    return PropertyOutcome(
        "mean_variance_stationarity",
        fails == 0,
        f"{n_instances} random 5-atom instances, {fails} failures",
    )


def _pair_optimality() -> PropertyOutcome:
    sym = DiscreteDist.from_atoms([(-1.0, 0.5), (1.0, 0.5)])
    asym = DiscreteDist.uniform([0.0, 0.0, 10.0])
    reports = [
        check_pair_optimality(sym, alpha=0.0, beta=0.1, lam=1.0),
        check_pair_optimality(asym, alpha=0.01, beta=0.05, lam=1.0),
        check_pair_optimality(asym, alpha=0.99, beta=0.87, lam=1.0),
    ]
    ok = all(r.passed for r in reports)
    res = max(max(r.location_residual, r.scale_residual) for r in reports)
    return PropertyOutcome(
        "pair_optimality_equalities", ok, f"worst residual {res:.2e}"
    )


def run_property_suite(quick: bool = False, seed: int = 0) -> List[PropertyOutcome]:
    """Run every property check; ``quick`` shrinks randomized sample counts."""
    n_pairs = 200 if quick else 1000
    n_draws = 200 if quick else 1000
    n_configs = 50 if quick else 200
    mc_trials = 300 if quick else 2000
    n_stat = 20 if quick else 100
    outcomes = [
        _closed_forms(),
        _catoni_grid(),
        _partial_convexity(n_pairs, seed + 10),
        _lipschitz_bound(n_draws, seed + 20),
        _nonsmooth_witness(n_draws, seed + 30),
        _scale_bounds(n_configs, seed + 40),
        _scale_limit(),
    ]
    outcomes.extend(_concentration(mc_trials, seed + 50))
    outcomes.append(_stationarity(n_stat, seed + 60))
    outcomes.append(_pair_optimality())
    return outcomes
