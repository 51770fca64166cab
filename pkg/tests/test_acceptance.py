"""Acceptance criteria, one test each.

Every test records a one-line PASS/FAIL verdict with its measured numbers;
``conftest.py`` prints the collected lines at the end of the session. Running
this file directly (``python3 tests/test_acceptance.py``) prints them too.
"""

import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate as sci_integrate

sys.path.insert(0, str(Path(__file__).parent))
from oracles import enumerate_semigroup, rounding_sensitivity  # noqa: E402

from nsexpansion.analysis import (
    d0,
    estimate_bilinear_constant,
    fit_exponential_remainder,
    fit_power_decay,
    integral_bound_probe,
    mx2_check,
    remainder_norms,
)
from nsexpansion.cli import main as cli_main
from nsexpansion.expansion import (
    ForceExpansion,
    SolutionExpansion,
    check_summability,
    coefficient_bounds,
    construct_admissible_force,
    factorial_example,
    forward_recursion,
    inverse_recursion,
)
from nsexpansion.exponents import generate_semigroup, integer_sequence
from nsexpansion.persist import load_trajectory, read_json
from nsexpansion.solver import ForceModel, SolverConfig, energy_budget, integrate, integrate_linear
from nsexpansion.spectral import (
    GevreyParams,
    SpectralField,
    basis,
    gevrey_norms,
    shear_mode_field,
    random_solenoidal_field,
)

RESULTS: list[str] = []
HALF = GevreyParams(Fraction(1, 2), 0.0)

# pinned tolerances
FACTORIAL_TOL = 1e-12
ROUNDTRIP_TOL = 1e-10
EXACTNESS_TOL = 1e-8
RATE_MARGIN = 0.2
LINEAR_ORACLE_TOL = 1e-6
BETA_MARGIN = 0.3
D0_TOL = 1e-8
DRIFT_TOL = 0.05
ORDER_MARGIN = 0.3


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}: {detail}")
    assert ok, detail


def rel_roundtrip(a, b) -> float:
    scale = max(float(np.max(np.abs(x.coeffs))) for x in a.terms)
    return max(float(np.max(np.abs(x.coeffs - y.coeffs))) for x, y in zip(a.terms, b.terms)) / scale


# ---------------------------------------------------------------- 1


def test_01_factorial_oracle():
    start = time.perf_counter()
    force = factorial_example(12)
    sol = forward_recursion(force)
    phi1 = force.phis[0].coeffs
    err = max(
        float(np.max(np.abs(x.coeffs - math.factorial(n - 1) * phi1))) / (math.factorial(n - 1) * np.max(np.abs(phi1)))
        for n, x in enumerate(sol.xis, start=1)
    )
    elapsed = time.perf_counter() - start
    verdict(1, "factorial example xi_n = (n-1)! phi_1, n <= 12", err <= FACTORIAL_TOL and elapsed < 1.0,
            f"max rel err {err:.2e} (tol {FACTORIAL_TOL:g}), {elapsed:.3f}s (< 1s)")


# ---------------------------------------------------------------- 2


def test_02_roundtrip():
    rng = np.random.default_rng(2024)
    probe_rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst, stability, count = 0.0, 0.0, 0
    for gammas in ([1], [1, "3/2"]):
        for _ in range(10):
            cutoff = int(rng.integers(1, 9))
            if gammas == [1]:
                seq = integer_sequence(int(rng.integers(1, 11)))
            else:
                seq = generate_semigroup(gammas, Fraction(int(rng.integers(2, 10)), 2)).truncated(10)
            phis = tuple(random_solenoidal_field(rng, cutoff) * float(rng.uniform(0.1, 2.0)) for _ in range(len(seq)))
            force = ForceExpansion(seq, phis)
            sol = forward_recursion(force)
            err = rel_roundtrip(force, inverse_recursion(sol))
            worst = max(worst, err)
            # error in units of what rounding the intermediate xi alone would cause
            sens = rounding_sensitivity(inverse_recursion, sol, force, probe_rng)
            stability = max(stability, err / max(sens, 1e-16))
            count += 1
    elapsed = time.perf_counter() - start
    verdict(2, "inverse o forward = identity", worst <= ROUNDTRIP_TOL and elapsed < 10.0,
            f"{count} expansions, max rel err {worst:.2e} (tol {ROUNDTRIP_TOL:g}), "
            f"max err / rounding sensitivity {stability:.2f}, {elapsed:.2f}s (< 10s)")


# ---------------------------------------------------------------- 3


def test_03_semigroup_oracle():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(25):
        k = int(rng.integers(1, 4))
        gs = set()
        while len(gs) < k:
            q = int(rng.integers(1, 7))
            p = int(rng.integers(math.ceil(0.4 * q), 3 * q + 1))
            gs.add(Fraction(p, q))
        gammas = sorted(gs)
        cutoff = Fraction(int(rng.integers(math.ceil(gammas[-1] * 2), 25)), 2)
        cutoff = min(max(cutoff, gammas[-1]), Fraction(12))
        seq = generate_semigroup(gammas, cutoff)
        if list(seq.mus) != enumerate_semigroup(gammas, cutoff):
            mismatches += 1
    ints = generate_semigroup([1], 50)
    integer_ok = list(ints.mus) == [Fraction(n) for n in range(1, 51)]
    elapsed = time.perf_counter() - start
    verdict(3, "semigroup equals exhaustive enumeration", mismatches == 0 and integer_ok and elapsed < 5.0,
            f"{mismatches}/25 mismatches, mu_n = n for gamma=(1): {integer_ok}, {elapsed:.2f}s (< 5s)")


# ---------------------------------------------------------------- 4


def _single_mode(b, i, cutoff):
    kf = b.wavevectors[i].astype(float)
    a = np.cross(kf, [0.3, -0.7, 1.1])
    a = a / np.linalg.norm(a)
    c = np.zeros((b.size, 3), complex)
    c[i] = a * (0.6 - 0.8j)
    return c


def test_04_integrator_exactness():
    start = time.perf_counter()
    L = 9
    b = basis(L)
    times = (0.5, 1.0, 2.5, 5.0)
    decay = np.exp(-np.outer(times, b.ksq))[:, :, None]
    worst = 0.0
    # a linear f = 0 run is diagonal, so one run carrying every mode is every single-mode run at once
    allmodes = sum(_single_mode(b, i, L) for i in range(b.size))
    for scheme in ("if_euler", "if_rk2", "if_rk4"):
        for dt in (0.1, 0.037, 0.01):
            cfg = SolverConfig(cutoff=L, dt=dt, t_end=5.0, scheme=scheme, record=times)
            tr = integrate_linear(cfg, SpectralField(L), ForceModel(), SpectralField(L, allmodes))
            worst = max(worst, float(np.max(np.abs(tr.coeffs[1:] - allmodes[None] * decay))))
    # the nonlinear term vanishes on a single mode, so the full solver must be exact too
    cfg = SolverConfig(cutoff=L, dt=0.1, t_end=5.0, record=times)
    for i in range(b.size):
        c = _single_mode(b, i, L)
        tr = integrate(cfg, SpectralField(L, c), ForceModel())
        worst = max(worst, float(np.max(np.abs(tr.coeffs[1:] - c[None] * decay))))
    elapsed = time.perf_counter() - start
    verdict(4, "single-mode runs match e^{-|k|^2 t}", worst <= EXACTNESS_TOL and elapsed < 5.0,
            f"{b.size} modes with |k|^2 <= 9; linear runs for 3 schemes x dt in (0.1, 0.037, 0.01), "
            f"nonlinear solver at dt 0.1; max abs err {worst:.2e} for unit amplitude (tol {EXACTNESS_TOL:g}), {elapsed:.2f}s (< 5s)")


# ---------------------------------------------------------------- 5


@pytest.fixture(scope="module")
def zeta1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("zeta1")
    start = time.perf_counter()
    code = cli_main(["pipeline", "--builtin", "zeta1-only", "--out-dir", str(out), "--threads", "2"])
    return out / "zeta1-only", code, time.perf_counter() - start


@pytest.fixture(scope="module")
def factorial_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("factorial")
    code = cli_main(["pipeline", "--builtin", "divergent-factorial", "--out-dir", str(out), "--threads", "2"])
    return out / "divergent-factorial", code


def _rate_ok(f: dict) -> bool:
    e = f["exponent"]
    if f["N"] == 0:
        return e is not None and abs(e - 1.0) <= RATE_MARGIN
    target = float(Fraction(f["predicted"])) - RATE_MARGIN
    return (e is not None and e >= target) or "floor-limited" in f["flags"]


@pytest.mark.slow
def test_05_expansion_rates(zeta1_run, factorial_run):
    run, code, elapsed = zeta1_run
    rep = read_json(run / "analysis.json")
    fits = rep["fits"]
    grid = {(f["seed"], f["sigma"], f["N"]) for f in fits}
    want = {(s, sg, n) for s in (1, 2) for sg in (0.0, 0.1) for n in (0, 1, 2)}
    bad = [f for f in fits if not _rate_ok(f)]
    disagree = [a for a in rep["seed_agreement"] if a["agree"] is False]

    def show(n):
        ex = [f["exponent"] for f in fits if f["N"] == n]
        fl = sum("floor-limited" in f["flags"] for f in fits if f["N"] == n)
        return f"N={n} exp {min(ex):.3f}..{max(ex):.3f} ({fl} floor-limited)"

    # the divergent factorial series has nonzero xi_2, xi_3, so the power rates themselves are visible
    frep = read_json(factorial_run[0] / "analysis.json")
    fbad = [f for f in frep["fits"] if f["N"] in (1, 2) and not _rate_ok(f)]
    fshow = ", ".join(
        f"N={n} {min(f['exponent'] for f in frep['fits'] if f['N'] == n):.3f}" for n in (0, 1, 2, 3)
    )
    ok = code == 0 and factorial_run[1] == 0 and grid >= want and not bad and not disagree and not fbad
    verdict(5, "expansion remainder rates (zeta1-only, Lambda=8, t=1e3, rho=1/2)", ok,
            f"{'; '.join(show(n) for n in (0, 1, 2))}; {len(bad)} failing of {len(fits)}; "
            f"{len(disagree)} seed disagreements; factorial series {fshow}; {elapsed:.0f}s")


@pytest.mark.slow
def test_05b_energy_inequality_on_runs(zeta1_run, factorial_run):
    holds = []
    for run in (zeta1_run[0], factorial_run[0]):
        for path in sorted(run.glob("traj_seed*.csv")):
            holds.append(energy_budget(load_trajectory(path)).energy_ineq_holds)
    verdict(9, "energy inequality on the rate-study trajectories", len(holds) >= 4 and all(holds),
            f"{sum(holds)}/{len(holds)} trajectories satisfy it")


# ---------------------------------------------------------------- 6


def test_06_linearized_asymptotics():
    start = time.perf_counter()
    L = 8
    xi = random_solenoidal_field(1, L)
    phi = random_solenoidal_field(2, L)
    F = ForceModel(ForceExpansion(integer_sequence(2), (SpectralField(L), phi)), shift=1.0)  # phi (1+t)^{-2}
    tr = integrate_linear(SolverConfig(cutoff=L, dt=0.02, t_end=500.0, per_decade=40), xi, F)
    ksq = basis(L).ksq.astype(float)
    steady = xi.coeffs / ksq[:, None]
    vals = gevrey_norms(tr.coeffs - steady[None], L, HALF.shifted(Fraction(1, 2)))
    fit = fit_power_decay(tr.times, vals, (20.0, 500.0))

    # mode-wise variation of constants with w(0) = 0
    err = 0.0
    for target in (1.0, 5.0, 20.0, 100.0, 500.0):
        i = int(np.argmin(np.abs(tr.times - target)))
        t = float(tr.times[i])
        g = np.array([
            sci_integrate.quad(lambda s, k=k: math.exp(-k * (t - s)) * (1 + s) ** -2.0,
                               max(0.0, t - 60.0 / k), t, epsabs=0.0, epsrel=1e-13, limit=200)[0]
            for k in ksq
        ])
        w = xi.coeffs * (-np.expm1(-ksq * t) / ksq)[:, None] + phi.coeffs * g[:, None]
        err = max(err, float(np.max(np.abs(w - tr.coeffs[i])) / np.max(np.abs(w))))
    elapsed = time.perf_counter() - start
    ok = abs(fit.exponent - 2.0) <= RATE_MARGIN and err <= LINEAR_ORACLE_TOL and elapsed < 60
    verdict(6, "linearized decay |w - A^{-1} xi| ~ t^{-2}", ok,
            f"exponent {fit.exponent:.4f} +- {fit.stderr:.1e} on [20, 500] (2 +- {RATE_MARGIN}), "
            f"quadrature oracle rel err {err:.1e} (tol {LINEAR_ORACLE_TOL:g}), {elapsed:.1f}s")


# ---------------------------------------------------------------- 7


def _exponential_case(zetas, L=8):
    c = max(z.cutoff for z in zetas)
    sol = SolutionExpansion(integer_sequence(len(zetas)), tuple(z.with_cutoff(c) for z in zetas))
    built = construct_admissible_force(sol, HALF, cutoff=L)
    record = tuple(np.linspace(0.0, 30.0, 301)[1:])
    tr = integrate(SolverConfig(cutoff=L, dt=0.0025, t_end=30.0, record=record), random_solenoidal_field(3, L), ForceModel(built.force))
    rs = remainder_norms(tr, built.zetas, len(built.zetas), HALF, Fraction(1, 2))
    return fit_exponential_remainder(rs.times, rs.values, (10.0, 30.0)), energy_budget(tr).energy_ineq_holds


def test_07_exponential_remainder():
    start = time.perf_counter()
    z1 = random_solenoidal_field(7, 1) * 0.3
    z2 = random_solenoidal_field(8, 2) * 0.3
    with_xi1, e1 = _exponential_case((z1, z2))
    no_xi1, e2 = _exponential_case((SpectralField(2), z2))
    elapsed = time.perf_counter() - start
    ok = with_xi1.poly_bound and no_xi1.poly_bound and abs(no_xi1.beta) <= BETA_MARGIN and e1 and e2 and elapsed < 120
    verdict(7, "exponential remainder after the full series", ok,
            f"xi_1 != 0: beta {with_xi1.beta:.3f}, extra linear growth {with_xi1.gamma:.1e} (poly-bound {with_xi1.poly_bound}); "
            f"xi_1 = 0: beta {no_xi1.beta:.4f} (0 +- {BETA_MARGIN}); energy inequality {e1 and e2}; {elapsed:.1f}s")


# ---------------------------------------------------------------- 8


def test_08_inequality_suite():
    from scipy import optimize

    start = time.perf_counter()
    grid = (0.5, 1.0, 2.0)
    d0_err = 0.0
    for a in grid:
        for s in grid:
            res = optimize.minimize_scalar(lambda x: -(a * math.log(x) - s * x), bounds=(1e-9, 100 * a / s),
                                           method="bounded", options={"xatol": 1e-12})
            d0_err = max(d0_err, abs(d0(a, s) - math.exp(-res.fun)) / d0(a, s))
    lemma_ok = all(integral_bound_probe(lam, sig, [1.0, 10.0, 100.0]).holds for lam in (1.0, 2.0) for sig in (0.5, 1.0))
    mx2_ok = all(mx2_check(a, s, np.linspace(0.0, 200.0, 20001))[0] for a in grid for s in grid)
    est = estimate_bilinear_constant(2000, 8, HALF, seed=0)
    sup1 = float(np.max(est.ratios[:1000]))
    sup2 = float(np.max(est.ratios))
    drift = (sup2 - sup1) / sup1
    elapsed = time.perf_counter() - start
    ok = d0_err <= D0_TOL and lemma_ok and mx2_ok and np.isfinite(sup2) and drift < DRIFT_TOL and elapsed < 30
    verdict(8, "inequality suite", ok,
            f"d0 rel err {d0_err:.1e} (tol {D0_TOL:g}); integral bound {lemma_ok}; mx2 {mx2_ok}; "
            f"bilinear sup ratio {sup1:.4f} -> {sup2:.4f} on 1000 -> 2000 pairs, drift {drift:.2%} (< 5%); {elapsed:.1f}s")


# ---------------------------------------------------------------- 9


def test_09_energy_budget_order():
    start = time.perf_counter()
    L = 8
    phi = random_solenoidal_field(11, L) * 2.0
    F = ForceModel(ForceExpansion(integer_sequence(1), (phi,)), shift=1.0)  # smooth for t >= 0
    u0 = random_solenoidal_field(12, L)
    res, holds = [], []
    # dt = 0.04 is still pre-asymptotic for the |k|^2 = 8 shell (order 3.7)
    for dt in (0.02, 0.01, 0.005):
        eb = energy_budget(integrate(SolverConfig(cutoff=L, dt=dt, t_end=2.0, record="steps"), u0, F))
        res.append(float(np.max(np.abs(eb.residual))))
        holds.append(eb.energy_ineq_holds)
    orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    elapsed = time.perf_counter() - start
    ok = all(abs(o - 4.0) <= ORDER_MARGIN for o in orders) and all(holds) and elapsed < 60
    verdict(9, "energy-equality residual converges at the scheme order (if_rk4)", ok,
            f"residuals {', '.join(f'{r:.2e}' for r in res)}, orders {orders[0]:.2f}, {orders[1]:.2f} "
            f"(4 +- {ORDER_MARGIN}); energy inequality {all(holds)}; {elapsed:.1f}s")


# ---------------------------------------------------------------- 10


def test_10_summability():
    start = time.perf_counter()
    b = coefficient_bounds([1.0, 1.0] + [0.0] * 30)
    n = np.arange(1, 33)
    vanish = bool(np.all(b.ds[n > 4] == 0.0)) and bool(np.all(b.ds[(n >= 2) & (n <= 4)] > 0))
    cs = np.arange(1, 201, dtype=float) ** -3.0
    d = coefficient_bounds(cs).ds
    m = np.arange(2, 201)
    ratio = float(np.max(d[1:] / (8.0 * m**-3.0)))
    rep = check_summability(cs)
    elapsed = time.perf_counter() - start
    ok = vanish and ratio <= 1.0 + 1e-12 and rep.verdict == "convergent" and elapsed < 1.0
    verdict(10, "coefficient bounds d_n", ok,
            f"c=(1,1,0,...): d_n = 0 for n > 4: {vanish}; c_n = n^-3: max d_n / (8 n^-3) = {ratio:.3f} for n <= 200; "
            f"series verdict {rep.verdict}; {elapsed:.3f}s")


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
