"""Remainder measurements, decay-rate fits, inequality probes and smallness constants."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate

from .expansion import SolutionExpansion
from .solver import SCHEME_ORDER, Trajectory
from .spectral import GevreyParams, SpectralField, bilinear_form, gevrey_norms, power_profile, random_solenoidal_field

FLOOR_REL = 1e-13  # double-precision floor relative to |u(t)|
FLOOR_MARGIN = 10.0  # values must exceed this multiple of the floor to enter a fit
MIN_POINTS = 8
RATE_MARGIN = 0.2
MAX_STDERR = 0.05
DEFAULT_RHO = Fraction(1, 2)


class FitError(ValueError):
    """A decay fit could not be performed on the requested data."""


# ---------------------------------------------------------------- elementary constants


def d0(a: float, s: float) -> float:
    """max_{x >= 0} x^a e^{-s x} = (a / (e s))^a."""
    if a <= 0 or s <= 0:
        raise ValueError("d0 requires a > 0 and s > 0")
    return (a / (math.e * s)) ** a


def d1(lam: float, s: float) -> float:
    """Constant in int_0^t e^{-s(t-tau)} (1+tau)^{-lam} dtau <= d1 (1+t)^{-lam}."""
    if lam <= 0 or s <= 0:
        raise ValueError("d1 requires lam > 0 and s > 0")
    return 2.0**lam * (d0(lam + 1, s) * math.exp(s) + 1.0 / s)


@dataclass(frozen=True)
class SmallnessConstants:
    K_hat: float
    alpha: Fraction
    lam: float
    c_star: float
    c0: float
    c1: float
    M1: float
    M2: float
    t_star: float | None

    def as_dict(self) -> dict:
        return {
            "K_hat": self.K_hat,
            "alpha": str(self.alpha),
            "lambda": self.lam,
            "c_star": self.c_star,
            "c0": self.c0,
            "c1": self.c1,
            "M1": self.M1,
            "M2": self.M2,
            "t_star": self.t_star,
        }


def smallness_constants(alpha, lam: float, K_hat: float, sigma: float | None = None) -> SmallnessConstants:
    alpha = Fraction(alpha) if not isinstance(alpha, float) else Fraction(alpha).limit_denominator(10**6)
    if alpha < Fraction(1, 2):
        raise ValueError("alpha must be >= 1/2")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if K_hat <= 1:
        raise ValueError("K_hat must exceed 1")
    if sigma is not None and sigma < 0:
        raise ValueError("sigma must be non-negative")
    c_star = 1.0 / (12.0 * K_hat ** float(alpha))
    M1 = d0(2 * lam, 1.0) * math.e
    M2 = d1(2 * lam, 1.0)
    return SmallnessConstants(
        K_hat,
        alpha,
        float(lam),
        c_star,
        c_star / max(1.0, math.sqrt(M1)),
        c_star / math.sqrt(3.0 * M2),
        M1,
        M2,
        None if sigma is None else 12.0 * sigma,
    )


# ---------------------------------------------------------------- remainders


@dataclass
class RemainderSeries:
    times: np.ndarray
    values: np.ndarray
    reference: np.ndarray  # |u(t)| in the same norm, for the floor
    N: int
    params: GevreyParams


def remainder_norms(
    traj: Trajectory, sol: SolutionExpansion, N: int, p: GevreyParams, rho=DEFAULT_RHO
) -> RemainderSeries:
    """|u(t) - sum_{n <= N} xi_n t^{-mu_n}| at (alpha + 1 - rho, sigma) over recorded t > 0."""
    rho = Fraction(rho) if not isinstance(rho, float) else Fraction(rho).limit_denominator(10**6)
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if not 0 <= N <= len(sol):
        raise ValueError(f"N must lie in [0, {len(sol)}]")
    if N and sol.cutoff != traj.cutoff:
        raise ValueError(f"expansion cutoff {sol.cutoff} differs from trajectory cutoff {traj.cutoff}")
    level = p.shifted(1 - rho)
    keep = traj.times > 0
    ts = traj.times[keep]
    U = traj.coeffs[keep]
    ref = gevrey_norms(U, traj.cutoff, level)
    if N == 0:
        vals = ref
    else:
        mus = np.array([float(m) for m in sol.seq.mus[:N]])
        stack = np.stack([x.coeffs for x in sol.xis[:N]])
        partial = np.einsum("tn,nmc->tmc", ts[:, None] ** (-mus[None, :]), stack)
        vals = gevrey_norms(U - partial, traj.cutoff, level)
    return RemainderSeries(ts, vals, ref, N, level)


def step_error_estimate(fine: Trajectory, coarse: Trajectory, p: GevreyParams) -> np.ndarray:
    """Richardson estimate of the time-stepping error of ``fine`` from a run with a larger step.

    Both runs must share the record grid; returns one value per recorded time.
    """
    if not np.array_equal(fine.times, coarse.times):
        raise ValueError("trajectories must share record times")
    r = coarse.config.dt / fine.config.dt
    order = SCHEME_ORDER[fine.config.scheme]
    diff = gevrey_norms(fine.coeffs - coarse.coeffs, fine.cutoff, p)
    return diff / (r**order - 1.0)


# ---------------------------------------------------------------- fits


@dataclass
class DecayFit:
    exponent: float
    stderr: float
    window: tuple[float, float]
    n_points: int
    curvature: float = 0.0  # quadratic coefficient in log-log
    curvature_t: float = 0.0
    slope_drift: float = 0.0
    non_power: bool = False
    flags: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "stderr": self.stderr,
            "window": list(self.window),
            "n_points": self.n_points,
            "curvature": self.curvature,
            "slope_drift": self.slope_drift,
            "non_power": self.non_power,
            "flags": list(self.flags),
        }


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = len(y) - X.shape[1]
    resid = y - X @ coef
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.pinv(X.T @ X)
    return coef, np.sqrt(np.maximum(np.diag(cov), 0.0))


def _windowed(times, values, window) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(times, float)
    v = np.asarray(values, float)
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    t, v = t[sel], v[sel]
    if len(t) < MIN_POINTS:
        raise FitError(f"only {len(t)} points in window [{lo:g}, {hi:g}] (need {MIN_POINTS})")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise FitError("non-positive or non-finite values in the fit window (floating-point floor reached?)")
    return t, v


def fit_power_decay(times, values, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares slope of log(value) against log(t); exponent = -slope.

    A quadratic log-log fit decides whether the data look like a power law: the
    fit is flagged ``non_power`` when the quadratic term is significant
    (t-statistic > 3) and the local slope drifts by more than 0.2 across the window.
    """
    times = np.asarray(times, float)
    if window is None:
        window = (times[-1] / 10.0, times[-1])
    t, v = _windowed(times, values, window)
    x, y = np.log(t), np.log(v)
    coef, se = _ols(np.column_stack([x, np.ones_like(x)]), y)
    fit = DecayFit(-float(coef[0]), float(se[0]), (float(t[0]), float(t[-1])), len(t))
    if len(t) >= 4:
        xc = x - x.mean()
        q, qse = _ols(np.column_stack([xc**2, xc, np.ones_like(x)]), y)
        fit.curvature = float(q[0])
        fit.curvature_t = float(abs(q[0]) / qse[0]) if qse[0] > 0 else (math.inf if q[0] != 0 else 0.0)
        fit.slope_drift = float(abs(2.0 * q[0] * (x[-1] - x[0])))
        fit.non_power = fit.curvature_t > 3.0 and fit.slope_drift > RATE_MARGIN
        if fit.non_power:
            fit.flags.append("non-power")
    return fit


@dataclass
class ExpFit:
    beta: float
    stderr: float
    gamma: float  # linear-in-t coefficient of log(e^t value) in the extended fit
    gamma_stderr: float
    poly_bound: bool
    window: tuple[float, float]
    n_points: int

    def as_dict(self) -> dict:
        return dict(self.__dict__, window=list(self.window))


def fit_exponential_remainder(
    times, values, window: tuple[float, float] | None = None, gamma_tol: float = 0.05
) -> ExpFit:
    """Fit log(value) + t = beta log t + c.

    The poly-bound check refits with an extra ``gamma * t`` term and passes when
    ``gamma <= gamma_tol``, i.e. ``e^t value`` grows no faster than a power of ``t``.
    """
    times = np.asarray(times, float)
    if window is None:
        window = (times[0], times[-1])
    t, v = _windowed(times, values, window)
    y = np.log(v) + t
    x = np.log(t)
    coef, se = _ols(np.column_stack([x, np.ones_like(x)]), y)
    c2, se2 = _ols(np.column_stack([x, t, np.ones_like(x)]), y)
    return ExpFit(
        float(coef[0]),
        float(se[0]),
        float(c2[1]),
        float(se2[1]),
        bool(c2[1] <= gamma_tol),
        (float(t[0]), float(t[-1])),
        len(t),
    )


def select_window(
    times: np.ndarray,
    values: np.ndarray,
    floor: np.ndarray,
    window: tuple[float, float] | None = None,
) -> tuple[tuple[float, float] | None, list[str]]:
    """Pick a fit window whose values sit safely above ``floor``.

    Starts from ``window`` (default: the last decade) and cuts it at the first
    sample within ``FLOOR_MARGIN`` of the floor. If fewer than ``MIN_POINTS``
    remain, falls back to the last decade before the series first reaches the
    floor and flags ``floor-limited``.
    """
    times = np.asarray(times, float)
    ok = np.asarray(values) > FLOOR_MARGIN * np.asarray(floor)
    lo, hi = window if window is not None else (times[-1] / 10.0, times[-1])
    sel = np.nonzero((times >= lo) & (times <= hi))[0]
    if len(sel) and np.all(ok[sel]):
        return (lo, hi), []
    flags = []
    good = []
    for i in sel:
        if not ok[i]:
            break
        good.append(i)
    if len(good) >= MIN_POINTS:
        return (float(times[good[0]]), float(times[good[-1]])), ["window-shrunk"]
    flags.append("floor-limited")
    bad = np.nonzero(~ok)[0]
    first_bad = bad[0] if len(bad) else len(times)
    if first_bad < MIN_POINTS:
        return None, flags + ["insufficient-points"]
    t_hit = times[first_bad - 1]
    idx = np.nonzero((times >= t_hit / 10.0) & (times <= t_hit))[0]
    if len(idx) < MIN_POINTS:
        idx = np.arange(first_bad - MIN_POINTS, first_bad)
    return (float(times[idx[0]]), float(times[idx[-1]])), flags


@dataclass
class RemainderFit:
    N: int
    alpha_eff: Fraction
    sigma: float
    rho: Fraction
    predicted: Fraction
    fit: DecayFit | None
    passed: bool
    status: str  # "pass" | "fail" | "floor-limited"
    flags: list[str]
    series: RemainderSeries = field(repr=False)

    def as_dict(self) -> dict:
        f = self.fit
        return {
            "N": self.N,
            "alpha_eff": str(self.alpha_eff),
            "sigma": self.sigma,
            "rho": float(self.rho),
            "exponent": None if f is None else f.exponent,
            "stderr": None if f is None else f.stderr,
            "window": None if f is None else list(f.window),
            "n_points": None if f is None else f.n_points,
            "predicted": str(self.predicted),
            "pass": self.passed,
            "status": self.status,
            "flags": list(self.flags),
        }


def analyze_remainder(
    traj: Trajectory,
    sol: SolutionExpansion,
    N: int,
    p: GevreyParams,
    rho=DEFAULT_RHO,
    window: tuple[float, float] | None = None,
    step_error: np.ndarray | None = None,
    two_sided: bool | None = None,
) -> RemainderFit:
    """Remainder series, floor-aware window, power fit and the rate verdict for one N.

    The predicted exponent is ``mu_{N+1}`` (the next exponent past the
    expansion when ``N == len(sol)``). ``N == 0`` uses a two-sided check
    (exponent within the margin, stderr below ``MAX_STDERR``) unless
    ``two_sided`` says otherwise; other N only require
    ``exponent - 3 stderr >= prediction - margin``.
    ``step_error`` (same norm, per recorded time t > 0) raises the floor.
    """
    series = remainder_norms(traj, sol, N, p, rho)
    predicted = sol.seq.mus[N] if N < len(sol) else sol.seq.next_exponent()
    floor = FLOOR_REL * series.reference
    if step_error is not None:
        floor = np.maximum(floor, np.asarray(step_error)[-len(floor) :])
    win, flags = select_window(series.times, series.values, floor, window)
    two_sided = (N == 0) if two_sided is None else two_sided
    if win is None:
        return RemainderFit(N, series.params.alpha, series.params.sigma, Fraction(rho), predicted, None, False, "floor-limited", flags, series)
    fit = fit_power_decay(series.times, series.values, win)
    flags = flags + fit.flags
    fit.flags = flags
    target = float(predicted)
    if two_sided:
        ok = abs(fit.exponent - target) <= RATE_MARGIN and fit.stderr < MAX_STDERR
    else:
        # one-sided claim: the lower confidence bound must clear the target, so a
        # remainder that decays faster than any power (large, loose slope) passes
        ok = fit.exponent - 3.0 * fit.stderr >= target - RATE_MARGIN
    status = "pass" if ok else ("floor-limited" if "floor-limited" in flags else "fail")
    return RemainderFit(N, series.params.alpha, series.params.sigma, Fraction(rho), predicted, fit, ok, status, flags, series)


# ---------------------------------------------------------------- inequality probes


@dataclass
class BilinearEstimate:
    K_lower: float
    ratios: np.ndarray  # per-sample ratio |B|/(|u||v|), in draw order
    running_sup: np.ndarray


def estimate_bilinear_constant(
    samples: int,
    cutoff: int,
    p: GevreyParams,
    seed: int = 0,
    fields: Sequence[tuple[SpectralField, SpectralField]] | None = None,
) -> BilinearEstimate:
    """Empirical lower bound (sup ratio)^{1/alpha} for the constant in the Gevrey bilinear estimate.

    Random pairs are drawn sequentially from one generator, so the first ``n``
    pairs do not depend on ``samples``. Each pair uses a random spectral slope
    to vary which shells dominate. Explicit ``fields`` replace the random draw.
    """
    if samples < 1 and fields is None:
        raise ValueError("samples must be >= 1")
    up = p.shifted(Fraction(1, 2))
    form = bilinear_form(cutoff, cutoff, cutoff)
    if fields is None:
        rng = np.random.default_rng(seed)
        pairs = []
        for _ in range(samples):
            slope = rng.uniform(-2.0, 0.5)
            u = random_solenoidal_field(rng, cutoff, power_profile(slope))
            slope = rng.uniform(-2.0, 0.5)
            v = random_solenoidal_field(rng, cutoff, power_profile(slope))
            pairs.append((u, v))
    else:
        pairs = [(u.with_cutoff(cutoff), v.with_cutoff(cutoff)) for u, v in fields]
    ratios = np.empty(len(pairs))
    for i, (u, v) in enumerate(pairs):
        b = form(u.coeffs, v.coeffs)
        den = gevrey_norms(u.coeffs, cutoff, up) * gevrey_norms(v.coeffs, cutoff, up)
        num = gevrey_norms(b, cutoff, p)
        ratios[i] = num / den if den > 0 else 0.0
    running = np.maximum.accumulate(ratios)
    power = 1.0 / float(p.alpha)
    return BilinearEstimate(float(running[-1]) ** power, ratios, running**power)


@dataclass
class IntegralProbe:
    lam: float
    sigma: float
    times: np.ndarray
    integrals: np.ndarray
    bounds: np.ndarray
    ratios: np.ndarray  # integral / bound
    holds: bool


def lemma_integral(lam: float, sigma: float, t: float) -> float:
    """int_0^t e^{-sigma(t-tau)} (1+tau)^{-lam} dtau by adaptive quadrature."""
    if t <= 0:
        return 0.0
    g = lambda tau: math.exp(-sigma * (t - tau)) * (1.0 + tau) ** (-lam)
    # the integrand is concentrated within a few 1/sigma of tau = t
    split = max(0.0, t - 50.0 / sigma)
    total = 0.0
    for a, b in ((0.0, split), (split, t)):
        if b <= a:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(g, a, b, limit=200, epsabs=0.0, epsrel=1e-12)
            except integrate.IntegrationWarning as exc:
                raise RuntimeError(f"quadrature failed on [{a}, {b}]: {exc}") from exc
        total += val
    return total


def integral_bound_probe(lam: float, sigma: float, t_grid: Sequence[float]) -> IntegralProbe:
    if lam <= 0 or sigma <= 0:
        raise ValueError("lambda and sigma must be positive")
    ts = np.asarray(t_grid, float)
    vals = np.array([lemma_integral(lam, sigma, t) for t in ts])
    bnd = d1(lam, sigma) * (1.0 + ts) ** (-lam)
    ratios = vals / bnd
    return IntegralProbe(lam, sigma, ts, vals, bnd, ratios, bool(np.all(vals <= bnd)))


def mx2_check(a: float, s: float, xs: Sequence[float]) -> tuple[bool, float]:
    """e^{-s x} <= d0(a, s) e^s (1+x)^{-a} on ``xs``; returns (holds, min ratio rhs/lhs)."""
    x = np.asarray(xs, float)
    log_lhs = -s * x
    log_rhs = math.log(d0(a, s)) + s - a * np.log1p(x)
    gap = log_rhs - log_lhs
    return bool(np.all(gap >= -1e-12)), float(np.exp(np.min(gap)))
