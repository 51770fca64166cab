"""Coefficient recursions linking force and solution power expansions.

Forward direction (force -> solution)::

    xi_n = A^{-1} ( phi_n + chi_n - sum_{mu_k + mu_m = mu_n} B(xi_k, xi_m) )

where ``chi_n = mu_p xi_p`` if ``mu_p + 1 == mu_n`` for some earlier ``p`` and 0
otherwise. The inverse direction solves the same identity for ``phi_n``.
All bilinear products are Galerkin-truncated at the expansion's field cutoff.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exponents import ExponentSequence, integer_sequence, pair_decompositions, shift_predecessor
from .spectral import GevreyParams, SpectralField, basis, bilinear_form, gevrey_norm

DEFAULT_K_HAT = 2.0


class DivergentExpansionWarning(UserWarning):
    """Coefficient norms grow at least factorially over the available prefix."""


@dataclass(frozen=True)
class _Expansion:
    seq: ExponentSequence
    terms: tuple[SpectralField, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if len(terms) != len(self.seq):
            raise ValueError(f"{len(terms)} fields for {len(self.seq)} exponents")
        if terms:
            c = max(t.cutoff for t in terms)
            terms = tuple(t.with_cutoff(c) for t in terms)
        object.__setattr__(self, "terms", terms)

    @property
    def cutoff(self) -> int:
        return self.terms[0].cutoff if self.terms else 1

    def __len__(self) -> int:
        return len(self.terms)

    def _stack(self) -> np.ndarray:
        return np.stack([t.coeffs for t in self.terms]) if self.terms else np.zeros((0, basis(1).size, 3), complex)

    def partial_sum(self, t: float, N: int | None = None) -> SpectralField:
        """sum_{n < N} term_n t^{-mu_n} (all terms by default)."""
        N = len(self) if N is None else N
        if N == 0:
            return SpectralField(self.cutoff)
        w = np.array([float(t) ** (-float(m)) for m in self.seq.mus[:N]])
        return SpectralField(self.cutoff, np.tensordot(w, self._stack()[:N], axes=1))


@dataclass(frozen=True)
class ForceExpansion(_Expansion):
    """Force coefficients ``phi_n`` aligned with ``seq.mus``."""

    @property
    def phis(self) -> tuple[SpectralField, ...]:
        return self.terms

    @classmethod
    def from_gamma_terms(cls, seq: ExponentSequence, psis: Sequence[SpectralField]) -> "ForceExpansion":
        """Place ``psis[j]`` at the position of ``gammas[j]``; every other phi is zero."""
        if len(psis) != len(seq.gammas):
            raise ValueError("need one psi per gamma")
        cutoff = max(p.cutoff for p in psis)
        phis = []
        for origin in seq.origins:
            if origin[0] == "gamma":
                phis.append(psis[origin[1]])
            else:
                phis.append(SpectralField(cutoff))
        return cls(seq, tuple(phis))


@dataclass(frozen=True)
class SolutionExpansion(_Expansion):
    """Solution coefficients ``xi_n`` aligned with ``seq.mus``."""

    @property
    def xis(self) -> tuple[SpectralField, ...]:
        return self.terms


def _inv_A(c: np.ndarray, ksq: np.ndarray) -> np.ndarray:
    return c / ksq[:, None]


def _B_sum(seq, n, xs, form) -> np.ndarray | None:
    acc = None
    for k, m in pair_decompositions(seq, n):
        b = form(xs[k], xs[m])
        acc = b if acc is None else acc + b
    return acc


def forward_recursion(force: ForceExpansion) -> SolutionExpansion:
    """Solution coefficients xi_n determined by the force coefficients phi_n."""
    seq, cutoff = force.seq, force.cutoff
    ksq = basis(cutoff).ksq.astype(float)
    form = bilinear_form(cutoff, cutoff, cutoff)
    xs: list[np.ndarray] = []
    for n, phi in enumerate(force.phis):
        acc = phi.coeffs.copy()
        p = shift_predecessor(seq, n)
        if p is not None:
            acc += float(seq.mus[p]) * xs[p]
        bsum = _B_sum(seq, n, xs, form)
        if bsum is not None:
            acc -= bsum
        xs.append(_inv_A(acc, ksq))
    return SolutionExpansion(seq, tuple(SpectralField(cutoff, x) for x in xs))


def inverse_recursion(sol: SolutionExpansion) -> ForceExpansion:
    """Force coefficients phi_n reproducing the given xi_n under :func:`forward_recursion`."""
    seq, cutoff = sol.seq, sol.cutoff
    ksq = basis(cutoff).ksq.astype(float)
    form = bilinear_form(cutoff, cutoff, cutoff)
    xs = [x.coeffs for x in sol.xis]
    phis = []
    for n in range(len(xs)):
        acc = xs[n] * ksq[:, None]
        p = shift_predecessor(seq, n)
        if p is not None:
            acc = acc - float(seq.mus[p]) * xs[p]
        bsum = _B_sum(seq, n, xs, form)
        if bsum is not None:
            acc = acc + bsum
        phis.append(SpectralField(cutoff, acc))
    return ForceExpansion(seq, tuple(phis))


@dataclass(frozen=True)
class CoefficientBounds:
    """``cs[i]`` is c_{i+1}; ``ds[i]`` is d_{i+1} = max_k c_k c_{i+1-k} (``ds[0]`` is undefined, NaN)."""

    cs: np.ndarray
    ds: np.ndarray


@dataclass
class SummabilityReport:
    bounds: CoefficientBounds
    partial_sums: np.ndarray  # partial_sums[i] = sum_{n=2}^{i+1} n d_n (partial_sums[0] = 0)
    verdict: str  # "convergent" | "divergent" | "inconclusive"
    tail_slope: float | None = None
    majorant: dict | None = None


def coefficient_bounds(cs: Sequence[float]) -> CoefficientBounds:
    c = np.asarray(cs, dtype=float)
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError("coefficient bounds must be finite and non-negative")
    d = np.full(len(c), np.nan)
    for i in range(1, len(c)):
        # n = i + 1, products c_k c_{n-k} for k = 1..n-1  ->  c[j] * c[i-1-j]
        d[i] = np.max(c[:i] * c[:i][::-1])
    return CoefficientBounds(c, d)


def check_summability(
    cs: Sequence[float],
    majorant: tuple[float, float, int] | None = None,
) -> SummabilityReport:
    """Compute d_n and the partial sums of sum_{n >= 2} n d_n with a tail verdict.

    The verdict is read off the finite prefix: "convergent" when the terms vanish
    identically past some point or decay faster than ``n^{-1.1}`` over the last
    half of the prefix, "divergent" when they decay no faster than ``1/n``.

    ``majorant=(lam, M, N0)`` additionally checks the polynomial-decay bound
    ``d_n <= 2^lam * c_max * M * n^{-lam}`` for ``n >= 2 N0``.
    """
    bounds = coefficient_bounds(cs)
    d = bounds.ds
    n = np.arange(1, len(d) + 1)
    terms = np.where(np.isnan(d), 0.0, n * np.nan_to_num(d))
    partial = np.cumsum(terms)

    verdict, slope = "inconclusive", None
    nz = np.nonzero(terms > 0)[0]
    if len(nz) == 0 or nz[-1] < len(terms) - max(3, len(terms) // 4):
        verdict = "convergent"
    else:
        tail = nz[nz >= len(terms) // 2]
        if len(tail) >= 4:
            slope = float(np.polyfit(np.log(n[tail]), np.log(terms[tail]), 1)[0])
            if slope < -1.1:
                verdict = "convergent"
            elif slope >= -1.0:
                verdict = "divergent"

    maj = None
    if majorant is not None:
        lam, M, N0 = majorant
        cmax = float(np.max(bounds.cs)) if len(bounds.cs) else 0.0
        sel = n >= 2 * N0
        sel &= ~np.isnan(d)
        bound = 2.0**lam * cmax * M * n[sel].astype(float) ** (-lam)
        maj = {
            "lam": lam,
            "M": M,
            "N0": N0,
            "c_max": cmax,
            "n": n[sel].tolist(),
            "holds": bool(np.all(d[sel] <= bound * (1 + 1e-12))),
            "max_ratio": float(np.max(d[sel] / bound)) if np.any(sel) else 0.0,
        }
    return SummabilityReport(bounds, partial, verdict, slope, maj)


@dataclass
class AdmissibleForce:
    """Force built from prescribed solution coefficients, with the bound chain and a round-trip check."""

    force: ForceExpansion
    zetas: SolutionExpansion
    params: GevreyParams
    K_hat: float
    phi_norms: np.ndarray
    cs: np.ndarray
    ds: np.ndarray
    bound: np.ndarray
    bound_holds: np.ndarray
    roundtrip_error: float
    summability: SummabilityReport = field(repr=False)


def construct_admissible_force(
    zetas: SolutionExpansion,
    params: GevreyParams,
    K_hat: float = DEFAULT_K_HAT,
    length: int | None = None,
    cutoff: int | None = None,
) -> AdmissibleForce:
    """Force coefficients phi_n (integer exponents) whose solution expansion is exactly ``zetas``.

    The prescribed list is padded with zero fields to ``length`` terms
    (default ``2 * len(zetas)``, beyond which every phi_n vanishes).
    ``cutoff`` embeds the coefficients at a larger Galerkin cutoff first; the
    bilinear products (and hence the force) are truncated there, so pass the
    solver's cutoff when the force will drive a simulation.
    """
    if not zetas.seq.is_integer_sequence():
        raise ValueError("force construction requires the integer exponent sequence mu_n = n")
    if params.alpha < Fraction(1, 2):
        raise ValueError("alpha must be >= 1/2")
    N = len(zetas)
    length = 2 * N if length is None else int(length)
    if length < N:
        raise ValueError("length must not truncate the prescribed coefficients")
    cutoff = max(zetas.cutoff, cutoff or 0)
    z = [x.with_cutoff(cutoff) for x in zetas.xis] + [SpectralField(cutoff)] * (length - N)
    padded = SolutionExpansion(integer_sequence(length), tuple(z))

    upper = params.shifted(1)
    cs = np.array([gevrey_norm(x, upper) for x in padded.xis])
    if not np.all(np.isfinite(cs)):
        raise ValueError("a prescribed coefficient has infinite working norm")
    force = inverse_recursion(padded)
    phi_norms = np.array([gevrey_norm(p, params) for p in force.phis])

    # the prescribed list is finite, so c_n = 0 beyond it and the tail of n d_n vanishes
    summ = check_summability(np.concatenate([cs, np.zeros(length)]))
    ds = summ.bounds.ds[:length]
    k_alpha = K_hat ** float(params.alpha)
    bound = cs.copy()
    for i in range(1, length):
        n = i + 1
        bound[i] = cs[i] + (n - 1) * cs[i - 1] + k_alpha * (n - 1) * ds[i]
    holds = phi_norms <= bound * (1 + 1e-12) + 1e-300

    back = forward_recursion(force)
    scale = max(max((np.max(np.abs(x.coeffs)) for x in padded.xis), default=0.0), 1e-300)
    err = max((float(np.max(np.abs(a.coeffs - b.coeffs))) for a, b in zip(back.xis, padded.xis)), default=0.0)
    return AdmissibleForce(force, padded, params, K_hat, phi_norms, cs, ds, bound, holds, err / scale, summ)


@dataclass
class SeriesDiagnostics:
    term_norms: np.ndarray  # |coef_n| t^{-mu_n} at the reported norm
    coef_norms: np.ndarray
    roots: np.ndarray  # |coef_n|^{1/mu_n}
    growth: np.ndarray  # |coef_{n+1}| / (mu_n |coef_n|)
    T1: float  # smallest t for which the root test guarantees convergence
    divergent: bool
    norm: GevreyParams


def series_diagnostics(exp: _Expansion, t: float, p: GevreyParams) -> SeriesDiagnostics:
    level = p.shifted(1) if isinstance(exp, SolutionExpansion) else p
    mus = np.array([float(m) for m in exp.seq.mus])
    coef = np.array([gevrey_norm(x, level) for x in exp.terms])
    with np.errstate(divide="ignore", invalid="ignore"):
        roots = np.where(coef > 0, coef ** (1.0 / mus), 0.0)
        growth = np.where(coef[:-1] > 0, coef[1:] / (mus[:-1] * coef[:-1]), np.nan)
    terms = coef * float(t) ** (-mus)
    half = roots[len(roots) // 2 :]
    T1 = float(np.max(half)) if len(half) else 0.0
    last = growth[-3:]
    divergent = len(last) == 3 and bool(np.all(last >= 1.0 - 1e-9))
    return SeriesDiagnostics(terms, coef, roots, growth, T1, divergent, level)


def evaluate_series(exp: _Expansion, t: float, p: GevreyParams) -> tuple[SpectralField, SeriesDiagnostics]:
    """Partial sum at time ``t`` plus term norms and root-test diagnostics.

    Warns with :class:`DivergentExpansionWarning` when the last three growth
    ratios ``|coef_{n+1}| / (mu_n |coef_n|)`` are all >= 1, the signature of
    factorial growth.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    diag = series_diagnostics(exp, t, p)
    if diag.divergent:
        warnings.warn(
            "coefficient norms grow factorially over the prefix; the series diverges for every t",
            DivergentExpansionWarning,
            stacklevel=2,
        )
    return exp.partial_sum(t), diag


def factorial_example(length: int, eps: float = 1.0, cutoff: int = 1) -> ForceExpansion:
    """phi_1 = eps e_2 cos(x_1) (times 2), phi_n = 0 otherwise; gives xi_n = (n-1)! phi_1."""
    from .spectral import shear_mode_field

    seq = integer_sequence(length)
    phi1 = shear_mode_field(eps, cutoff)
    return ForceExpansion(seq, (phi1,) + (SpectralField(cutoff),) * (length - 1))


def factorial(n: int) -> int:
    return math.factorial(n)
