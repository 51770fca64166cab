"""Independent reference implementations used by several test modules."""

from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np

from nsexpansion.spectral import SpectralField


def enumerate_semigroup(gammas, cutoff):
    """Every sum of p >= 1 gammas (with repetition) plus k >= 0, up to cutoff, by brute force."""
    gammas = [Fraction(g) for g in gammas]
    cutoff = Fraction(cutoff)
    out = set()
    pmax = int(cutoff / min(gammas))
    for p in range(1, pmax + 1):
        for combo in combinations_with_replacement(gammas, p):
            s = sum(combo)
            k = 0
            while s + k <= cutoff:
                out.add(s + k)
                k += 1
    return sorted(out)


def integer_case_forward(phis, ksq, form):
    """Straight-line integer-exponent recursion:
    xi_1 = A^-1 phi_1,  xi_n = A^-1 [phi_n + (n-1) xi_{n-1} - sum_{k=1}^{n-1} B(xi_k, xi_{n-k})]."""
    xs = []
    for n in range(1, len(phis) + 1):
        acc = np.array(phis[n - 1], dtype=complex)
        if n >= 2:
            acc = acc + (n - 1) * xs[n - 2]
            for k in range(1, n):
                acc = acc - form(xs[k - 1], xs[n - k - 1])
        xs.append(acc / ksq[:, None])
    return xs


def rounding_sensitivity(fn, mid, ref, rng, trials=3) -> float:
    """How far ``fn(mid)`` moves (relative to ``ref``) when ``mid`` is perturbed at the rounding level."""
    eps = np.finfo(float).eps
    base = fn(mid)
    scale = max(np.max(np.abs(x.coeffs)) for x in ref.terms)
    out = 0.0
    for _ in range(trials):
        bumped = type(mid)(mid.seq, tuple(
            SpectralField(x.cutoff, x.coeffs * (1 + eps * rng.standard_normal(x.coeffs.shape))) for x in mid.terms
        ))
        out = max(out, max(float(np.max(np.abs(a.coeffs - b.coeffs))) for a, b in zip(fn(bumped).terms, base.terms)) / scale)
    return out
