"""Truncated Fourier fields on the 2*pi-torus and the spectral operators acting on them.

A field with cutoff ``L`` lives on the wavevectors ``0 < |k|^2 <= L``. Only one
representative of every ``{k, -k}`` pair is stored (the lexicographically
positive one); the partner coefficient is its complex conjugate, so every field
is real by construction.

The L2 norm is identified with the l2 norm of the complex coefficients taken
over *all* modes, i.e. twice the sum over stored representatives. The volume
factor ``(2*pi)^(3/2)`` is absorbed into the coefficients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

DIV_TOL = 1e-12


class SolenoidalWarning(UserWarning):
    """Ingested coefficients were not divergence-free and have been projected."""


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**9)
    return Fraction(x)


def is_canonical(k: Sequence[int]) -> bool:
    """True when ``k`` is the lexicographically positive member of ``{k, -k}``."""
    for c in k:
        if c != 0:
            return c > 0
    return False


@dataclass(frozen=True)
class Basis:
    """Half-space wavevectors for one cutoff, ordered by (|k|^2, k)."""

    cutoff: int
    wavevectors: np.ndarray  # (M, 3) int
    ksq: np.ndarray  # (M,) int

    @property
    def size(self) -> int:
        return len(self.ksq)

    @property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.ksq.astype(float))

    def index(self, k: Sequence[int]) -> int:
        """Index of canonical wavevector ``k``; KeyError if absent."""
        return _index_map(self.cutoff)[tuple(int(c) for c in k)]

    def __hash__(self) -> int:
        return hash(self.cutoff)

    def __eq__(self, other) -> bool:
        return isinstance(other, Basis) and other.cutoff == self.cutoff


@lru_cache(maxsize=None)
def basis(cutoff: int) -> Basis:
    if cutoff < 1:
        raise ValueError(f"cutoff must be a positive integer, got {cutoff}")
    r = int(np.floor(np.sqrt(cutoff)))
    g = np.arange(-r, r + 1)
    grid = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    ksq = (grid**2).sum(axis=1)
    keep = (ksq > 0) & (ksq <= cutoff) & np.array([is_canonical(k) for k in grid])
    ks = grid[keep]
    sq = ksq[keep]
    order = np.lexsort((ks[:, 2], ks[:, 1], ks[:, 0], sq))
    ks = np.ascontiguousarray(ks[order])
    sq = np.ascontiguousarray(sq[order])
    ks.setflags(write=False)
    sq.setflags(write=False)
    return Basis(int(cutoff), ks, sq)


@lru_cache(maxsize=None)
def _index_map(cutoff: int) -> dict:
    return {tuple(int(c) for c in k): i for i, k in enumerate(basis(cutoff).wavevectors)}


def _project(ks: np.ndarray, ksq: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Apply I - k k^T / |k|^2 row-wise."""
    dot = np.einsum("ij,ij->i", coeffs, ks)
    return coeffs - ks * (dot / ksq)[:, None]


def _embed(coeffs: np.ndarray, src: int, dst: int) -> np.ndarray:
    """Move half-space coefficients from cutoff ``src`` to cutoff ``dst`` (truncating or zero-padding)."""
    if src == dst:
        return coeffs
    b_src, b_dst = basis(src), basis(dst)
    out = np.zeros((b_dst.size, 3), dtype=complex)
    if dst > src:
        # bases are ordered by |k|^2 first, so the smaller basis is a prefix
        out[: b_src.size] = coeffs
    else:
        out[:] = coeffs[: b_dst.size]
    return out


@dataclass(frozen=True, eq=False)
class GevreyParams:
    """Sobolev exponent ``alpha`` (rational) and Gevrey radius ``sigma >= 0``."""

    alpha: Fraction = Fraction(0)
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_fraction(self.alpha))
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")

    def shifted(self, da) -> "GevreyParams":
        return GevreyParams(self.alpha + _as_fraction(da), self.sigma)

    def __eq__(self, other):
        return isinstance(other, GevreyParams) and (self.alpha, self.sigma) == (other.alpha, other.sigma)

    def __hash__(self):
        return hash((self.alpha, self.sigma))

    def __repr__(self):
        return f"GevreyParams(alpha={self.alpha}, sigma={self.sigma})"


class SpectralField:
    """Immutable real vector field stored as half-space Fourier coefficients.

    ``coeffs[i]`` is the complex 3-vector at ``basis(cutoff).wavevectors[i]``.
    The constructor does not validate; use :meth:`from_modes` or the loaders
    to ingest external data with invariant checks.
    """

    __slots__ = ("cutoff", "coeffs")

    def __init__(self, cutoff: int, coeffs: np.ndarray | None = None):
        b = basis(int(cutoff))
        if coeffs is None:
            arr = np.zeros((b.size, 3), dtype=complex)
        else:
            arr = np.array(coeffs, dtype=complex)
            if arr.shape != (b.size, 3):
                raise ValueError(f"coeffs shape {arr.shape} does not match cutoff {cutoff} ({b.size} modes)")
        arr.setflags(write=False)
        object.__setattr__(self, "cutoff", int(cutoff))
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("SpectralField is immutable")

    def __reduce__(self):
        return (SpectralField, (self.cutoff, np.array(self.coeffs)))

    @classmethod
    def zeros(cls, cutoff: int) -> "SpectralField":
        return cls(cutoff)

    @classmethod
    def from_modes(
        cls,
        cutoff: int,
        modes: Mapping[Sequence[int], Sequence[complex]],
        strict: bool = False,
    ) -> "SpectralField":
        """Build a field from ``{k: u_hat(k)}``.

        Either member of a ``{k, -k}`` pair may be given (a non-canonical key is
        conjugated onto its partner). Coefficients failing the divergence-free
        check are Leray-projected with a :class:`SolenoidalWarning`, or rejected
        when ``strict``.
        """
        b = basis(cutoff)
        idx = _index_map(b.cutoff)
        coeffs = np.zeros((b.size, 3), dtype=complex)
        seen = {}
        for k, vec in modes.items():
            k = tuple(int(c) for c in k)
            if k == (0, 0, 0):
                raise ValueError("zero mode is excluded (fields have zero mean)")
            v = np.asarray(vec, dtype=complex).reshape(3)
            if not is_canonical(k):
                k = tuple(-c for c in k)
                v = np.conj(v)
            if k not in idx:
                raise ValueError(f"wavevector {k} lies outside cutoff {cutoff}")
            if k in seen and not np.allclose(seen[k], v, rtol=1e-12, atol=0):
                raise ValueError(f"conflicting coefficients given for +/-{k}")
            seen[k] = v
            coeffs[idx[k]] = v
        return cls(cutoff, coeffs).checked(strict=strict)

    def checked(self, strict: bool = False) -> "SpectralField":
        """Return self if divergence-free within tolerance, else the projection (or raise when strict)."""
        b = basis(self.cutoff)
        div = np.abs(np.einsum("ij,ij->i", self.coeffs, b.wavevectors))
        scale = np.linalg.norm(self.coeffs, axis=1) * b.kmag
        bad = div > DIV_TOL * scale
        if not np.any(bad):
            return self
        worst = tuple(b.wavevectors[np.argmax(np.where(bad, div, 0))])
        if strict:
            raise ValueError(f"field is not divergence-free (worst mode {worst})")
        warnings.warn(f"projecting non-solenoidal coefficients (worst mode {worst})", SolenoidalWarning, stacklevel=2)
        return leray_project(self)

    @property
    def basis(self) -> Basis:
        return basis(self.cutoff)

    def __getitem__(self, k) -> np.ndarray:
        k = tuple(int(c) for c in k)
        if k == (0, 0, 0):
            return np.zeros(3, dtype=complex)
        idx = _index_map(self.cutoff)
        if is_canonical(k):
            i = idx.get(k)
            return self.coeffs[i].copy() if i is not None else np.zeros(3, dtype=complex)
        i = idx.get(tuple(-c for c in k))
        return np.conj(self.coeffs[i]) if i is not None else np.zeros(3, dtype=complex)

    def modes(self, nonzero: bool = True) -> Iterator[tuple[tuple[int, int, int], np.ndarray]]:
        """Iterate ``(k, u_hat(k))`` over stored representatives."""
        for k, v in zip(self.basis.wavevectors, self.coeffs):
            if nonzero and not np.any(v):
                continue
            yield tuple(int(c) for c in k), v

    def with_cutoff(self, cutoff: int) -> "SpectralField":
        """Zero-pad to a larger cutoff or truncate (P_cutoff) to a smaller one."""
        return SpectralField(cutoff, _embed(self.coeffs, self.cutoff, int(cutoff)))

    def _coerce(self, other: "SpectralField") -> tuple[np.ndarray, np.ndarray, int]:
        if not isinstance(other, SpectralField):
            return NotImplemented
        c = max(self.cutoff, other.cutoff)
        return _embed(self.coeffs, self.cutoff, c), _embed(other.coeffs, other.cutoff, c), c

    def __add__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        a, b, c = self._coerce(other)
        return SpectralField(c, a + b)

    def __sub__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        a, b, c = self._coerce(other)
        return SpectralField(c, a - b)

    def __mul__(self, s):
        if isinstance(s, SpectralField):
            return NotImplemented
        return SpectralField(self.cutoff, self.coeffs * float(s))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return SpectralField(self.cutoff, self.coeffs / float(s))

    def __neg__(self):
        return SpectralField(self.cutoff, -self.coeffs)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def allclose(self, other: "SpectralField", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        a, b, _ = self._coerce(other)
        return bool(np.allclose(a, b, rtol=rtol, atol=atol))

    def __repr__(self):
        nz = int(np.count_nonzero(np.any(self.coeffs != 0, axis=1)))
        return f"SpectralField(cutoff={self.cutoff}, nonzero_modes={nz})"


def inner(u: SpectralField, v: SpectralField) -> float:
    """L2 inner product <u, v> (real), summing each stored mode and its conjugate."""
    a, b, _ = u._coerce(v)
    return float(2.0 * np.real(np.sum(a * np.conj(b))))


def _weights(b: Basis, alpha, sigma: float) -> np.ndarray:
    return b.ksq.astype(float) ** float(alpha) * np.exp(sigma * b.kmag)


def gevrey_norm(u: SpectralField, p: GevreyParams) -> float:
    """|A^alpha e^{sigma A^{1/2}} u|."""
    w = _weights(u.basis, p.alpha, p.sigma)
    amp2 = np.sum(np.abs(u.coeffs) ** 2, axis=1)
    return float(np.sqrt(2.0 * np.sum(w**2 * amp2)))


def gevrey_norms(coeffs: np.ndarray, cutoff: int, p: GevreyParams) -> np.ndarray:
    """Vectorised :func:`gevrey_norm` over a stack of coefficient arrays ``(..., M, 3)``."""
    w = _weights(basis(cutoff), p.alpha, p.sigma)
    amp2 = np.sum(np.abs(coeffs) ** 2, axis=-1)
    return np.sqrt(2.0 * np.sum(w**2 * amp2, axis=-1))


def spectral_multiplier(u: SpectralField, a, s: float = 0.0) -> SpectralField:
    """A^a e^{s A^{1/2}} u, i.e. multiply mode k by |k|^{2a} e^{s|k|}."""
    return SpectralField(u.cutoff, u.coeffs * _weights(u.basis, a, s)[:, None])


def heat_multiplier(u: SpectralField, a, tau: float) -> SpectralField:
    """A^a e^{-tau A} u, i.e. multiply mode k by |k|^{2a} e^{-tau|k|^2}."""
    b = u.basis
    m = b.ksq.astype(float) ** float(a) * np.exp(-tau * b.ksq)
    return SpectralField(u.cutoff, u.coeffs * m[:, None])


def apply_A(u: SpectralField, power=1) -> SpectralField:
    return spectral_multiplier(u, power, 0.0)


def leray_project(raw: SpectralField) -> SpectralField:
    b = raw.basis
    return SpectralField(raw.cutoff, _project(b.wavevectors.astype(float), b.ksq.astype(float), raw.coeffs))


def eigen_projection(u: SpectralField, n: int, kind: str = "P") -> SpectralField:
    """R_n (keep |k|^2 == n) or P_n (keep |k|^2 <= n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ksq = u.basis.ksq
    if kind == "R":
        mask = ksq == n
    elif kind == "P":
        mask = ksq <= n
    else:
        raise ValueError(f"kind must be 'R' or 'P', got {kind!r}")
    return SpectralField(u.cutoff, np.where(mask[:, None], u.coeffs, 0))


class BilinearForm:
    """Galerkin-truncated B(u, v) = P((u . grad) v) on raw coefficient arrays.

    All triads ``m + n = k`` with ``m`` in the (full) support of ``u``, ``n`` in
    that of ``v`` and ``k`` a stored output mode are listed once at construction;
    evaluation is a gather, a product and a sparse sum.
    """

    def __init__(self, cutoff_u: int, cutoff_v: int, cutoff_out: int):
        self.cutoff_u, self.cutoff_v, self.cutoff_out = int(cutoff_u), int(cutoff_v), int(cutoff_out)
        bu, bv, bo = basis(self.cutoff_u), basis(self.cutoff_v), basis(self.cutoff_out)
        ku_full = np.concatenate([bu.wavevectors, -bu.wavevectors])
        kv_full = np.concatenate([bv.wavevectors, -bv.wavevectors])

        r = int(np.floor(np.sqrt(self.cutoff_v)))
        span = 2 * r + 1
        lookup = -np.ones((span, span, span), dtype=np.int64)
        lookup[tuple((kv_full + r).T)] = np.arange(len(kv_full))

        n = bo.wavevectors[:, None, :] - ku_full[None, :, :]  # (O, 2Mu, 3)
        inside = np.all(np.abs(n) <= r, axis=-1)
        jb = np.full(inside.shape, -1, dtype=np.int64)
        jb[inside] = lookup[tuple((n[inside] + r).T)]
        io, ia = np.nonzero(jb >= 0)
        ib = jb[io, ia]

        self.ia, self.ib, self.io = ia, ib, io
        self.n_triads = len(io)
        self._kv_full_t = np.ascontiguousarray(kv_full.T.astype(float))
        self._n_v = len(kv_full)
        # u_hat(m) . n is read from the dense (2Mu, 2Mv) table of all dot products
        self._gather = ia * len(kv_full) + ib
        self._scatter = io * len(kv_full) + ib
        self._shape = (bo.size, len(kv_full))
        self._ko = bo.wavevectors.astype(float)
        self._ksq = bo.ksq.astype(float)

    def __call__(self, U: np.ndarray, V: np.ndarray) -> np.ndarray:
        Uf = np.concatenate([U, np.conj(U)])
        Vf = np.concatenate([V, np.conj(V)]) if V is not U else Uf
        dots = (Uf @ self._kv_full_t).ravel().take(self._gather)
        inter = np.zeros(self._shape[0] * self._shape[1], dtype=complex)
        inter[self._scatter] = 1j * dots
        out = inter.reshape(self._shape) @ Vf
        return _project(self._ko, self._ksq, out)


@lru_cache(maxsize=64)
def bilinear_form(cutoff_u: int, cutoff_v: int, cutoff_out: int) -> BilinearForm:
    return BilinearForm(cutoff_u, cutoff_v, cutoff_out)


def bilinear_B(u: SpectralField, v: SpectralField, cutoff_out: int | None = None) -> SpectralField:
    """B(u, v) truncated to ``|k|^2 <= cutoff_out`` (default: the larger input cutoff)."""
    if cutoff_out is None:
        cutoff_out = max(u.cutoff, v.cutoff)
    form = bilinear_form(u.cutoff, v.cutoff, int(cutoff_out))
    return SpectralField(cutoff_out, form(u.coeffs, v.coeffs))


def power_profile(exponent: float = -1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Amplitude profile |k|^(2*exponent) as a function of |k|^2."""

    def profile(ksq):
        return np.asarray(ksq, dtype=float) ** exponent

    return profile


def random_solenoidal_field(
    seed,
    cutoff: int,
    spectrum_profile: Callable[[np.ndarray], np.ndarray] | None = None,
) -> SpectralField:
    """Gaussian random field with per-mode amplitude ``spectrum_profile(|k|^2)``, Leray-projected.

    ``seed`` may be an int or a ``numpy.random.Generator`` (consumed in place).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    b = basis(cutoff)
    profile = spectrum_profile if spectrum_profile is not None else power_profile(-1.0)
    amp = np.broadcast_to(np.asarray(profile(b.ksq), dtype=float), (b.size,))
    z = rng.standard_normal((b.size, 3)) + 1j * rng.standard_normal((b.size, 3))
    raw = SpectralField(cutoff, z * amp[:, None] / np.sqrt(2.0))
    return leray_project(raw)


def shear_mode_field(eps: float = 1.0, cutoff: int = 1) -> SpectralField:
    """eps * e_2 (e^{i x_1} + e^{-i x_1}): a shear mode, so B(phi, phi) = 0."""
    return SpectralField.from_modes(cutoff, {(1, 0, 0): (0.0, eps, 0.0)}, strict=True)


def field_to_dict(u: SpectralField) -> dict:
    modes = []
    for k, v in u.modes(nonzero=True):
        modes.append({"k": list(k), "re": [float(x) for x in v.real], "im": [float(x) for x in v.imag]})
    return {"cutoff": u.cutoff, "modes": modes}


def field_from_dict(data: Mapping, strict: bool = False) -> SpectralField:
    """Parse the field JSON object; conjugates are implied, invariants verified."""
    try:
        cutoff = int(data["cutoff"])
        modes = {}
        for m in data["modes"]:
            k = tuple(int(c) for c in m["k"])
            if len(k) != 3:
                raise ValueError(f"wavevector must have 3 components, got {m['k']}")
            re = np.asarray(m["re"], dtype=float)
            im = np.asarray(m.get("im", [0.0, 0.0, 0.0]), dtype=float)
            if k in modes or tuple(-c for c in k) in modes:
                raise ValueError(f"duplicate mode {k}")
            modes[k] = re + 1j * im
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed field object: {exc}") from exc
    return SpectralField.from_modes(cutoff, modes, strict=strict)
