"""Integrating-factor time stepping for the Galerkin Navier-Stokes system.

    du/dt + A u + P_L B(u, u) = P_L f(t)

and for the linear problem ``w' = -A w + xi + f(t)``. The Stokes part is
propagated exactly by ``exp(-h |k|^2)`` per mode (Lawson schemes), so purely
linear, unforced runs are exact for any step size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from .expansion import ForceExpansion
from .spectral import GevreyParams, SpectralField, basis, bilinear_form, gevrey_norms

SCHEMES = ("if_euler", "if_rk2", "if_rk4")
SCHEME_ORDER = {"if_euler": 1, "if_rk2": 2, "if_rk4": 4}
BLOWUP_FACTOR = 1e6
MAX_DT = 0.5


class BlowUpError(RuntimeError):
    """The L2 norm left the bounded regime expected of a forced, dissipative Galerkin run."""


# ---------------------------------------------------------------- forces


@dataclass(frozen=True)
class ForceModel:
    """Time-dependent force built from a finite power expansion.

    At effective time ``s = t + shift``:

    * ``s >= T0``: ``sum_n phi_n s^{-mu_n}`` plus the optional tail ``psi s^{-tail_exponent}``;
    * ``s < T0``, mode ``frozen_before``: the constant value of the same sum at ``s = T0``
      (for ``T0 = 1`` this is ``sum_n phi_n``);
    * ``s < T0``, mode ``series_from``: undefined; evaluating raises.
    """

    expansion: ForceExpansion | None = None
    T0: float = 1.0
    mode: str = "frozen_before"
    shift: float = 0.0
    tail: SpectralField | None = None
    tail_exponent: float | None = None

    def __post_init__(self):
        if self.T0 <= 0:
            raise ValueError("T0 must be positive")
        if self.mode not in ("frozen_before", "series_from"):
            raise ValueError(f"unknown start mode {self.mode!r}")
        if self.tail is not None:
            if self.tail_exponent is None:
                raise ValueError("tail requires tail_exponent")
            if self.expansion is not None and len(self.expansion) and self.tail_exponent <= float(self.expansion.seq.mus[-1]):
                raise ValueError("tail exponent must exceed the largest expansion exponent")

    @property
    def cutoff(self) -> int:
        cs = [1]
        if self.expansion is not None and len(self.expansion):
            cs.append(self.expansion.cutoff)
        if self.tail is not None:
            cs.append(self.tail.cutoff)
        return max(cs)

    def is_zero(self) -> bool:
        return (self.expansion is None or all(p.is_zero() for p in self.expansion.phis)) and (
            self.tail is None or self.tail.is_zero()
        )

    def compiled(self, cutoff: int) -> Callable[[float], np.ndarray]:
        """Fast evaluator returning the coefficient array projected onto ``|k|^2 <= cutoff``."""
        M = basis(cutoff).size
        if self.is_zero():
            zero = np.zeros((M, 3), complex)
            return lambda t: zero

        def fit(u: SpectralField) -> np.ndarray:
            # bases are nested prefixes, so truncation/embedding is slicing
            out = np.zeros((M, 3), complex)
            n = min(M, u.coeffs.shape[0])
            out[:n] = u.coeffs[:n]
            return out

        mus, stack = np.zeros(0), np.zeros((0, M, 3), complex)
        if self.expansion is not None and len(self.expansion):
            mus = np.array([float(m) for m in self.expansion.seq.mus])
            stack = np.stack([fit(p) for p in self.expansion.phis])
        if self.tail is not None:
            mus = np.append(mus, float(self.tail_exponent))
            stack = np.concatenate([stack, fit(self.tail)[None]])
        flat = stack.reshape(len(mus), -1)
        T0, shift, frozen = self.T0, self.shift, self.mode == "frozen_before"

        def f(t: float) -> np.ndarray:
            s = t + shift
            if s < T0:
                if not frozen:
                    raise ValueError(f"force undefined before T0={T0} (t={t})")
                s = T0
            return (s ** (-mus) @ flat).reshape(M, 3)

        return f


def evaluate_force(F: ForceModel, t: float, cutoff: int | None = None) -> SpectralField:
    if t < 0:
        raise ValueError("t must be non-negative")
    c = F.cutoff if cutoff is None else cutoff
    return SpectralField(c, F.compiled(c)(float(t)))


# ---------------------------------------------------------------- config and trajectories


def geometric_grid(t0: float, t_end: float, per_decade: int = 40) -> np.ndarray:
    """``t0`` (may be 0) followed by log-spaced times from ``max(t0, 1e-2)`` up to ``t_end``."""
    lo = max(t0, 1e-2)
    n = max(2, int(np.ceil(per_decade * np.log10(t_end / lo))) + 1)
    g = np.geomspace(lo, t_end, n)
    return np.unique(np.concatenate([[t0], g]))


@dataclass(frozen=True)
class SolverConfig:
    """``record`` is "geometric" (``per_decade`` points per decade), "steps" (every step) or an explicit grid."""

    cutoff: int
    dt: float = 1e-2
    t_end: float = 1.0
    scheme: str = "if_rk4"
    record: str | tuple = "geometric"
    per_decade: int = 40
    t_start: float = 0.0

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if not (0 < self.dt <= MAX_DT):
            raise ValueError(f"dt must lie in (0, {MAX_DT}]")
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if not isinstance(self.record, str):
            object.__setattr__(self, "record", tuple(float(x) for x in self.record))
            r = np.asarray(self.record)
            if len(r) == 0 or r.min() < self.t_start or r.max() > self.t_end:
                raise ValueError("record times must lie in [t_start, t_end]")
        elif self.record not in ("geometric", "steps"):
            raise ValueError(f"unknown record policy {self.record!r}")

    def record_times(self) -> np.ndarray:
        if self.record == "geometric":
            return geometric_grid(self.t_start, self.t_end, self.per_decade)
        if self.record == "steps":
            n = int(np.ceil((self.t_end - self.t_start) / self.dt - 1e-9))
            g = self.t_start + self.dt * np.arange(n + 1)
            g[-1] = self.t_end
            return g
        return np.unique(np.concatenate([[self.t_start], self.record]))

    def with_(self, **kw) -> "SolverConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return SolverConfig(**d)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # (T,)
    coeffs: np.ndarray  # (T, M, 3)
    config: SolverConfig
    force: ForceModel
    u0: SpectralField
    kind: str = "nse"  # or "linear"
    xi: SpectralField | None = None

    def __post_init__(self):
        self.times.setflags(write=False)
        self.coeffs.setflags(write=False)

    @property
    def cutoff(self) -> int:
        return self.config.cutoff

    def __len__(self) -> int:
        return len(self.times)

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.cutoff, self.coeffs[i])

    @property
    def samples(self) -> list[tuple[float, SpectralField]]:
        return [(float(t), self.field(i)) for i, t in enumerate(self.times)]

    def norms(self, p: GevreyParams) -> np.ndarray:
        return gevrey_norms(self.coeffs, self.cutoff, p)

    def at_times(self, times: Sequence[float]) -> np.ndarray:
        """Coefficients at recorded times (exact matches only)."""
        idx = np.searchsorted(self.times, times)
        idx = np.clip(idx, 0, len(self.times) - 1)
        if not np.allclose(self.times[idx], times, rtol=1e-12, atol=1e-12):
            raise KeyError("requested times are not on the record grid")
        return self.coeffs[idx]


# ---------------------------------------------------------------- stepping


def _lawson_step(scheme, u, t, h, N, E, Eh):
    """One Lawson step; ``E = exp(-h A)``, ``Eh = exp(-h A / 2)`` as column vectors."""
    if scheme == "if_euler":
        return E * (u + h * N(t, u))
    if scheme == "if_rk2":
        a = N(t, u)
        u2 = E * (u + h * a)
        b = N(t + h, u2)
        return E * (u + 0.5 * h * a) + 0.5 * h * b
    a = N(t, u)
    Eu = Eh * u
    b = N(t + 0.5 * h, Eh * (u + 0.5 * h * a))
    c = N(t + 0.5 * h, Eu + 0.5 * h * b)
    d = N(t + h, E * u + h * (Eh * c))
    return E * u + (h / 6.0) * (E * a + 2.0 * Eh * (b + c) + d)


def _run(config: SolverConfig, u0: SpectralField, F: ForceModel, rhs_factory, kind: str, xi=None) -> Trajectory:
    # the blow-up scale covers u0, the force at t_start and any constant source
    if u0.cutoff > config.cutoff:
        raise ValueError(f"u0 cutoff {u0.cutoff} exceeds solver cutoff {config.cutoff}")
    L = config.cutoff
    ksq = basis(L).ksq.astype(float)[:, None]
    force = F.compiled(L)
    N = rhs_factory(L, force)

    u = u0.with_cutoff(L).coeffs.copy()
    t = float(config.t_start)
    times = config.record_times()
    l2 = lambda c: float(np.sqrt(2.0 * np.sum(np.abs(c) ** 2)))
    src = 0.0 if xi is None else l2(xi.coeffs)
    scale = max(l2(u), l2(force(t)), src, 1e-300)

    out = np.empty((len(times), u.shape[0], 3), complex)
    out[0] = u
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for i in range(1, len(times)):
        tau = float(times[i])
        n = max(1, int(np.ceil((tau - t) / config.dt - 1e-9)))
        h = (tau - t) / n
        if h not in cache:
            cache[h] = (np.exp(-h * ksq), np.exp(-0.5 * h * ksq))
        E, Eh = cache[h]
        t_i = t
        for j in range(n):
            u = _lawson_step(config.scheme, u, t_i + j * h, h, N, E, Eh)
        t = tau
        norm = l2(u)
        if not np.isfinite(norm) or norm > BLOWUP_FACTOR * scale:
            raise BlowUpError(f"|u| = {norm:.3e} at t = {t:.6g} exceeds {BLOWUP_FACTOR:g} x initial scale {scale:.3e}")
        out[i] = u
    return Trajectory(np.asarray(times, float), out, config, F, u0, kind, xi)


def integrate(config: SolverConfig, u0: SpectralField, F: ForceModel) -> Trajectory:
    """Galerkin Navier-Stokes trajectory recorded on ``config.record_times()`` (hit exactly)."""

    def factory(L, force):
        form = bilinear_form(L, L, L)
        return lambda t, u: force(t) - form(u, u)

    return _run(config, u0, F, factory, "nse")


def integrate_linear(
    config: SolverConfig, xi: SpectralField, F: ForceModel, w0: SpectralField | None = None
) -> Trajectory:
    """Solution of ``w' = -A w + xi + f(t)``, ``w(t_start) = w0`` (zero by default)."""
    L = config.cutoff
    xic = xi.with_cutoff(max(L, xi.cutoff)).coeffs[: basis(L).size]

    def factory(L, force):
        return lambda t, u: xic + force(t)

    w0 = SpectralField(L) if w0 is None else w0
    return _run(config, w0, F, factory, "linear", xi)


# ---------------------------------------------------------------- energy


@dataclass
class EnergyBudget:
    times: np.ndarray
    residual: np.ndarray  # r(t)
    energy_ineq_lhs: np.ndarray  # |u(t)|^2
    energy_ineq_rhs: np.ndarray  # e^{-t}|u(0)|^2 + int e^{-(t-s)} |f(s)|^2 ds
    energy_ineq_holds: bool
    energy_ineq_min_margin: float  # min (rhs - lhs)/rhs over t > t0


def energy_budget(traj: Trajectory, F: ForceModel | None = None, slack: float = 1e-8) -> EnergyBudget:
    """Energy-equality residual (cumulative Simpson) and the exponential energy inequality.

    ``r(t) = |u(t)|^2/2 + int |A^{1/2} u|^2 - |u(t0)|^2/2 - int <f, u>``. The
    trajectory should be recorded on a uniform grid (``record="steps"``).
    Simpson's rule loses two orders on a panel containing a kink in ``f``
    (e.g. at ``T0`` of a frozen-start force), so order studies should use a
    smooth force such as a shifted series.
    """
    F = traj.force if F is None else F
    L = traj.cutoff
    ts = traj.times
    U = traj.coeffs
    ksq = basis(L).ksq.astype(float)
    force = F.compiled(L)
    Fs = np.stack([force(float(t)) for t in ts])
    if traj.kind == "linear" and traj.xi is not None:
        Fs = Fs + traj.xi.with_cutoff(L).coeffs[None]

    e = np.sum(np.abs(U) ** 2, axis=(1, 2))  # |u|^2 / 2
    diss = 2.0 * np.sum(ksq[None, :, None] * np.abs(U) ** 2, axis=(1, 2))
    work = 2.0 * np.real(np.sum(np.conj(Fs) * U, axis=(1, 2)))
    fsq = 2.0 * np.sum(np.abs(Fs) ** 2, axis=(1, 2))

    def cum(y):
        if len(ts) < 3:
            return np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(ts))])
        return cumulative_simpson(y, x=ts, initial=0.0)

    r = e + cum(diss) - e[0] - cum(work)

    # int_t0^t e^{-(t-s)} |f(s)|^2 ds, |f|^2 piecewise linear, kernel integrated exactly
    t0 = ts[0]
    g = np.zeros(len(ts))
    for i in range(1, len(ts)):
        h = ts[i] - ts[i - 1]
        eh = np.exp(-h)
        q = -np.expm1(-h) / h
        g[i] = eh * g[i - 1] + fsq[i] * (1.0 - q) + fsq[i - 1] * (q - eh)
    lhs = 2.0 * e
    rhs = np.exp(-(ts - t0)) * lhs[0] + g
    tol = slack * max(float(np.max(rhs)), 1e-300)
    holds = bool(np.all(lhs <= rhs + tol))
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(rhs[1:] > 0, (rhs[1:] - lhs[1:]) / rhs[1:], 0.0)
    return EnergyBudget(ts, r, lhs, rhs, holds, float(np.min(margin)) if len(margin) else 0.0)
