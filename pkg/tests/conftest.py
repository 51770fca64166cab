import sys

import numpy as np
import pytest

from nsexpansion.spectral import basis


def physical(coeffs: np.ndarray, cutoff: int, n: int = 16) -> np.ndarray:
    """Real field values (3, n, n, n) on the uniform grid, from half-space coefficients."""
    hat = np.zeros((3, n, n, n), complex)
    for k, c in zip(basis(cutoff).wavevectors, coeffs):
        hat[(slice(None),) + tuple(k % n)] = c
        hat[(slice(None),) + tuple((-k) % n)] = np.conj(c)
    return np.real(np.fft.ifftn(hat, axes=(1, 2, 3)) * n**3)


def b_oracle(u: np.ndarray, v: np.ndarray, cu: int, cv: int, cout: int, n: int = 16) -> np.ndarray:
    """Leray-projected (u . grad) v computed in physical space with FFTs."""
    U = physical(u, cu, n)
    ks = np.fft.fftfreq(n, 1.0 / n)
    KX, KY, KZ = np.meshgrid(ks, ks, ks, indexing="ij")
    K = np.stack([KX, KY, KZ])
    vhat = np.fft.fftn(physical(v, cv, n), axes=(1, 2, 3))
    adv = np.zeros((3, n, n, n))
    for j in range(3):
        dv = np.real(np.fft.ifftn(1j * K[j][None] * vhat, axes=(1, 2, 3)))
        adv += U[j][None] * dv
    ahat = np.fft.fftn(adv, axes=(1, 2, 3)) / n**3
    b = basis(cout)
    out = np.array([ahat[(slice(None),) + tuple(k % n)] for k in b.wavevectors])
    kf = b.wavevectors.astype(float)
    dot = np.einsum("ij,ij->i", out, kf)
    return out - kf * (dot / b.ksq)[:, None]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
