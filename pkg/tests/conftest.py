"""Shared fixtures and independent numerical oracles for the test suite.

The helpers here deliberately avoid the library's own code paths: matrix
products are re-derived with explicit loops or dense numpy/scipy calls, and
derivatives come from central finite differences, so they can serve as
oracles for the implementation under test.
"""

import numpy as np
import pytest


def random_spd(rng, n, cond=50.0):
    """Random SPD matrix with eigenvalues log-spaced in [1, cond]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.exp(rng.uniform(0.0, np.log(cond), n))
    eigs[0], eigs[-1] = 1.0, cond
    a = (q * eigs) @ q.T
    return (a + a.T) / 2.0


def random_dominating_pair(rng, n, spread=2.0):
    """(a, g) with a SPD and a <= g (g = a + PSD perturbation)."""
    a = random_spd(rng, n, cond=20.0)
    p = rng.standard_normal((n, n))
    g = a + (p @ p.T) / n * rng.uniform(0.1, spread)
    return a, (g + g.T) / 2.0


def central_diff_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def central_diff_hessian(grad, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        out[:, i] = (grad(x + e) - grad(x - e)) / (2.0 * h)
    return (out + out.T) / 2.0


def dense_broyden(g, a, u, tau):
    """Dense evaluation of the tau-update from its two defining pieces."""
    au, gu = a @ u, g @ u
    auu, guu = float(u @ au), float(u @ gu)
    sr1 = g - np.outer(gu - au, gu - au) / (guu - auu)
    dfp = (
        g
        - (np.outer(au, gu) + np.outer(gu, au)) / auu
        + (guu / auu + 1.0) * np.outer(au, au) / auu
    )
    return tau * dfp + (1.0 - tau) * sr1


def min_eig(sym):
    return float(np.linalg.eigvalsh((sym + sym.T) / 2.0)[0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
