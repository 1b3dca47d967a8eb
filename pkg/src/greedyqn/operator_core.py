"""Dense symmetric/SPD operator arithmetic with O(n^2) rank-two inverse maintenance.

The central object is :class:`SpdState`: a symmetric positive-definite
operator G kept together with its inverse and a diagonal cache.  Rank-two
symmetric modifications of G are pushed through to the inverse with a
Woodbury update whose capacitance block is 2x2, so a full solve never costs
more than a matrix-vector product.  Floating-point drift of the maintained
inverse is audited periodically and repaired by dense refactorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatch,
    NonPositiveScale,
    NotPositiveDefinite,
    SingularCapacitance,
)

# Pivot threshold for Cholesky, relative to the largest diagonal entry.
PIVOT_RTOL = 1e-14

# Maintained-inverse audit policy: recompute drift every AUDIT_EVERY updates,
# refactorize densely once it exceeds DRIFT_LIMIT.
AUDIT_EVERY = 50
DRIFT_LIMIT = 1e-6


def _as_vector(u, n):
    v = np.asarray(u, dtype=float)
    if v.shape != (n,):
        raise DimensionMismatch(f"expected vector of length {n}, got shape {v.shape}")
    return v


def sym_rank2(p, q, c11, c12, c22):
    """Return c11*p p^T + c12*(p q^T + q p^T) + c22*q q^T, exactly symmetric.

    Assembled from outer products so that entry (i, j) and entry (j, i) are
    produced by the same floating-point operations.
    """
    out = c11 * np.outer(p, p)
    if c12 != 0.0:
        out += c12 * (np.outer(p, q) + np.outer(q, p))
    if c22 != 0.0:
        out += c22 * np.outer(q, q)
    return out


class DenseSymmetric:
    """Immutable dense symmetric matrix.

    Storage enforces symmetry: the lower triangle of the input is mirrored,
    so ``entries[i, j] == entries[j, i]`` holds bit-for-bit.
    """

    __slots__ = ("n", "entries")

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        lower = np.tril(a)
        a = lower + np.tril(a, -1).T
        a.setflags(write=False)
        object.__setattr__(self, "n", a.shape[0])
        object.__setattr__(self, "entries", a)

    def __setattr__(self, name, value):
        raise AttributeError("DenseSymmetric is immutable")

    @classmethod
    def _wrap(cls, a):
        # Trusted constructor for arrays that are already exactly symmetric.
        self = object.__new__(cls)
        a.setflags(write=False)
        object.__setattr__(self, "n", a.shape[0])
        object.__setattr__(self, "entries", a)
        return self

    @classmethod
    def identity(cls, n, scale=1.0):
        return cls._wrap(np.eye(n) * scale)

    @classmethod
    def from_diagonal(cls, d):
        return cls._wrap(np.diag(np.asarray(d, dtype=float)))

    def diagonal(self):
        return self.entries.diagonal().copy()

    def dump(self):
        """Plain-text debug dump: one row per line, 17 significant digits."""
        return "\n".join(
            " ".join(f"{v:.17g}" for v in row) for row in self.entries
        ) + "\n"

    def __repr__(self):
        return f"DenseSymmetric(n={self.n})"


def apply(m: DenseSymmetric, u) -> np.ndarray:
    """Matrix-vector product m @ u."""
    return m.entries @ _as_vector(u, m.n)


def quad_form(m: DenseSymmetric, u) -> float:
    """Quadratic form <m u, u>; positive for SPD m and u != 0."""
    v = _as_vector(u, m.n)
    return float(np.dot(m.entries @ v, v))


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L L^T reconstructing the source."""

    n: int
    lower: np.ndarray

    def solve(self, rhs):
        """Solve (L L^T) x = rhs by two triangular substitutions."""
        rhs = np.asarray(rhs, dtype=float)
        y = solve_triangular(self.lower, rhs, lower=True)
        return solve_triangular(self.lower, y, lower=True, trans="T")

    def inverse(self) -> np.ndarray:
        """Dense inverse of the factored matrix, symmetrized exactly."""
        inv = self.solve(np.eye(self.n))
        return (inv + inv.T) / 2.0


def factorize(m: DenseSymmetric) -> CholeskyFactor:
    """Cholesky-factorize an SPD matrix.

    Raises :class:`NotPositiveDefinite` when a pivot falls at or below
    ``PIVOT_RTOL * max(diagonal)``, which signals loss of definiteness.
    """
    a = m.entries
    n = m.n
    max_diag = float(np.max(a.diagonal())) if n else 0.0
    tiny = PIVOT_RTOL * max(max_diag, 0.0)
    low = np.zeros((n, n))
    for j in range(n):
        pivot = a[j, j] - np.dot(low[j, :j], low[j, :j])
        if pivot <= tiny:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at column {j} (threshold {tiny:.3e})"
            )
        ljj = np.sqrt(pivot)
        low[j, j] = ljj
        if j + 1 < n:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / ljj
    return CholeskyFactor(n=n, lower=low)


class SpdState:
    """An SPD operator G with maintained inverse and diagonal cache.

    All mutating operations keep ``g``, ``g_inv`` and ``diag`` consistent.
    Every :data:`AUDIT_EVERY` maintained updates the product G * G^{-1} is
    checked against the identity; drift beyond :data:`DRIFT_LIMIT` triggers a
    dense refactorization.  The value of the last audit is kept in ``drift``.

    A state is owned by a single solver; operations are not safe to call
    concurrently on the same instance.
    """

    __slots__ = ("n", "_g", "_g_inv", "diag", "update_count", "drift", "_since_audit")

    def __init__(self, g: DenseSymmetric, g_inv: DenseSymmetric | None = None):
        self.n = g.n
        self._g = np.array(g.entries)
        if g_inv is None:
            self._g_inv = factorize(g).inverse()
        else:
            if g_inv.n != g.n:
                raise DimensionMismatch("g and g_inv dimensions differ")
            self._g_inv = np.array(g_inv.entries)
        self.diag = self._g.diagonal().copy()
        self.update_count = 0
        self._since_audit = 0
        self.drift = self.audit()

    @classmethod
    def scaled_identity(cls, n: int, c: float) -> "SpdState":
        if c <= 0:
            raise NonPositiveScale(f"scale must be positive, got {c}")
        return cls._from_arrays(np.eye(n) * c, np.eye(n) / c)

    @classmethod
    def from_diagonal(cls, d) -> "SpdState":
        """Diagonal SPD state with exact reciprocal inverse entries."""
        d = np.asarray(d, dtype=float)
        if d.ndim != 1 or np.any(d <= 0):
            raise NotPositiveDefinite("diagonal entries must be positive")
        return cls._from_arrays(np.diag(d), np.diag(1.0 / d))

    @classmethod
    def _from_arrays(cls, g, g_inv) -> "SpdState":
        self = object.__new__(cls)
        self.n = g.shape[0]
        self._g = g
        self._g_inv = g_inv
        self.diag = self._g.diagonal().copy()
        self.update_count = 0
        self._since_audit = 0
        self.drift = 0.0
        return self

    @property
    def g(self) -> DenseSymmetric:
        return DenseSymmetric._wrap(self._g.copy())

    @property
    def g_inv(self) -> DenseSymmetric:
        return DenseSymmetric._wrap(self._g_inv.copy())

    def copy(self) -> "SpdState":
        dup = object.__new__(SpdState)
        dup.n = self.n
        dup._g = self._g.copy()
        dup._g_inv = self._g_inv.copy()
        dup.diag = self.diag.copy()
        dup.update_count = self.update_count
        dup._since_audit = self._since_audit
        dup.drift = self.drift
        return dup

    def apply(self, u) -> np.ndarray:
        """G @ u."""
        return self._g @ _as_vector(u, self.n)

    def solve(self, rhs) -> np.ndarray:
        """G^{-1} @ rhs via the maintained inverse (O(n^2))."""
        return self._g_inv @ _as_vector(rhs, self.n)

    def rank2_update(self, p, q, c11: float, c12: float, c22: float) -> "SpdState":
        """Apply G += c11*p p^T + c12*(p q^T + q p^T) + c22*q q^T in O(n^2).

        The inverse is maintained through the Woodbury identity with a 2x2
        capacitance block and the diagonal cache is refreshed from the new
        matrix.  Raises :class:`SingularCapacitance` when the update would
        make G singular.  The caller must ensure the updated operator stays
        SPD.
        """
        p = _as_vector(p, self.n)
        q = _as_vector(q, self.n)
        cmat = np.array([[c11, c12], [c12, c22]], dtype=float)

        # Capacitance K = I + C W with W = U^T G^{-1} U, U = [p q]; the
        # update is singular iff det K = det(G_new)/det(G) vanishes.
        y1 = self._g_inv @ p
        y2 = self._g_inv @ q
        w = np.array(
            [[np.dot(p, y1), np.dot(p, y2)], [np.dot(q, y1), np.dot(q, y2)]]
        )
        k = np.eye(2) + cmat @ w
        det = k[0, 0] * k[1, 1] - k[0, 1] * k[1, 0]
        scale = np.hypot(k[0, 0], k[0, 1]) * np.hypot(k[1, 0], k[1, 1])
        if abs(det) <= 1e-14 * scale:
            raise SingularCapacitance(
                f"capacitance determinant {det:.3e} below 1e-14 * {scale:.3e}"
            )

        # T = K^{-1} C is symmetric in exact arithmetic; symmetrize the
        # computed off-diagonal so the inverse stays exactly symmetric.
        kinv = np.array([[k[1, 1], -k[0, 1]], [-k[1, 0], k[0, 0]]]) / det
        t = kinv @ cmat
        t12 = (t[0, 1] + t[1, 0]) / 2.0

        self._g += sym_rank2(p, q, c11, c12, c22)
        self._g_inv -= sym_rank2(y1, y2, t[0, 0], t12, t[1, 1])
        self.diag = self._g.diagonal().copy()
        self._bump()
        return self

    def rescale(self, c: float) -> "SpdState":
        """G <- c*G, G^{-1} <- G^{-1}/c (c > 0)."""
        if not c > 0:
            raise NonPositiveScale(f"scale must be positive, got {c}")
        self._g *= c
        self._g_inv /= c
        self.diag = self._g.diagonal().copy()
        self._bump()
        return self

    def audit(self) -> float:
        """Recompute and store the max-abs residual of G @ G^{-1} - I."""
        resid = self._g @ self._g_inv
        resid[np.diag_indices(self.n)] -= 1.0
        self.drift = float(np.max(np.abs(resid))) if self.n else 0.0
        return self.drift

    def refactorize(self):
        """Rebuild the inverse from a fresh dense factorization of G."""
        chol = factorize(DenseSymmetric._wrap(self._g.copy()))
        self._g_inv = chol.inverse()
        self.audit()

    def _bump(self):
        self.update_count += 1
        self._since_audit += 1
        if self._since_audit >= AUDIT_EVERY:
            self._since_audit = 0
            if self.audit() > DRIFT_LIMIT:
                self.refactorize()

    def __repr__(self):
        return (
            f"SpdState(n={self.n}, updates={self.update_count}, "
            f"drift={self.drift:.2e})"
        )
