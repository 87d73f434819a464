"""Diagonal-weighted Hilbert spaces, maps between them, and their s-numbers.

Every space here is R^d with inner product <x, y> = sum_i w_i x_i y_i.  A map
T: (R^n, w) -> (R^m, v) is handled through its normalized matrix
diag(sqrt v) @ M @ diag(1/sqrt w), which is the matrix of T between the
corresponding Euclidean spaces.  Singular values of that matrix are at the
same time the Kolmogorov, approximation and Hilbert numbers of T.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

RANK_RTOL = 1e-12
JACOBI_TOL = 1e-14


@dataclass(frozen=True)
class WeightedHilbert:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size < 1:
            raise ValueError("a weighted space needs dimension >= 1")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def standard(cls, dim):
        return cls(np.ones(dim))

    @property
    def dim(self):
        return self.weights.size

    def inner(self, x, y):
        return float(np.sum(self.weights * np.asarray(x, float) * np.asarray(y, float)))

    def norm(self, x):
        """Norm of a vector, or row-wise norms of a stack of vectors."""
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.sum(self.weights * x * x, axis=-1))

    def dilate(self, r):
        """The space whose unit ball is ``r`` times this unit ball."""
        return WeightedHilbert(self.weights / (r * r))

    def __eq__(self, other):
        return isinstance(other, WeightedHilbert) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())


@dataclass(frozen=True)
class Seminorm:
    """p(x) = sqrt(sum_i w_i x_i^2) with w_i >= 0; zero weights are p-null directions."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size < 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("seminorm weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.weights.size

    def norm(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.sum(self.weights * x * x, axis=-1))

    def scaled(self, c):
        """The seminorm c * p."""
        return Seminorm(self.weights * (c * c))


@dataclass(frozen=True)
class LinearMap:
    matrix: np.ndarray
    domain: WeightedHilbert
    codomain: WeightedHilbert

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2:
            raise DimensionMismatch("matrix must be two-dimensional")
        if m.shape != (self.codomain.dim, self.domain.dim):
            raise DimensionMismatch(
                f"matrix shape {m.shape} does not match spaces "
                f"({self.codomain.dim}, {self.domain.dim})"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def euclidean(cls, matrix):
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(m, WeightedHilbert.standard(m.shape[1]), WeightedHilbert.standard(m.shape[0]))

    @classmethod
    def identity(cls, domain, codomain):
        if domain.dim != codomain.dim:
            raise DimensionMismatch("identity needs spaces of equal dimension")
        return cls(np.eye(domain.dim), domain, codomain)

    def normalized(self):
        return (
            np.sqrt(self.codomain.weights)[:, None]
            * self.matrix
            / np.sqrt(self.domain.weights)[None, :]
        )

    def __matmul__(self, other):
        """Composition ``self o other``."""
        if other.codomain != self.domain:
            raise DimensionMismatch("maps are not composable")
        return LinearMap(self.matrix @ other.matrix, other.domain, self.codomain)


def compose(maps):
    """Compose maps given in application order: maps[-1] o ... o maps[0]."""
    maps = list(maps)
    out = maps[0]
    for m in maps[1:]:
        out = m @ out
    return out


def jacobi_svd_values(a, tol=JACOBI_TOL, max_sweeps=60):
    """Singular values of a real matrix by one-sided Jacobi rotations.

    Columns are orthogonalized pairwise in cyclic order until every pair has
    relative inner product below ``tol``.  Returns min(shape) values sorted
    descending.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    if a.shape[0] < a.shape[1]:
        a = a.T.copy()
    n = a.shape[1]
    if n == 0:
        return np.zeros(0)
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                ai = a[:, i]
                aj = a[:, j]
                alpha = ai @ ai
                beta = aj @ aj
                gamma = ai @ aj
                scale = np.sqrt(alpha * beta)
                if scale == 0.0 or abs(gamma) <= tol * scale:
                    continue
                off = max(off, abs(gamma) / scale)
                zeta = (beta - alpha) / (2.0 * gamma)
                if abs(zeta) > 1e150:
                    t = 0.5 / zeta
                else:
                    t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_i = c * ai - s * aj
                new_j = s * ai + c * aj
                a[:, i] = new_i
                a[:, j] = new_j
        if off <= tol:
            break
    return np.sort(np.linalg.norm(a, axis=0))[::-1]


def singular_values(T):
    return jacobi_svd_values(T.normalized())


def numerical_rank(sv):
    sv = np.asarray(sv)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_RTOL * sv[0]))


def hs_norm(T):
    sv = singular_values(T)
    return float(np.sqrt(np.sum(sv * sv)))


def operator_norm(T):
    sv = singular_values(T)
    return float(sv[0]) if sv.size else 0.0


def _volume_from_sv(sv, n):
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > sv.size or numerical_rank(sv) < n:
        return 0.0
    return float(np.exp(np.mean(np.log(sv[:n]))))


def volume_number(T, n):
    """n-th volume number: geometric mean of the first n singular values."""
    return _volume_from_sv(singular_values(T), n)


def volume_numbers(T, n_max=None):
    sv = singular_values(T)
    n_max = sv.size if n_max is None else n_max
    return np.array([_volume_from_sv(sv, n) for n in range(1, n_max + 1)])


@dataclass(frozen=True)
class SNumberReport:
    singular_values: np.ndarray
    volume_numbers: np.ndarray
    hs_norm: float
    rank: int = field(default=0)


def s_numbers(T):
    sv = singular_values(T)
    rank = numerical_rank(sv)
    vols = np.array([_volume_from_sv(sv, n) for n in range(1, rank + 1)])
    return SNumberReport(sv, vols, float(np.sqrt(np.sum(sv * sv))), rank)


def volume_number_bruteforce(T, n, trials, seed, refine_sweeps=200):
    """Estimate v_n(T) by searching n-dimensional subspaces of the domain.

    For a frame Q (orthonormal in the domain metric) the restricted map has
    v_n = det(Q^T A^T A Q)^(1/(2n)), A the normalized matrix.  Seeded random
    frames are scored in a batch; the best one is then improved by planar
    rotations between a frame vector and a complement vector, each rotation
    angle chosen exactly (the determinant is a quadratic form in (cos, sin)).
    Never uses singular values, so it stays independent of ``volume_number``.
    """
    A = T.normalized()
    dim = A.shape[1]
    if n < 1 or n > dim:
        raise ValueError("need 1 <= n <= dim(domain)")
    M = A.T @ A
    rng = np.random.default_rng(seed)

    frames, _ = np.linalg.qr(rng.standard_normal((trials, dim, n)))
    grams = np.einsum("tia,ij,tjb->tab", frames, M, frames)
    signs, logdets = np.linalg.slogdet(grams)
    logdets = np.where(signs > 0, logdets, -np.inf)
    best = int(np.argmax(logdets))
    if not np.isfinite(logdets[best]):
        # every sampled TM collapsed; for a map of rank < n that is exact
        return 0.0

    full, _ = np.linalg.qr(
        np.concatenate([frames[best], rng.standard_normal((dim, dim - n))], axis=1)
    )
    full = full.copy()

    def det_with(frame):
        return float(np.linalg.det(frame.T @ M @ frame))

    current = det_with(full[:, :n])
    for _ in range(refine_sweeps):
        before = current
        for i in range(n):
            for j in range(n, dim):
                qi = full[:, i].copy()
                qj = full[:, j].copy()
                frame = full[:, :n].copy()
                alpha = current
                frame[:, i] = qj
                gamma = det_with(frame)
                frame[:, i] = (qi + qj) / np.sqrt(2.0)
                mid = det_with(frame)
                beta = mid - 0.5 * (alpha + gamma)
                vals, vecs = np.linalg.eigh(np.array([[alpha, beta], [beta, gamma]]))
                if vals[1] <= current:
                    continue
                c, s = vecs[:, 1]
                full[:, i] = c * qi + s * qj
                full[:, j] = -s * qi + c * qj
                current = det_with(full[:, :n])
        if current - before <= 1e-15 * max(abs(current), 1e-300):
            break
    # final value from R of A Q: |det R| = det(Q^T M Q)^(1/2) without squaring roundoff
    r = np.abs(np.diag(np.linalg.qr(A @ full[:, :n], mode="r")))
    if r.min() <= RANK_RTOL * np.linalg.norm(A):
        return 0.0
    return float(np.exp(np.mean(np.log(r))))
