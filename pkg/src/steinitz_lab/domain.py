"""Gamma, its annihilator, and the domain of sums of a structured series.

Components are grouped by stream signature.  Inside a signature class the
scalar sequences are identical up to scale, so a functional x' sees the class
as (sum_i scale_i <x', d_i>) * sigma(k); distinct signatures never cancel
against each other.  Hence x' is in Gamma iff it annihilates the combination
vector of every conditional class, and the annihilator of Gamma is the span
of those combination vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .series import (
    CONDITIONAL,
    Component,
    ScalarStream,
    SeriesSpec,
    classify_stream,
    series_sum,
)

RANK_TOL = 1e-10


def canonical_basis(vectors, dim, tol=RANK_TOL):
    """Orthonormal basis of span(vectors) that depends only on the subspace.

    Gram-Schmidt is run on the projections P e_1, P e_2, ... of the standard
    basis, so two spanning sets of the same subspace give the same rows.
    Each row is signed so that its first nonzero coordinate is positive.
    """
    vectors = np.asarray(vectors, dtype=float).reshape(-1, dim)
    if vectors.shape[0] == 0:
        return np.zeros((0, dim))
    u, s, _ = np.linalg.svd(vectors.T, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, dim))
    q = u[:, s > tol * s[0]]
    proj = q @ q.T
    rows = []
    for j in range(dim):
        v = proj[:, j].copy()
        for r in rows:
            v -= (r @ v) * r
        nv = np.linalg.norm(v)
        if nv > np.sqrt(tol):
            rows.append(v / nv)
        if len(rows) == q.shape[1]:
            break
    out = np.array(rows).reshape(-1, dim)
    for row in out:
        lead = np.flatnonzero(np.abs(row) > tol)
        if lead.size and row[lead[0]] < 0:
            row *= -1
    out[np.abs(out) < 1e-15] = 0.0
    return out


def complement_basis(basis, dim, tol=RANK_TOL):
    basis = np.asarray(basis, dtype=float).reshape(-1, dim)
    proj = np.eye(dim) - basis.T @ basis
    return canonical_basis(proj, dim, tol)


@dataclass(frozen=True)
class GammaReport:
    gamma_basis: np.ndarray
    gamma_perp_basis: np.ndarray
    conditional_vectors: np.ndarray
    classes: tuple = ()
    disc_index: int | None = None
    functional_dual_norms: tuple = ()

    def to_dict(self):
        return {
            "gamma_basis": self.gamma_basis.tolist(),
            "gamma_perp_basis": self.gamma_perp_basis.tolist(),
            "conditional_vectors": self.conditional_vectors.tolist(),
            "classes": [
                {"signature": list(sig), "classification": cls, "combination": vec.tolist()}
                for sig, cls, vec in self.classes
            ],
        }


def signature_classes(spec):
    """(signature, classification, combination vector) per signature class, in first-seen order."""
    order = []
    combos = {}
    for c in spec.components:
        sig = c.stream.signature
        if sig not in combos:
            order.append(sig)
            combos[sig] = (classify_stream(c.stream), np.zeros(spec.dimension))
        combos[sig][1][:] += c.stream.scale * c.direction
    return tuple((sig, combos[sig][0], combos[sig][1]) for sig in order)


def gamma(spec):
    classes = signature_classes(spec)
    cond = [vec for _, cls, vec in classes if cls == CONDITIONAL]
    cond = np.array(cond).reshape(-1, spec.dimension)
    perp = canonical_basis(cond, spec.dimension)
    gam = complement_basis(perp, spec.dimension)
    return GammaReport(gam, perp, cond, classes)


@dataclass(frozen=True)
class AffineSubspace:
    offset: np.ndarray
    directions: np.ndarray
    offset_error: float = 0.0

    @property
    def dim(self):
        return self.offset.size

    def residual(self, x):
        """Component of x - offset orthogonal to the direction space."""
        y = np.asarray(x, dtype=float) - self.offset
        return y - self.directions.T @ (self.directions @ y)

    def distance(self, x):
        return float(np.linalg.norm(self.residual(x)))

    def contains(self, x, tol):
        return self.distance(x) <= tol

    def project(self, x):
        return np.asarray(x, dtype=float) - self.residual(x)

    def to_dict(self):
        return {
            "offset": self.offset.tolist(),
            "offset_error": self.offset_error,
            "directions": self.directions.tolist(),
        }


def domain_of_sums(spec, tol):
    offset, err = series_sum(spec, tol)
    return AffineSubspace(offset, gamma(spec).gamma_perp_basis, err)


@dataclass(frozen=True)
class Membership:
    in_domain: bool
    distance: float
    separating_functional: np.ndarray | None = None

    def __bool__(self):
        return self.in_domain


def _offset_tol(tol):
    return min(tol / 10.0, 1e-8)


def membership(spec, x, tol, domain=None):
    """In-domain test; otherwise a unit functional in Gamma separating x from the domain."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dimension,):
        raise DimensionMismatch(f"point must have length {spec.dimension}")
    dom = domain or domain_of_sums(spec, _offset_tol(tol))
    r = dom.residual(x)
    dist = float(np.linalg.norm(r))
    if dist <= tol:
        return Membership(True, dist)
    return Membership(False, dist, r / dist)


def weak_domain_check(spec, x, tol, report=None):
    """x - sum annihilated by every functional of Gamma (within tol).

    Equivalent to: every scalar value x'(x) is a rearranged sum of the
    scalar series (x'(u_k)).
    """
    x = np.asarray(x, dtype=float)
    report = report or gamma(spec)
    offset, _ = series_sum(spec, _offset_tol(tol))
    if report.gamma_basis.shape[0] == 0:
        return True
    return bool(np.linalg.norm(report.gamma_basis @ (x - offset)) <= tol)


def gamma_local(spec, scale):
    """Gamma-perp of the series computed disc by disc along a scale.

    Each disc B_n of the truncation is a weighted Hilbert space on R^D.  A
    functional belongs to Gamma_{B_n} when it is continuous on E_{B_n} and
    absolutely summable on the series; in finite dimension every functional
    is continuous (its dual norm is recorded), so every level reproduces the
    global report.
    """
    if scale.truncation_dim != spec.dimension:
        raise DimensionMismatch(
            f"scale truncation {scale.truncation_dim} != series dimension {spec.dimension}"
        )
    base = gamma(spec)
    reports = []
    for n, disc in enumerate(scale.discs, start=1):
        dirs = spec.directions
        if not np.all(np.isfinite(disc.norm(dirs))):
            raise ValueError(f"series terms do not lie in disc {n}")
        dual = tuple(float(np.sqrt(np.sum(f * f / disc.weights))) for f in base.gamma_basis)
        perp = canonical_basis(base.conditional_vectors, spec.dimension)
        gam = complement_basis(perp, spec.dimension)
        reports.append(
            GammaReport(gam, perp, base.conditional_vectors, base.classes, n, dual)
        )
    return reports


def dense_domain_series(d):
    """d conditional classes alternating_power(alpha_j) along e_j, alpha_j = 1 - (j-1)/(2d).

    Every alpha lies in (1/2, 1] and they are pairwise distinct, so Gamma = {0}
    and the domain of sums is all of R^d.  d = 1 is the alternating harmonic series.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    comps = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        comps.append(Component(e, ScalarStream("alternating_power", alpha=1.0 - j / (2.0 * d))))
    return SeriesSpec(d, tuple(comps))


__all__ = [
    "AffineSubspace",
    "GammaReport",
    "Membership",
    "canonical_basis",
    "complement_basis",
    "dense_domain_series",
    "domain_of_sums",
    "gamma",
    "gamma_local",
    "membership",
    "signature_classes",
    "weak_domain_check",
]
