"""Finitely generated groups, p-distances, and the interleaved bad series.

All group arithmetic is exact: float vectors are read as the rationals they
are, scaled to integers, and put in Hermite normal form with Python ints.
Distances in a seminorm p are computed by Fincke-Pohst enumeration on a
Z-basis of the image of the group in the p-support.

The ladder realizes the construction pattern in explicit coordinates: a = e1
with p(a) = 2, p blind to every coordinate but the first, and enrichment m
spending the fresh coordinate e_m.  It does not re-prove the deep lemma
behind the pattern; in finite dimension its hypothesis cannot hold, so only
its conclusions are built.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    CertificateReplayFailed,
    EnumerationOverflow,
    InsufficientDimension,
    RepresentationInvalid,
)
from .hilbert import Seminorm, WeightedHilbert
from .series import Component, ScalarStream, SeriesSpec, enumerate_Zm

TAG_SLACK = 1e-12
LADDER_NOTE = (
    "explicit construction in p-null fresh coordinates; the deep lemma is not "
    "re-proved, its conclusions are realized directly"
)


# --------------------------------------------------------------------------
# exact lattice helpers


def to_integer_rows(vectors):
    """(rows, denominator): exact integer rows with vectors = rows / denominator."""
    fr = [[Fraction(float(x)) for x in v] for v in vectors]
    den = 1
    for row in fr:
        for x in row:
            den = math.lcm(den, x.denominator)
    return [[int(x * den) for x in row] for row in fr], den


def hnf(rows):
    """Row echelon Hermite form over Z.

    Returns (basis, transform, pivots): basis rows are independent, each equal
    to sum_j transform[k][j] * rows[j], with strictly increasing pivot columns
    and positive pivots.
    """
    A = [list(r) for r in rows]
    n = len(A)
    ncols = len(A[0]) if A else 0
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    pr = 0
    pivots = []
    for col in range(ncols):
        if pr >= n:
            break
        while True:
            nz = [i for i in range(pr, n) if A[i][col] != 0]
            if not nz:
                break
            i = min(nz, key=lambda r: abs(A[r][col]))
            A[pr], A[i] = A[i], A[pr]
            U[pr], U[i] = U[i], U[pr]
            clean = True
            for j in range(pr + 1, n):
                if A[j][col]:
                    q = A[j][col] // A[pr][col]
                    A[j] = [x - q * y for x, y in zip(A[j], A[pr])]
                    U[j] = [x - q * y for x, y in zip(U[j], U[pr])]
                    clean = clean and A[j][col] == 0
            if clean:
                break
        if A[pr][col] != 0:
            if A[pr][col] < 0:
                A[pr] = [-x for x in A[pr]]
                U[pr] = [-x for x in U[pr]]
            # reduce entries above the pivot
            for j in range(pr):
                q = A[j][col] // A[pr][col]
                if q:
                    A[j] = [x - q * y for x, y in zip(A[j], A[pr])]
                    U[j] = [x - q * y for x, y in zip(U[j], U[pr])]
            pivots.append(col)
            pr += 1
    return A[:pr], U[:pr], pivots


def solve_in_lattice(basis, pivots, v):
    """Integer c with v = sum_k c_k basis_k, or None."""
    v = list(v)
    coeffs = []
    for row, p in zip(basis, pivots):
        if v[p] % row[p]:
            return None
        c = v[p] // row[p]
        coeffs.append(c)
        if c:
            v = [x - c * y for x, y in zip(v, row)]
    return coeffs if not any(v) else None


@dataclass(frozen=True)
class FinGenGroup:
    generators: np.ndarray
    levels: tuple

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generators, dtype=float))
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "levels", tuple(int(m) for m in self.levels))
        if len(self.levels) != g.shape[0] or any(m < 1 for m in self.levels):
            raise ValueError("one positive level tag per generator")

    @property
    def dim(self):
        return self.generators.shape[1]

    def check_tags(self, B):
        return bool(np.all(B.norm(self.generators) <= 1.0 / np.array(self.levels) + TAG_SLACK))

    def coefficients(self, x):
        """Integer c with x = sum c_j g_j exactly, or None when x is not in the group."""
        rows, den = to_integer_rows(list(self.generators) + [np.asarray(x, float)])
        basis, U, piv = hnf(rows[:-1])
        c = solve_in_lattice(basis, piv, rows[-1])
        if c is None:
            return None
        k = len(rows) - 1
        return [sum(ci * U[i][j] for i, ci in enumerate(c)) for j in range(k)]

    def contains(self, x):
        return self.coefficients(x) is not None

    def enlarged(self, generators, levels):
        return FinGenGroup(np.vstack([self.generators, generators]), self.levels + tuple(levels))


# --------------------------------------------------------------------------
# generation property


@dataclass(frozen=True)
class GenerationResult:
    m: int
    ok: bool
    small_elements: np.ndarray
    decompositions: dict = field(default_factory=dict)


def _small_elements(G, B, radius, depth):
    k = G.generators.shape[0]
    rng = range(-depth, depth + 1)
    coeffs = np.array(list(itertools.product(rng, repeat=k)), dtype=float)
    elems = coeffs @ G.generators
    norms = B.norm(elems)
    keep = (norms <= radius + TAG_SLACK) & np.any(elems != 0, axis=1)
    pts = elems[keep]
    if pts.size == 0:
        return pts.reshape(0, G.dim)
    # one representative per element (and its negative)
    _, first = np.unique(np.rint(pts / 1e-12), axis=0, return_index=True)
    return pts[np.sort(first)]


def check_generation(G, B, m_max, search_depth=2):
    """For each m <= m_max: is every generator an integer sum of group elements of B-norm <= 1/m?

    Small elements are found among coefficient vectors with entries in
    [-search_depth, search_depth].  A True entry comes with an exact
    decomposition (integer weights on the listed small elements); False means
    none was found within the depth.
    """
    out = {}
    for m in range(1, m_max + 1):
        small = _small_elements(G, B, 1.0 / m, search_depth)
        if small.shape[0] == 0:
            out[m] = GenerationResult(m, False, small)
            continue
        rows, _ = to_integer_rows(list(small) + list(G.generators))
        srows, grows = rows[: small.shape[0]], rows[small.shape[0]:]
        basis, U, piv = hnf(srows)
        decomp = {}
        ok = True
        for j, g in enumerate(grows):
            c = solve_in_lattice(basis, piv, g)
            if c is None:
                ok = False
                break
            weights = [sum(ci * U[i][t] for i, ci in enumerate(c)) for t in range(len(srows))]
            decomp[j] = {t: w for t, w in enumerate(weights) if w}
        out[m] = GenerationResult(m, ok, small, decomp if ok else {})
    return out


# --------------------------------------------------------------------------
# p-distance


@dataclass(frozen=True)
class DistanceResult:
    bound: float
    closed: bool
    witness: np.ndarray | None
    nodes: int


def _p_lattice(G, p):
    """Float Z-basis (weighted coordinates) of the image of G in the p-support."""
    support = np.flatnonzero(p.weights > 0)
    proj = G.generators[:, support]
    rows, den = to_integer_rows(proj)
    basis, _, _ = hnf(rows)
    if not basis:
        return np.zeros((0, support.size)), support
    b = np.array([[Fraction(x, den) for x in r] for r in basis], dtype=object).astype(float)
    return b * np.sqrt(p.weights[support]), support


def distance_p(a, G, p, radius=None, max_nodes=1_000_000):
    """Lower bound for d_p(a, G) = inf_g p(a - g) by enumeration.

    Every group element with p(a - g) <= radius is visited (radius defaults
    to p(a), so g = 0 is always inside).  If one is found the minimum is the
    exact distance and ``closed`` is True; otherwise the radius itself is a
    certified lower bound.
    """
    a = np.asarray(a, dtype=float)
    pa = float(p.norm(a))
    radius = pa if radius is None else float(radius)
    L, support = _p_lattice(G, p)
    t = a[support] * np.sqrt(p.weights[support])
    if L.shape[0] == 0:
        d = float(np.linalg.norm(t))
        return DistanceResult(d, d <= radius, np.zeros(a.size), 1)
    Q, R = np.linalg.qr(L.T)
    y = Q.T @ t
    perp2 = max(0.0, float(t @ t - y @ y))
    r = R.shape[0]
    best = [math.inf, None]
    nodes = [0]
    x = np.zeros(r)
    limit2 = radius * radius * (1 + 1e-12) + 1e-300

    def search(i, partial2):
        # coordinates i+1..r-1 fixed; choose x_i
        nodes[0] += 1
        if nodes[0] > max_nodes:
            raise EnumerationOverflow(
                f"enumeration exceeded {max_nodes} nodes",
                partial=best[0] if math.isfinite(best[0]) else None,
            )
        c = y[i] - R[i, i + 1:] @ x[i + 1:]
        room = min(limit2, best[0] ** 2 * (1 + 1e-12)) - perp2 - partial2
        if room < 0:
            return
        half = math.sqrt(room) / abs(R[i, i])
        lo, hi = math.ceil(c / R[i, i] - half), math.floor(c / R[i, i] + half)
        for xi in range(lo, hi + 1):
            x[i] = xi
            e2 = partial2 + (R[i, i] * xi - c) ** 2
            if i == 0:
                d = math.sqrt(perp2 + e2)
                if d < best[0]:
                    best[0], best[1] = d, x.copy()
            else:
                search(i - 1, e2)
        x[i] = 0

    search(r - 1, 0.0)
    if best[1] is None:
        return DistanceResult(radius, False, None, nodes[0])
    # recompute on the actual group element for an exact-as-possible value
    coords = best[1] @ L / np.sqrt(p.weights[support])
    g = np.zeros(a.size)
    g[support] = coords
    d = float(p.norm(a - g))
    return DistanceResult(d, True, g, nodes[0])


# --------------------------------------------------------------------------
# the ladder


@dataclass(frozen=True)
class Ladder:
    group: FinGenGroup
    a: np.ndarray
    B: WeightedHilbert
    p: Seminorm
    representations: tuple
    certificates: tuple
    note: str = LADDER_NOTE


def _dyadic_floor(x):
    return 2.0 ** math.floor(math.log2(x))


def ladder_bound(levels):
    return 2.0 - sum(2.0**-l for l in range(1, levels + 1))


def build_ladder(d, levels):
    """Group, a, B and p with d_p(a, G_n) >= 2 - sum_{l<=n} 2^-l for n <= levels.

    B has weight 1/(16 L^2) on e1 and 1 elsewhere (L = levels); p has weight 4
    on e1 and 0 elsewhere, so p(a) = 2 for a = e1.  Representation 1 is (2a);
    representation m >= 2 is (2e1 + t e_m, -t e_m / 2, -t e_m / 2) with t the
    largest power of 2 keeping the first term in (1/m)B.  All entries are
    dyadic, so every sum below is exact in floating point.
    """
    if levels < 1 or levels > d:
        raise InsufficientDimension(f"levels={levels} needs 1 <= levels <= d={d}")
    L = levels
    a = np.zeros(d)
    a[0] = 1.0
    bw = np.ones(d)
    bw[0] = 1.0 / (16.0 * L * L)
    B = WeightedHilbert(bw)
    pw = np.zeros(d)
    pw[0] = 4.0
    p = Seminorm(pw)
    reps = [np.array([2 * a])]
    for m in range(2, L + 1):
        t = _dyadic_floor(math.sqrt(1.0 / m**2 - 1.0 / (4.0 * L * L)))
        e = np.zeros(d)
        e[m - 1] = 1.0
        reps.append(np.array([2 * a + t * e, -t * e / 2, -t * e / 2]))
    group = None
    certs = []
    for n, rep in enumerate(reps, start=1):
        gens = _distinct(rep)
        group = FinGenGroup(gens, (n,) * len(gens)) if group is None else group.enlarged(gens, (n,) * len(gens))
        res = distance_p(a, group, p)
        certs.append({"level": n, "bound": ladder_bound(n), "distance": res.bound, "closed": res.closed})
    return Ladder(group, a, B, p, tuple(reps), tuple(certs))


def _distinct(rows):
    out = []
    for r in rows:
        if not any(np.array_equal(r, s) or np.array_equal(r, -s) for s in out):
            out.append(r)
    return np.array(out)


# --------------------------------------------------------------------------
# the bad series


def _series_from_terms(u):
    """SeriesSpec along the standard basis whose k-th term is the row u[k-1]."""
    d = u.shape[1]
    comps = []
    for j in range(d):
        col = u[:, j]
        if np.any(col != 0):
            e = np.zeros(d)
            e[j] = 1.0
            comps.append(Component(e, ScalarStream("finite", values=tuple(col.tolist()))))
    if not comps:
        raise RepresentationInvalid("all representation terms vanish")
    return SeriesSpec(d, tuple(comps))


@dataclass(frozen=True)
class BadSeriesCertificate:
    a: np.ndarray
    p: Seminorm
    B: WeightedHilbert
    representations: tuple
    block_starts: tuple
    subsets: tuple

    @property
    def terms(self):
        rows = []
        for rep in self.representations:
            for w in rep:
                rows.extend([w, -w])
        return np.array(rows)

    @property
    def series(self):
        return _series_from_terms(self.terms)

    def group(self):
        gens, tags = [], []
        for m, rep in enumerate(self.representations, start=1):
            for w in _distinct(rep):
                gens.append(w)
                tags.append(m)
        return FinGenGroup(np.array(gens), tuple(tags))

    def to_dict(self):
        return {
            "a": self.a.tolist(),
            "p_weights": self.p.weights.tolist(),
            "B_weights": self.B.weights.tolist(),
            "representations": [rep.tolist() for rep in self.representations],
            "block_starts": list(self.block_starts),
            "subsets": [list(s) for s in self.subsets],
            "series": self.series.to_dict(),
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["a"], dtype=float),
            Seminorm(np.array(d["p_weights"], dtype=float)),
            WeightedHilbert(np.array(d["B_weights"], dtype=float)),
            tuple(np.array(r, dtype=float).reshape(len(r), -1) for r in d["representations"]),
            tuple(int(s) for s in d["block_starts"]),
            tuple(tuple(int(i) for i in s) for s in d["subsets"]),
        )

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def _exact_sum(rows):
    return np.array([math.fsum(c) for c in np.asarray(rows).T])


def build_bad_series(a, representations, p, B):
    """Interleave (w_1^1, -w_1^1, ..., w_1^2, -w_1^2, ...) and record the tail subsets.

    Block m (representation m) starts at block_starts[m-1]; its positive
    terms sit at the odd offsets and sum to 2a, which gives the certified tail
    subset for every m.
    """
    a = np.asarray(a, dtype=float)
    reps = tuple(np.atleast_2d(np.asarray(r, dtype=float)) for r in representations)
    if not reps:
        raise RepresentationInvalid("need at least one representation")
    starts, subsets = [], []
    k = 1
    for m, rep in enumerate(reps, start=1):
        if rep.shape[1] != a.size:
            raise RepresentationInvalid(f"representation {m} has the wrong dimension")
        if not np.array_equal(_exact_sum(rep), 2 * a):
            raise RepresentationInvalid(f"representation {m} does not sum to 2a")
        if np.any(B.norm(rep) > 1.0 / m + TAG_SLACK):
            raise RepresentationInvalid(f"representation {m} has a term outside (1/{m})B")
        starts.append(k)
        subsets.append(tuple(range(k, k + 2 * rep.shape[0], 2)))
        k += 2 * rep.shape[0]
    return BadSeriesCertificate(a, p, B, reps, tuple(starts), tuple(subsets))


@dataclass(frozen=True)
class NonconvexityVerdict:
    nonconvex: bool
    replay_ok: bool
    full_sum_zero: bool
    distance_bound: float
    cloud_distances: dict
    twice_a_in_cloud: dict
    cloud_sizes: dict
    note: str = LADDER_NOTE

    def to_dict(self):
        return {
            "nonconvex": self.nonconvex,
            "replay_ok": self.replay_ok,
            "full_sum_zero": self.full_sum_zero,
            "distance_bound": self.distance_bound,
            "cloud_distances": {str(k): v for k, v in self.cloud_distances.items()},
            "twice_a_in_cloud": {str(k): v for k, v in self.twice_a_in_cloud.items()},
            "cloud_sizes": {str(k): v for k, v in self.cloud_sizes.items()},
            "note": self.note,
        }


def verify_nonconvexity(cert, m_max, horizon_per_block=64):
    """Replay the certificate, then separate a from every enumerated tail cloud.

    (i) every subset I_m sums to 2a exactly and the full series sums to 0;
    (ii) distance_p on the group generated by the representation terms bounds
    p(a - z) from below for every cloud point z (each z lies in that group),
    and the minimum over each enumerated cloud is checked against it.
    """
    u = cert.terms
    if m_max > len(cert.representations):
        raise ValueError("m_max exceeds the number of representations")
    full_zero = bool(np.all(_exact_sum(u) == 0))
    for m in range(1, m_max + 1):
        I = cert.subsets[m - 1]
        if min(I) < cert.block_starts[m - 1] or max(I) > len(u):
            raise CertificateReplayFailed(f"subset {m} leaves the tail")
        if not np.array_equal(_exact_sum(u[np.array(I) - 1]), 2 * cert.a):
            raise CertificateReplayFailed(f"subset {m} does not sum to 2a exactly")
    if not full_zero:
        raise CertificateReplayFailed("the series does not sum to 0")

    G = cert.group()
    bound = distance_p(cert.a, G, cert.p).bound
    series = cert.series
    dists, hits, sizes = {}, {}, {}
    for m in range(1, m_max + 1):
        start = cert.block_starts[m - 1]
        horizon = min(len(u), start + horizon_per_block - 1)
        cloud = enumerate_Zm(series, start, horizon)
        dists[m] = float(np.min(cert.p.norm(cert.a - cloud.points)))
        hits[m] = cloud.contains(2 * cert.a)
        sizes[m] = len(cloud)
    separated = bound > 0 and all(dists[m] >= bound - 1e-12 for m in dists)
    return NonconvexityVerdict(
        bool(separated and all(hits.values())),
        True,
        full_zero,
        bound,
        dists,
        hits,
        sizes,
    )


def ladder_certificate(d, levels):
    lad = build_ladder(d, levels)
    return lad, build_bad_series(lad.a, lad.representations, lad.p, lad.B)
