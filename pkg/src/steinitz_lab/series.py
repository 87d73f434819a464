"""Structured convergent series in R^d.

A series is a finite list of components (direction d_i, scalar stream s_i) with
u_k = sum_i s_i(k) d_i, k >= 1.  Streams come from a closed set of families
so that convergence and tail bounds are decided by rule, never by numerics.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergentSeries, SpecError, ToleranceUnreachable

FAMILIES = ("power", "alternating_power", "geometric", "finite")
ABSOLUTE, CONDITIONAL, DIVERGENT = "absolute", "conditional", "divergent"
DEFAULT_TERM_CAP = 10**8
DEDUP_RESOLUTION = 1e-12
EULER_LEVELS = 10


@dataclass(frozen=True)
class ScalarStream:
    family: str
    alpha: float | None = None
    ratio: float | None = None
    scale: float = 1.0
    values: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown stream family {self.family!r}")
        if not (isinstance(self.scale, (int, float)) and math.isfinite(self.scale)) or self.scale == 0:
            raise SpecError("scale must be a finite nonzero real")
        if self.family in ("power", "alternating_power"):
            if self.alpha is None or not self.alpha > 0 or not math.isfinite(self.alpha):
                raise SpecError("power families need alpha > 0")
            if self.ratio is not None or self.values is not None:
                raise SpecError("power families take only alpha and scale")
        elif self.family == "geometric":
            if self.ratio is None or not abs(self.ratio) < 1:
                raise SpecError("geometric streams need |ratio| < 1")
            if self.alpha is not None or self.values is not None:
                raise SpecError("geometric streams take only ratio and scale")
        else:
            if self.values is None:
                raise SpecError("finite streams need values")
            if self.alpha is not None or self.ratio is not None:
                raise SpecError("finite streams take only values and scale")
            vals = tuple(float(v) for v in self.values)
            if not all(math.isfinite(v) for v in vals):
                raise SpecError("finite stream values must be finite")
            object.__setattr__(self, "values", vals)

    @property
    def signature(self):
        """Grouping key for cancellation analysis."""
        if self.family in ("power", "alternating_power"):
            return (self.family, float(self.alpha))
        if self.family == "geometric":
            return (self.family, float(self.ratio))
        return ("finite",)

    def term(self, k):
        return float(self.terms(np.array([k]))[0])

    def terms(self, ks):
        ks = np.asarray(ks)
        if np.any(ks < 1):
            raise ValueError("term indices start at 1")
        kf = ks.astype(float)
        if self.family == "power":
            return self.scale * kf ** (-self.alpha)
        if self.family == "alternating_power":
            sign = np.where(ks % 2 == 1, 1.0, -1.0)
            return self.scale * sign * kf ** (-self.alpha)
        if self.family == "geometric":
            return self.scale * self.ratio ** kf
        vals = np.asarray(self.values + (0.0,))
        idx = np.minimum(ks, len(self.values) + 1) - 1
        return self.scale * np.where(ks <= len(self.values), vals[idx], 0.0)

    def envelope(self, k):
        """Upper bound for |s(j)| valid for every j >= k."""
        if self.family in ("power", "alternating_power"):
            return abs(self.scale) * k ** (-self.alpha)
        if self.family == "geometric":
            return abs(self.scale) * abs(self.ratio) ** k
        tail = self.values[k - 1:]
        return abs(self.scale) * max((abs(v) for v in tail), default=0.0)

    def to_dict(self):
        out = {"family": self.family}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.ratio is not None:
            out["ratio"] = self.ratio
        if self.values is not None:
            out["values"] = list(self.values)
        out["scale"] = self.scale
        return out

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise SpecError("stream must be an object")
        allowed = {"family", "alpha", "ratio", "values", "scale"}
        extra = set(d) - allowed
        if extra:
            raise SpecError(f"unknown stream fields: {sorted(extra)}")
        if "family" not in d:
            raise SpecError("stream needs a family")
        values = d.get("values")
        if values is not None and not isinstance(values, list):
            raise SpecError("values must be a list")
        for key in ("alpha", "ratio", "scale"):
            if key in d and (isinstance(d[key], bool) or not isinstance(d[key], (int, float))):
                raise SpecError(f"{key} must be a number")
        return cls(
            family=d["family"],
            alpha=None if d.get("alpha") is None else float(d["alpha"]),
            ratio=None if d.get("ratio") is None else float(d["ratio"]),
            scale=float(d.get("scale", 1.0)),
            values=None if values is None else tuple(values),
        )


def classify_stream(stream):
    """absolute / conditional / divergent, by rule table."""
    if stream.family == "power":
        return ABSOLUTE if stream.alpha > 1 else DIVERGENT
    if stream.family == "alternating_power":
        return ABSOLUTE if stream.alpha > 1 else CONDITIONAL
    return ABSOLUTE


@dataclass(frozen=True)
class Component:
    direction: np.ndarray
    stream: ScalarStream


@dataclass(frozen=True)
class SeriesSpec:
    dimension: int
    components: tuple

    def __post_init__(self):
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise SpecError("dimension must be a positive integer")
        comps = []
        for c in self.components:
            if not isinstance(c, Component):
                direction, stream = c
                c = Component(direction, stream)
            d = np.array(c.direction, dtype=float).reshape(-1)
            if d.size != self.dimension:
                raise SpecError(f"direction has length {d.size}, expected {self.dimension}")
            if not np.all(np.isfinite(d)) or not np.any(d != 0):
                raise SpecError("directions must be finite and nonzero")
            if classify_stream(c.stream) == DIVERGENT:
                raise DivergentSeries(
                    f"component stream {c.stream.to_dict()} diverges; the series must converge"
                )
            d.setflags(write=False)
            comps.append(Component(d, c.stream))
        if not comps:
            raise SpecError("a series needs at least one component")
        object.__setattr__(self, "components", tuple(comps))

    @property
    def directions(self):
        return np.array([c.direction for c in self.components])

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "components": [
                {"direction": [float(x) for x in c.direction], "stream": c.stream.to_dict()}
                for c in self.components
            ],
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise SpecError("series spec must be a JSON object")
        extra = set(d) - {"dimension", "components"}
        if extra:
            raise SpecError(f"unknown top-level fields: {sorted(extra)}")
        if "dimension" not in d or "components" not in d:
            raise SpecError("series spec needs dimension and components")
        dim = d["dimension"]
        if isinstance(dim, bool) or not isinstance(dim, int):
            raise SpecError("dimension must be an integer")
        if not isinstance(d["components"], list):
            raise SpecError("components must be a list")
        comps = []
        for i, c in enumerate(d["components"]):
            if not isinstance(c, dict):
                raise SpecError(f"component {i} must be an object")
            extra = set(c) - {"direction", "stream"}
            if extra:
                raise SpecError(f"component {i}: unknown fields {sorted(extra)}")
            if "direction" not in c or "stream" not in c:
                raise SpecError(f"component {i} needs direction and stream")
            if not isinstance(c["direction"], list):
                raise SpecError(f"component {i}: direction must be a list")
            comps.append(Component(c["direction"], ScalarStream.from_dict(c["stream"])))
        return cls(dim, tuple(comps))

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2)


def make_series(dimension, *components):
    """Shorthand: make_series(2, ([1, 0], ScalarStream(...)), ...)."""
    return SeriesSpec(dimension, tuple(Component(d, s) for d, s in components))


def terms(spec, ks):
    """Rows u_k for each k in ``ks``."""
    ks = np.asarray(ks, dtype=np.int64).reshape(-1)
    out = np.zeros((ks.size, spec.dimension))
    for c in spec.components:
        out += np.outer(c.stream.terms(ks), c.direction)
    return out


def term(spec, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    return terms(spec, [k])[0]


def term_envelope(spec, k, norm=None):
    """Upper bound on norm(u_j) for all j >= k; Euclidean when ``norm`` is None."""
    norm = norm or (lambda x: float(np.linalg.norm(x)))
    return sum(c.stream.envelope(k) * float(norm(c.direction)) for c in spec.components)


def _stream_partial(stream, N, chunk=1 << 20):
    total = 0.0
    for lo in range(1, N + 1, chunk):
        hi = min(N, lo + chunk - 1)
        total += float(np.sum(stream.terms(np.arange(lo, hi + 1))))
    return total


def partial_sum(spec, N):
    """sum_{k=1}^N u_k (zero vector for N = 0)."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    out = np.zeros(spec.dimension)
    for c in spec.components:
        out += _stream_partial(c.stream, N) * c.direction
    return out


def _rising(alpha, p):
    r = 1.0
    for j in range(p):
        r *= alpha + j
    return r


def _power_tail_gap(alpha, N):
    """Bracket [L, U] for sum_{k>N} k^-alpha, alpha > 1; returns (U - L, L).

    U = int_{N+1/2}^inf x^-a dx (midpoint rule, convexity) and
    L = int_{N+1}^inf x^-a dx + (N+1)^-a / 2 (trapezoid rule).
    """
    a1 = alpha - 1.0
    x, y = N + 0.5, N + 1.0
    half_step = y ** (-a1) * math.expm1(-a1 * math.log(x / y)) / a1
    lower = y ** (-a1) / a1 + 0.5 * y ** (-alpha)
    return half_step - 0.5 * y ** (-alpha), lower


def stream_sum(stream, tol, cap=DEFAULT_TERM_CAP):
    """Certified value of sum_k s(k): returns (value, error_bound <= tol)."""
    cls = classify_stream(stream)
    if cls == DIVERGENT:
        raise DivergentSeries("stream diverges")
    sc = stream.scale
    if stream.family == "finite":
        return math.fsum(sc * v for v in stream.values), 0.0
    if stream.family == "geometric":
        r = stream.ratio
        return sc * r / (1.0 - r), 4e-16 * abs(sc * r / (1.0 - r))

    alpha = stream.alpha
    N = 64
    while True:
        if N > cap:
            raise ToleranceUnreachable(
                f"{stream.family} alpha={alpha}: tolerance {tol} needs more than {cap} terms",
                required_terms=N,
            )
        if stream.family == "alternating_power":
            p = EULER_LEVELS
            bound = abs(sc) * _rising(alpha, p) * (N + 1.0) ** (-alpha - p) / 2.0**p
        else:
            gap, _ = _power_tail_gap(alpha, N)
            bound = abs(sc) * gap / 2.0
        bound += 1e-15 * abs(sc) * math.log2(N + 2)
        if bound <= tol:
            break
        N *= 2

    if stream.family == "alternating_power":
        p = EULER_LEVELS
        base = _stream_partial(stream, N)
        seq = np.concatenate([[base], base + np.cumsum(stream.terms(np.arange(N + 1, N + p + 1)))])
        for _ in range(p):
            seq = 0.5 * (seq[:-1] + seq[1:])
        return float(seq[0]), bound

    base = _stream_partial(stream, N)
    gap, lower = _power_tail_gap(alpha, N)
    return base + sc * (lower + 0.5 * gap), bound


def series_sum(spec, tol, cap=DEFAULT_TERM_CAP):
    """Certified sum of the series: (vector S, bound) with ||S - true sum||_2 <= bound <= tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    share = tol / len(spec.components)
    total = np.zeros(spec.dimension)
    bound = 0.0
    for c in spec.components:
        dn = float(np.linalg.norm(c.direction))
        value, err = stream_sum(c.stream, share / dn, cap)
        total += value * c.direction
        bound += err * dn
    return total, bound


@dataclass(frozen=True)
class SubsetSumCloud:
    m: int
    horizon: int
    points: np.ndarray
    truncated: bool

    def __len__(self):
        return self.points.shape[0]

    def contains(self, x, tol=DEDUP_RESOLUTION):
        if len(self) == 0:
            return False
        return bool(np.min(np.max(np.abs(self.points - np.asarray(x, float)), axis=1)) <= tol)


def _dedup(points):
    keys = np.rint(points / DEDUP_RESOLUTION)
    _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]


def enumerate_Zm(spec, m, horizon, max_points=1 << 20):
    """All finite subset sums of u_m, ..., u_horizon, including the empty sum."""
    if m < 1:
        raise ValueError("m must be >= 1")
    d = spec.dimension
    if horizon < m:
        return SubsetSumCloud(m, horizon, np.zeros((1, d)), False)
    us = terms(spec, np.arange(m, horizon + 1))
    pts = np.zeros((1, d))
    for u in us:
        pts = _dedup(np.vstack([pts, pts + u]))
        if pts.shape[0] > max_points:
            return _enumerate_by_cardinality(us, m, horizon, max_points)
    return SubsetSumCloud(m, horizon, pts, False)


def _enumerate_by_cardinality(us, m, horizon, max_points):
    n, d = us.shape
    found = [np.zeros(d)]
    seen = {tuple(np.rint(found[0] / DEDUP_RESOLUTION))}
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            p = us[list(combo)].sum(axis=0)
            key = tuple(np.rint(p / DEDUP_RESOLUTION))
            if key in seen:
                continue
            seen.add(key)
            found.append(p)
            if len(found) >= max_points:
                return SubsetSumCloud(m, horizon, np.array(found), True)
    return SubsetSumCloud(m, horizon, np.array(found), False)
