"""Koethe matrices, the l1-ratio nuclearity test, and truncated Hilbert-disc scales.

A Koethe matrix is a grid a_n(i) > 0, nondecreasing in n.  Disc n of a
truncated scale is the weighted Hilbert space on R^D with weights
1 / a_n(i)^2, i.e. the Hilbert version of the unit ball {|u(i)| <= a_n(i)} of
the co-echelon step l_inf(1/a_n).  Larger n gives a larger disc.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, SpecError, UndecidableFamily
from .hilbert import LinearMap, WeightedHilbert, hs_norm

GRID_FAMILIES = ("power", "constant", "geometric", "table")


@dataclass(frozen=True)
class KoetheMatrix:
    """Closed family of Koethe grids.

    power:     a_n(i) = i^(step * n)
    constant:  a_n(i) = c
    geometric: a_n(i) = r_n^i, r_n = rates[min(n, len(rates)) - 1]
    table:     a_n(i) = table[n-1][i-1] on a finite grid
    """

    family: str
    step: float = 1.0
    constant: float = 1.0
    rates: tuple = ()
    table: tuple = ()

    def __post_init__(self):
        if self.family not in GRID_FAMILIES:
            raise SpecError(f"unknown grid family {self.family!r}")
        if self.family == "power" and not self.step > 0:
            raise SpecError("power grid needs step > 0")
        if self.family == "constant" and not self.constant > 0:
            raise SpecError("constant grid needs a positive constant")
        if self.family == "geometric":
            rates = tuple(float(r) for r in self.rates)
            if not rates or any(not r > 0 for r in rates):
                raise SpecError("geometric grid needs positive rates")
            if any(b < a for a, b in zip(rates, rates[1:])):
                raise SpecError("geometric rates must be nondecreasing")
            object.__setattr__(self, "rates", rates)
        if self.family == "table":
            rows = tuple(tuple(float(v) for v in row) for row in self.table)
            if not rows or len({len(r) for r in rows}) != 1 or not rows[0]:
                raise SpecError("table grid needs a nonempty rectangular table")
            arr = np.array(rows)
            if np.any(arr <= 0) or np.any(np.diff(arr, axis=0) < 0):
                raise SpecError("table must be positive and nondecreasing in n")
            object.__setattr__(self, "table", rows)

    @classmethod
    def power(cls, step=1.0):
        return cls("power", step=step)

    @classmethod
    def constant_grid(cls, c=1.0):
        return cls("constant", constant=c)

    @classmethod
    def geometric(cls, rates):
        return cls("geometric", rates=tuple(rates))

    @classmethod
    def dyadic_geometric(cls, levels):
        """r_n = 1 - 2^-n for n = 1..levels."""
        return cls.geometric([1.0 - 2.0**-n for n in range(1, levels + 1)])

    @property
    def shape(self):
        """(levels, length) for tabulated grids, None otherwise."""
        if self.family == "table":
            return len(self.table), len(self.table[0])
        return None

    def rate(self, n):
        return self.rates[min(n, len(self.rates)) - 1]

    def values(self, n, i):
        """a_n(i) for an integer level n and an array of indices i >= 1."""
        i = np.asarray(i)
        if n < 1 or np.any(i < 1):
            raise IndexOutOfRange("grid indices start at 1")
        fi = i.astype(float)
        if self.family == "power":
            return fi ** (self.step * n)
        if self.family == "constant":
            return np.full(fi.shape, self.constant)
        if self.family == "geometric":
            return self.rate(n) ** fi
        levels, length = self.shape
        if n > levels or np.any(i > length):
            raise IndexOutOfRange(f"table grid is only {levels} x {length}")
        return np.asarray(self.table[n - 1])[i - 1]

    def check_monotone(self, n_max=8, i_max=10**4):
        if self.family == "table":
            n_max = min(n_max, self.shape[0])
            i_max = min(i_max, self.shape[1])
        i = np.arange(1, i_max + 1)
        prev = self.values(1, i)
        if np.any(prev <= 0):
            return False
        for n in range(2, n_max + 1):
            cur = self.values(n, i)
            if np.any(cur < prev):
                return False
            prev = cur
        return True

    def to_dict(self):
        if self.family == "power":
            return {"family": "power", "step": self.step}
        if self.family == "constant":
            return {"family": "constant", "constant": self.constant}
        if self.family == "geometric":
            return {"family": "geometric", "rates": list(self.rates)}
        return {"family": "table", "table": [list(r) for r in self.table]}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "family" not in d:
            raise SpecError("grid spec must be an object with a family")
        allowed = {
            "power": {"step"},
            "constant": {"constant"},
            "geometric": {"rates"},
            "table": {"table"},
        }
        fam = d["family"]
        if fam not in allowed:
            raise SpecError(f"unknown grid family {fam!r}")
        extra = set(d) - {"family"} - allowed[fam]
        if extra:
            raise SpecError(f"unknown grid fields: {sorted(extra)}")
        if fam == "power":
            return cls.power(float(d.get("step", 1.0)))
        if fam == "constant":
            return cls.constant_grid(float(d.get("constant", 1.0)))
        if fam == "geometric":
            return cls.geometric(d.get("rates", []))
        return cls("table", table=tuple(tuple(r) for r in d.get("table", [])))

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def _zeta_bracket(s, tail_tol):
    """Certified value of sum_{i>=1} i^-s (s > 1) within tail_tol, as (value, bound)."""
    N = 16
    while True:
        a1 = s - 1.0
        y, x = N + 1.0, N + 0.5
        lower = y ** (-a1) / a1 + 0.5 * y ** (-s)
        upper = x ** (-a1) / a1
        if 0.5 * (upper - lower) <= tail_tol or N > 10**7:
            break
        N *= 4
    head = math.fsum(float(v) for v in np.arange(1, N + 1, dtype=float) ** (-s))
    return head + 0.5 * (upper + lower), 0.5 * (upper - lower)


def ratio_l1(A, n, m, tail_tol=1e-9):
    """sum_i a_n(i)/a_m(i) when finite, else inf; decided by family, not numerics."""
    if A.family == "table":
        raise UndecidableFamily("finite tabulated data cannot certify an infinite tail")
    if A.family == "constant":
        return math.inf, 0.0
    if A.family == "power":
        s = A.step * (m - n)
        if s <= 1:
            return math.inf, 0.0
        return _zeta_bracket(s, tail_tol)
    q = A.rate(n) / A.rate(m)
    if q >= 1:
        return math.inf, 0.0
    return q / (1.0 - q), 0.0


@dataclass(frozen=True)
class NuclearityResult:
    nuclear: bool
    n_max: int
    m_max: int
    witness: dict = field(default_factory=dict)
    ratio_sums: dict = field(default_factory=dict)

    def verdict(self):
        if not self.nuclear:
            return f"notNuclearWithin({self.n_max}, {self.m_max})"
        shifts = {m - n for n, m in self.witness.items()}
        if len(shifts) == 1:
            (k,) = shifts
            return f"nuclear, m(n)=n+{k}"
        return "nuclear, m(n)=" + ",".join(f"{n}:{m}" for n, m in sorted(self.witness.items()))


def nuclearity_test(A, n_max, m_max, tail_tol=1e-9):
    """For each n <= n_max find the least m in (n, m_max] with (a_n(i)/a_m(i))_i in l1."""
    if not n_max < m_max:
        raise ValueError("need n_max < m_max")
    if A.family == "table":
        raise UndecidableFamily("finite tabulated data cannot certify an infinite tail")
    witness, sums = {}, {}
    for n in range(1, n_max + 1):
        for m in range(n + 1, m_max + 1):
            value, _ = ratio_l1(A, n, m, tail_tol)
            if math.isfinite(value):
                witness[n] = m
                sums[n] = value
                break
        else:
            return NuclearityResult(False, n_max, m_max, witness, sums)
    return NuclearityResult(True, n_max, m_max, witness, sums)


def dual_norm(u, A, n):
    """||u||_n = sup_i |u(i)| / a_n(i) over the support of a finitely supported u.

    ``u`` is either a dict {i: value} (i >= 1) or a sequence whose entry j is u(j+1).
    """
    if isinstance(u, dict):
        idx = np.array(sorted(k for k, v in u.items() if v != 0), dtype=np.int64)
        vals = np.array([u[k] for k in idx], dtype=float)
    else:
        arr = np.asarray(u, dtype=float)
        idx = np.flatnonzero(arr) + 1
        vals = arr[idx - 1]
    if idx.size == 0:
        return 0.0
    return float(np.max(np.abs(vals) / A.values(n, idx)))


@dataclass(frozen=True)
class DiscScale:
    truncation_dim: int
    discs: tuple
    rescale_factors: tuple
    raw_links: tuple = ()

    def __post_init__(self):
        for d in self.discs:
            if d.dim != self.truncation_dim:
                raise SpecError("disc dimension differs from truncation dimension")

    @property
    def levels(self):
        return len(self.discs)

    def to_dict(self):
        return {
            "truncation_dim": self.truncation_dim,
            "weights": [d.weights.tolist() for d in self.discs],
            "rescale_factors": list(self.rescale_factors),
            "raw_links": list(self.raw_links),
        }

    @classmethod
    def from_dict(cls, d):
        discs = tuple(WeightedHilbert(np.array(w, dtype=float)) for w in d["weights"])
        return cls(
            int(d["truncation_dim"]),
            discs,
            tuple(d.get("rescale_factors", [1.0] * len(discs))),
            tuple(d.get("raw_links", ())),
        )


def link_map(scale, n, m=None):
    """Identity embedding disc_n -> disc_m (default m = n + 1), levels 1-based."""
    m = n + 1 if m is None else m
    if not (1 <= n <= scale.levels and 1 <= m <= scale.levels):
        raise IndexOutOfRange(f"levels {n}, {m} outside 1..{scale.levels}")
    return LinearMap.identity(scale.discs[n - 1], scale.discs[m - 1])


def hs_link(scale, n):
    """HS norm of disc_n -> disc_{n+1}."""
    if not 1 <= n < scale.levels:
        raise IndexOutOfRange(f"link {n} needs 1 <= n < {scale.levels}")
    return hs_norm(link_map(scale, n))


def build_hs_scale(A, D, levels, target=0.5):
    """Truncate A to i <= D and enlarge discs until every link has HS <= target.

    Disc n starts with weights 1/a_n(i)^2.  Going up the chain, disc n+1 is
    dilated by the least factor c >= 1 that brings HS(disc_n -> disc_{n+1})
    down to ``target``; factors compound because disc n may itself have been
    enlarged.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    i = np.arange(1, D + 1)
    raw = [1.0 / A.values(n, i) ** 2 for n in range(1, levels + 1)]
    discs = [WeightedHilbert(raw[0])]
    factors = [1.0]
    raw_links = []
    for n in range(1, levels):
        raw_links.append(float(np.sqrt(np.sum(raw[n] / raw[n - 1]))))
        link = float(np.sqrt(np.sum(raw[n] / discs[-1].weights)))
        c = max(1.0, link / target)
        discs.append(WeightedHilbert(raw[n] / (c * c)))
        factors.append(c)
    return DiscScale(D, tuple(discs), tuple(factors), tuple(raw_links))


def standard_scale(D, levels=3):
    """The power-grid scale, a convenient default for rearrangement runs."""
    return build_hs_scale(KoetheMatrix.power(), D, levels)
