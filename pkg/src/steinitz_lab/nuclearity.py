"""Volume-number profiles n^eps * v_n(T) and the inequalities behind them.

In finite dimension every map has v_n = 0 beyond its rank, so a bounded
profile proves nothing by itself.  Reports therefore carry the profile and
the checked inequalities, plus a disclaimer saying the evidence is finite.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ChainTooShort, DimensionMismatch
from .hilbert import LinearMap, compose, singular_values, volume_numbers

DISCLAIMER = "finite-range evidence: a profile over n <= nMax cannot certify membership of an infinite sequence"
INEQ_TOL = 1e-9


@dataclass(frozen=True)
class VEpsReport:
    epsilon: float
    values: np.ndarray
    volumes: np.ndarray
    deltas: np.ndarray
    sup_value: float
    decay_observed: bool
    majorant: np.ndarray | None = None
    notes: tuple = ()
    disclaimer: str = DISCLAIMER

    @property
    def n_max(self):
        return self.values.size

    def rows(self):
        maj = self.majorant if self.majorant is not None else [math.nan] * self.n_max
        for n in range(1, self.n_max + 1):
            yield n, self.deltas[n - 1], self.volumes[n - 1], self.values[n - 1], maj[n - 1]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "delta_n", "v_n", "n^eps*v_n", "majorant"])
        for n, d, v, val, m in self.rows():
            w.writerow([n, repr(float(d)), repr(float(v)), repr(float(val)), "" if math.isnan(m) else repr(float(m))])
        return buf.getvalue()


def _report(T, epsilon, n_max, majorant=None, notes=()):
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return _report_any(T, epsilon, n_max, majorant, notes)


def _report_any(T, epsilon, n_max, majorant=None, notes=()):
    sv = singular_values(T)
    n_max = sv.size if n_max is None else n_max
    if not 1 <= n_max <= sv.size:
        raise ValueError(f"nMax must lie in 1..{sv.size}")
    vols = volume_numbers(T, n_max)
    n = np.arange(1, n_max + 1, dtype=float)
    values = n**epsilon * vols
    sup = float(values.max())
    decay = bool(n_max > 1 and values[-1] < 0.5 * sup)
    if majorant is not None:
        majorant = np.asarray(majorant, dtype=float)[:n_max]
    return VEpsReport(float(epsilon), values, vols, sv[:n_max].copy(), sup, decay, majorant, tuple(notes))


def veps_profile(T, epsilon, n_max=None):
    """Profile n -> n^eps v_n(T) for n = 1..n_max (default: min dimension)."""
    return _report(T, epsilon, n_max)


def _sup_weighted(T, power):
    vols = volume_numbers(T)
    n = np.arange(1, vols.size + 1, dtype=float)
    return float(np.max(n**power * vols)) if vols.size else 0.0


@dataclass(frozen=True)
class ChainReport:
    epsilon: float
    count: int
    lhs_sup: float
    rhs_product: float
    sup_ok: bool
    deltas: np.ndarray
    mid_chain: np.ndarray
    volume_chain: np.ndarray
    chain_ok: bool
    summability_proxy: float
    tail_decay: bool
    disclaimer: str = DISCLAIMER

    @property
    def ok(self):
        return self.sup_ok and self.chain_ok


def composition_chain_check(maps, epsilon, tol=INEQ_TOL):
    """Check the composition inequalities on T = maps[-1] o ... o maps[0].

    (i)   sup_l l^5 v_l(T) <= prod_i sup_l l^eps v_l(T_i)
    (ii)  delta_n(T) <= n (prod_{l<=n} h_l(T))^(1/n) <= (prod_{l<=n} n v_l(T))^(1/n)
    (iii) sum_n n delta_n(T) as a summability proxy, with a tail-decay flag.
    Between Hilbert spaces delta_n = h_n = n-th singular value.
    """
    maps = list(maps)
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    need = math.ceil(5.0 / epsilon - 1e-12)
    if len(maps) < need:
        raise ChainTooShort(f"need at least {need} factors for epsilon={epsilon}, got {len(maps)}")
    T = compose(maps)
    lhs = _sup_weighted(T, 5.0)
    rhs = math.prod(_sup_weighted(m, epsilon) for m in maps)
    sup_ok = lhs <= rhs + tol * max(1.0, abs(rhs))

    sv = singular_values(T)
    vols = volume_numbers(T)
    n = np.arange(1, sv.size + 1, dtype=float)
    mid = n * vols  # n (prod h_l)^(1/n), h_l = sigma_l
    with np.errstate(divide="ignore"):
        logv = np.log(vols)
    top = np.where(
        vols > 0,
        np.exp(np.log(n) + np.cumsum(np.where(vols > 0, logv, 0.0)) / n),
        0.0,
    )
    chain_ok = bool(
        np.all(sv <= mid + tol * np.maximum(1.0, mid))
        and np.all(mid <= top + tol * np.maximum(1.0, top))
    )
    terms = n * sv
    proxy = float(np.sum(terms))
    tail = bool(terms.size < 2 or terms[-1] <= 0.5 * terms.max())
    return ChainReport(float(epsilon), len(maps), lhs, rhs, bool(sup_ok), sv, mid, top, chain_ok, proxy, tail)


def two_summing_composition_profile(maps, epsilon, n_max=None):
    """Profile of S o R o Q with the AM-GM majorant n^eps (1/n) sum_{i<=n} delta_i."""
    maps = list(maps)
    if len(maps) != 3:
        raise ValueError("expected exactly three maps")
    T = compose(maps)
    sv = singular_values(T)
    n = np.arange(1, sv.size + 1, dtype=float)
    maj = n**epsilon * np.cumsum(sv) / n
    hs = [float(np.sqrt(np.sum(singular_values(m) ** 2))) for m in maps]
    notes = tuple(f"factor {i + 1} 2-summing norm = HS norm = {h!r}" for i, h in enumerate(hs))
    return _report(T, epsilon, n_max, maj, notes)


def scale_criterion_profile(scale, p, epsilon, n_max=None):
    """Profile of the identity E_{B_n} -> E_p for every disc of the scale."""
    if p.dim != scale.truncation_dim:
        raise DimensionMismatch(f"p has dimension {p.dim}, scale truncates at {scale.truncation_dim}")
    return [
        _report(LinearMap.identity(disc, p), epsilon, n_max, notes=(f"disc {i}",))
        for i, disc in enumerate(scale.discs, start=1)
    ]


def map_profile_csv(T, epsilon, n_max=None):
    return _report_any(T, epsilon, n_max).to_csv()
