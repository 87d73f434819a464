"""Constructive rearrangement.

Two finite solvers carry the weight:

* ``round_off``: given points y_k in the unit ball of H1 and a point y of
  their zonotope, pick a subset I whose sum is within the unit ball of H2 of
  y (needs HS(H1 -> H2) <= 1).
* ``permute_bounded``: order vectors so that every prefix, started from an
  anchor a, stays in the unit ball of H3 (needs HS links 1 and 1/2).

``rearrange_to_target`` chains them stage by stage with the balls shrunk by
1/l, which yields a permutation whose partial sums approach any target in
the domain of sums.  Outputs are always checked, never trusted.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .domain import membership
from .errors import (
    BoundMissed,
    NotConditional,
    NotInDomain,
    PreconditionViolated,
    SearchExhausted,
    StageFailure,
)
from .hilbert import LinearMap, WeightedHilbert, hs_norm
from .series import CONDITIONAL, classify_stream, make_series, terms

SLACK = 1e-12
ZONOTOPE_TOL = 1e-9
FRACTIONAL_TOL = 1e-9


def _hs_identity(h_from, h_to):
    return hs_norm(LinearMap.identity(h_from, h_to))


# --------------------------------------------------------------------------
# rounding off coefficients


@dataclass(frozen=True)
class RoundOffInstance:
    points: np.ndarray
    space_h1: WeightedHilbert
    space_h2: WeightedHilbert
    target: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).reshape(-1))


def _zonotope_point(points, y):
    """lambda in [0,1]^s with points.T @ lambda = y, or None when infeasible."""
    s, d = points.shape
    res = linprog(
        np.zeros(s),
        A_eq=points.T,
        b_eq=y,
        bounds=[(0.0, 1.0)] * s,
        method="highs-ds",
    )
    if res.status != 0:
        return None
    lam = np.clip(res.x, 0.0, 1.0)
    scale = max(1.0, float(np.max(np.abs(y))), float(np.max(np.abs(points))) if s else 1.0)
    if np.max(np.abs(points.T @ lam - y)) > ZONOTOPE_TOL * scale:
        return None
    return lam


def _make_basic(points, lam):
    """Move lam along null directions of the fractional columns until they are independent."""
    lam = lam.copy()
    for _ in range(lam.size + 1):
        frac = np.flatnonzero((lam > FRACTIONAL_TOL) & (lam < 1 - FRACTIONAL_TOL))
        if frac.size == 0:
            break
        sub = points[frac].T
        _, sv, vt = np.linalg.svd(sub, full_matrices=True)
        rank = int(np.sum(sv > 1e-12 * max(sv[0], 1e-300))) if sv.size else 0
        if rank == frac.size:
            break
        z = vt[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.where(z > 0, (1 - lam[frac]) / z, np.inf)
            down = np.where(z < 0, -lam[frac] / z, np.inf)
        step = float(min(up.min(), down.min()))
        lam[frac] += step * z
        lam[np.abs(lam) <= FRACTIONAL_TOL] = 0.0
        lam[np.abs(lam - 1) <= FRACTIONAL_TOL] = 1.0
        lam = np.clip(lam, 0.0, 1.0)
    return lam


def _subset_sums(points, mask_rows):
    return mask_rows.astype(float) @ points


def round_off(inst, force=False):
    """Subset I (0-based, sorted) with ||sum_I y_k - y||_{H2} <= 1.

    The membership program sum lambda_k y_k = y, lambda in [0,1]^s is solved at
    a basic point, so at most d coordinates are fractional; all 2^f roundings
    of those are tried and the H2-closest kept.  Falls back to exhausting
    every subset when s <= 20.
    """
    pts, y = inst.points, inst.target
    h1, h2 = inst.space_h1, inst.space_h2
    s = pts.shape[0]
    if not force:
        if np.any(h1.norm(pts) > 1 + SLACK):
            raise PreconditionViolated("ball", "points must lie in the unit ball of H1")
        if _hs_identity(h1, h2) > 1 + SLACK:
            raise PreconditionViolated("hs", "HS(id: H1 -> H2) exceeds 1")
    lam = _zonotope_point(pts, y) if s else None
    if lam is None:
        if s == 0 and h2.norm(y) <= 1 + SLACK:
            return ()
        if not force:
            raise PreconditionViolated("zonotope", "target is outside the zonotope of the points")
        lam = np.zeros(s)
    lam = _make_basic(pts, lam)
    ones = lam >= 1 - FRACTIONAL_TOL
    frac = np.flatnonzero((lam > FRACTIONAL_TOL) & ~ones)
    base = pts[ones].sum(axis=0) - y
    if frac.size:
        masks = np.array(list(itertools.product((0, 1), repeat=frac.size)), dtype=bool)
        errs = h2.norm(base + _subset_sums(pts[frac], masks))
        best = int(np.argmin(errs))
        chosen = set(np.flatnonzero(ones)) | set(frac[masks[best]])
        err = float(errs[best])
    else:
        chosen = set(np.flatnonzero(ones))
        err = float(h2.norm(base))
    if err <= 1 + SLACK:
        return tuple(sorted(int(i) for i in chosen))
    if s <= 20:
        best_mask, best_err = _exhaust_subsets(pts, y, h2)
        if best_err <= 1 + SLACK:
            return tuple(int(i) for i in np.flatnonzero(best_mask))
    raise BoundMissed(f"no rounding within the H2 ball (best error {err:.6g})")


def _exhaust_subsets(pts, y, h2, chunk=1 << 16):
    s = pts.shape[0]
    best_err, best_mask = math.inf, None
    for start in range(0, 1 << s, chunk):
        codes = np.arange(start, min(1 << s, start + chunk), dtype=np.int64)
        masks = ((codes[:, None] >> np.arange(s)) & 1).astype(bool)
        errs = h2.norm(_subset_sums(pts, masks) - y)
        i = int(np.argmin(errs))
        if errs[i] < best_err:
            best_err, best_mask = float(errs[i]), masks[i]
    return best_mask, best_err


def exhaustive_round_off_error(inst):
    """Smallest H2 error over all 2^s subsets (brute-force oracle)."""
    _, err = _exhaust_subsets(inst.points, inst.target, inst.space_h2)
    return err


# --------------------------------------------------------------------------
# bounded-prefix permutations


@dataclass(frozen=True)
class PermInstance:
    vectors: np.ndarray
    anchor: np.ndarray
    h1: WeightedHilbert
    h2: WeightedHilbert
    h3: WeightedHilbert

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        v = v.reshape(-1, self.h1.dim) if v.size else np.zeros((0, self.h1.dim))
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float).reshape(-1))

    def check(self):
        v, a = self.vectors, self.anchor
        if np.any(self.h1.norm(v) > 1 + SLACK):
            raise PreconditionViolated("ball", "vectors must lie in the unit ball of H1")
        if self.h2.norm(a) > 1 + SLACK:
            raise PreconditionViolated("ball", "anchor must lie in the unit ball of H2")
        if self.h2.norm(a + v.sum(axis=0)) > 1 + SLACK:
            raise PreconditionViolated("ball", "a + sum v_k must lie in the unit ball of H2")
        if _hs_identity(self.h1, self.h2) > 1 + SLACK:
            raise PreconditionViolated("hs", "HS(H1 -> H2) exceeds 1")
        if _hs_identity(self.h2, self.h3) > 0.5 + SLACK:
            raise PreconditionViolated("hs", "HS(H2 -> H3) exceeds 1/2")


def prefix_norms(vectors, anchor, order, space):
    v = np.asarray(vectors, dtype=float)[list(order)]
    return space.norm(anchor + np.cumsum(v, axis=0)) if len(order) else np.zeros(0)


def permute_bounded(inst, force=False, node_budget=200_000):
    """Order sigma (0-based) keeping every prefix a + sum_{k<=m} v_sigma(k) in B_{H3}.

    Depth-first search whose first branch is the greedy choice (append the
    vector giving the smallest H3 norm); dead ends backtrack.  With s <= 10
    the search is exhaustive; otherwise it stops after ``node_budget`` nodes.
    """
    if not force:
        inst.check()
    v, h3 = inst.vectors, inst.h3
    s = v.shape[0]
    if s == 0:
        return ()
    limit = None if s <= 10 else node_budget
    order = []
    used = np.zeros(s, dtype=bool)
    nodes = 0
    # stack of candidate lists, one per depth
    stack = []
    running = inst.anchor.copy()

    def candidates(run):
        free = np.flatnonzero(~used)
        norms = h3.norm(run + v[free])
        ok = norms <= 1 + SLACK
        return list(free[ok][np.argsort(norms[ok], kind="stable")][::-1])

    stack.append(candidates(running))
    while stack:
        if len(order) == s:
            return tuple(int(i) for i in order)
        top = stack[-1]
        if not top:
            stack.pop()
            if not order:
                break
            last = order.pop()
            used[last] = False
            running = running - v[last]
            continue
        nodes += 1
        if limit is not None and nodes > limit:
            raise SearchExhausted(f"node budget {limit} exhausted at depth {len(order)}")
        k = top.pop()
        order.append(k)
        used[k] = True
        running = running + v[k]
        if len(order) == s:
            return tuple(int(i) for i in order)
        stack.append(candidates(running))
    raise SearchExhausted("no ordering keeps every prefix inside B_H3")


def exhaustive_permutation_exists(inst, chunk=40320):
    """Brute force over all s! orders (oracle); stops at the first good order."""
    v = inst.vectors
    s = v.shape[0]
    if s == 0:
        return True
    perms = itertools.permutations(range(s))
    while True:
        block = np.array(list(itertools.islice(perms, chunk)), dtype=np.int64)
        if block.size == 0:
            return False
        prefixes = inst.anchor + np.cumsum(v[block], axis=1)
        worst = np.max(inst.h3.norm(prefixes), axis=1)
        if np.min(worst) <= 1 + SLACK:
            return True


# --------------------------------------------------------------------------
# permutation streams


@dataclass(frozen=True)
class Certificate:
    stage: int
    prefix_length: int
    bound: float
    disc: int

    def line(self):
        return f"# stage {self.stage} {self.prefix_length} {self.bound!r} {self.disc}"


class PermutationStream:
    """Lazily emitted permutation of term indices (1-based) with certificates.

    Sequential generator: it may move between threads but must not be driven
    from two at once.
    """

    def __init__(self, events, series, target, scale=None, header=()):
        self._events = iter(events)
        self._lock = threading.Lock()
        self.series = series
        self.target = np.asarray(target, dtype=float)
        self.scale = scale
        self.header = tuple(header)
        self.emitted = []
        self.certificates = []
        self._log = []
        self.exhausted = False

    def _pull(self):
        try:
            kind, payload = next(self._events)
        except StopIteration:
            self.exhausted = True
            return False
        if kind == "index":
            self.emitted.append(payload)
            self._log.append(payload)
        else:
            self.certificates.append(payload)
            self._log.append(payload)
        return True

    def _guarded(self, fn):
        if not self._lock.acquire(blocking=False):
            raise RuntimeError("PermutationStream driven concurrently")
        try:
            return fn()
        finally:
            self._lock.release()

    def take(self, n):
        """Emit until ``n`` indices in total are out (or the source ends)."""

        def run():
            while len(self.emitted) < n and not self.exhausted:
                self._pull()
            return list(self.emitted[:n])

        return self._guarded(run)

    def run(self):
        """Drain a finite stream."""

        def go():
            while not self.exhausted:
                self._pull()
            return self

        return self._guarded(go)

    def __iter__(self):
        i = 0
        while True:
            while i >= len(self.emitted):
                if self.exhausted or not self._guarded(self._pull):
                    return
            yield self.emitted[i]
            i += 1

    def lines(self):
        out = list(self.header)
        for item in self._log:
            out.append(item.line() if isinstance(item, Certificate) else str(item))
        return out

    def dumps(self):
        return "\n".join(self.lines()) + "\n"


def parse_stream(text):
    """(indices, certificates) from the line format; other comment lines are ignored."""
    indices, certs = [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "stage":
                if len(parts) != 5:
                    raise ValueError(f"malformed certificate line: {raw!r}")
                certs.append(
                    Certificate(int(parts[1]), int(parts[2]), float(parts[3]), int(parts[4]))
                )
            continue
        indices.append(int(line))
    return indices, certs


@dataclass(frozen=True)
class StreamCheck:
    ok: bool
    distinct: bool
    errors: tuple = ()

    def __bool__(self):
        return self.ok


def _prefix_sums(u, lengths):
    """Compensated (Neumaier) prefix sums of the rows of u at each requested length."""
    wanted = sorted(set(lengths))
    out = {}
    total = np.zeros(u.shape[1])
    comp = np.zeros(u.shape[1])
    j = 0
    for n in wanted:
        while j < n:
            x = u[j]
            t = total + x
            big = np.abs(total) >= np.abs(x)
            comp += np.where(big, (total - t) + x, (x - t) + total)
            total = t
            j += 1
        out[n] = total + comp
    return out


def verify_stream(series, target, indices, certificates, scale=None, slack=1e-12):
    """Recompute every certified checkpoint error from the emitted prefix."""
    indices = list(indices)
    distinct = len(set(indices)) == len(indices) and all(k >= 1 for k in indices)
    target = np.asarray(target, dtype=float)
    u = terms(series, indices) if indices else np.zeros((0, series.dimension))
    lengths = [c.prefix_length for c in certificates if 0 <= c.prefix_length <= len(indices)]
    sums = _prefix_sums(u, lengths)
    rows = []
    ok = distinct
    for c in certificates:
        if c.prefix_length not in sums:
            rows.append((c.stage, c.prefix_length, math.inf, c.bound, False))
            ok = False
            continue
        diff = sums[c.prefix_length] - target
        if c.disc == 0:
            err = float(np.linalg.norm(diff))
        else:
            err = float(scale.discs[c.disc - 1].norm(diff))
        good = err <= c.bound + slack
        ok = ok and good
        rows.append((c.stage, c.prefix_length, err, c.bound, good))
    return StreamCheck(ok, distinct, tuple(rows))


def verify_permutation_stream(stream):
    return verify_stream(stream.series, stream.target, stream.emitted, stream.certificates, stream.scale)


# --------------------------------------------------------------------------
# Riemann


def riemann_rearrange(stream, target):
    """Greedy Riemann rearrangement of a conditionally convergent scalar stream.

    Positive terms are taken while the running sum is <= target, negative terms
    otherwise.  A certificate is recorded at each crossing, bounding
    |S_N - target| by the magnitude of the crossing term.
    """
    if classify_stream(stream) != CONDITIONAL:
        raise NotConditional("Riemann rearrangement needs a conditionally convergent stream")
    target = float(target)
    series = make_series(1, ([1.0], stream))
    first_positive = 1 if stream.scale > 0 else 2

    def events():
        pos = first_positive
        neg = 3 - first_positive
        total = 0.0
        n = 0
        crossings = 0
        side = total <= target
        while True:
            if total <= target:
                k, pos = pos, pos + 2
            else:
                k, neg = neg, neg + 2
            u = stream.term(k)
            total += u
            n += 1
            yield "index", k
            now = total <= target
            if now != side:
                crossings += 1
                yield "cert", Certificate(crossings, n, abs(u), 0)
                side = now

    return PermutationStream(events(), series, [target])


# --------------------------------------------------------------------------
# staged rearrangement to a target


def _last_large_index(spec, norm, threshold):
    """Least K with every |u_k| (k > K) bounded by ``threshold`` via stream envelopes."""

    def env(k):
        return sum(c.stream.envelope(k) * float(norm(c.direction)) for c in spec.components)

    if env(1) <= threshold:
        return 0
    hi = 1
    while env(hi + 1) > threshold:
        hi *= 2
        if hi > 1 << 40:
            raise StageFailure(0, "terms never fall below the rounding threshold")
    lo = hi // 2
    while lo < hi:
        mid = (lo + hi) // 2
        if env(mid + 1) <= threshold:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _closest_zonotope_point(points, y, weights):
    """Point of the zonotope of ``points`` minimizing the weighted sup distance to y.

    Returns (point, gap) with gap an upper bound of the weighted Euclidean distance.
    """
    s, d = points.shape
    w = np.sqrt(weights)
    P = points * w
    yw = y * w
    # variables: lambda (s), t
    c = np.zeros(s + 1)
    c[-1] = 1.0
    A = np.block([[P.T, -np.ones((d, 1))], [-P.T, -np.ones((d, 1))]])
    b = np.concatenate([yw, -yw])
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(0.0, 1.0)] * s + [(0.0, None)], method="highs")
    if res.status != 0:
        return None, math.inf
    lam = np.clip(res.x[:s], 0.0, 1.0)
    point = points.T @ lam
    return point, float(np.linalg.norm((point - y) * w))


def rearrange_to_target(
    spec,
    target,
    scale,
    stages,
    stage_width=64,
    seed=0,
    domain_tol=1e-9,
    max_window=1 << 22,
):
    """Permutation of the series indices whose partial sums approach ``target``.

    Discs: B0 = scale disc 1 (terms), B = disc 2 (stage ends), C = disc 3
    (certificates).  A prelude uses every term too large for the last stage,
    landing within 1/2 of the target in B.  Stage l = 2 .. stages+1 then
    (i) forces every unused index <= l * stage_width, (ii) grows a window of
    later terms until the LP-closest zonotope point is within 1/(2(l+1)) of
    what is missing, (iii) rounds that point to a subset with ``round_off`` in
    discs dilated by 1/(2(l+1)), and (iv) orders forced plus selected terms
    with ``permute_bounded`` in discs dilated by 1/l.  Certificates record
    ||S_N - target||_C <= 1/l at the end of each stage.  ``seed`` is kept for
    the record; the construction itself is deterministic.
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    if scale.levels < 3:
        raise ValueError("the scale needs at least three discs")
    if scale.truncation_dim != spec.dimension or target.size != spec.dimension:
        raise ValueError("series, target and scale dimensions differ")
    B0, B, C = scale.discs[0], scale.discs[1], scale.discs[2]
    if _hs_identity(B0, B) > 1 + SLACK or _hs_identity(B, C) > 0.5 + SLACK:
        raise PreconditionViolated("hs", "scale links must satisfy HS <= 1 and HS <= 1/2")
    member = membership(spec, target, domain_tol)
    if not member.in_domain:
        raise NotInDomain(
            f"target is {member.distance:.6g} away from the domain of sums",
            functional=member.separating_functional,
            distance=member.distance,
        )

    last = stages + 1
    rho_last = 1.0 / (2 * (last + 1))
    k0 = _last_large_index(spec, B0.norm, rho_last) if stages > 0 else 0

    def events():
        if stages <= 0:
            return
        used = set()
        P = np.zeros(spec.dimension)
        n_out = 0
        for ell in range(1, last + 1):
            rho = 1.0 / (2 * (ell + 1))
            deadline = max(k0, stage_width) if ell == 1 else max(k0, ell * stage_width)
            forced = [k for k in range(1, deadline + 1) if k not in used]
            a = P - target
            uf = terms(spec, forced) if forced else np.zeros((0, spec.dimension))
            y = -a - uf.sum(axis=0)
            width = stage_width
            while True:
                hi = deadline + width
                window = [k for k in range(deadline + 1, hi + 1) if k not in used]
                uw = terms(spec, window)
                ystar, gap = _closest_zonotope_point(uw, y, B.weights)
                if ystar is not None and gap <= rho:
                    break
                width *= 2
                if width > max_window:
                    raise StageFailure(ell, "window limit reached before the zonotope covered the residual",
                                       {"gap": gap, "window": width})
            inst = RoundOffInstance(uw, B0.dilate(rho), B.dilate(rho), ystar)
            try:
                picked = round_off(inst)
            except (BoundMissed, PreconditionViolated) as exc:
                raise StageFailure(ell, f"round_off failed: {exc}") from exc
            chosen = forced + [window[i] for i in picked]
            vecs = np.vstack([uf, uw[list(picked)]]) if picked else uf
            if ell == 1:
                order = range(len(chosen))
            else:
                r = 1.0 / ell
                pinst = PermInstance(vecs, a, B0.dilate(r), B.dilate(r), C.dilate(r))
                try:
                    order = permute_bounded(pinst)
                except (SearchExhausted, PreconditionViolated) as exc:
                    raise StageFailure(ell, f"permute_bounded failed: {exc}") from exc
            for i in order:
                used.add(chosen[i])
                n_out += 1
                yield "index", chosen[i]
            P = P + vecs.sum(axis=0) if len(chosen) else P
            if ell >= 2:
                err = float(C.norm(P - target))
                if err > 1.0 / ell + SLACK:
                    raise StageFailure(ell, f"checkpoint error {err:.6g} exceeds 1/{ell}")
                yield "cert", Certificate(ell, n_out, 1.0 / ell, 3)

    return PermutationStream(events(), spec, target, scale)
