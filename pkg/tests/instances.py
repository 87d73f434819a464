"""Seeded instance generators shared by the solver tests and the acceptance suite."""
import numpy as np

from steinitz_lab.hilbert import WeightedHilbert
from steinitz_lab.rearrange import PermInstance, RoundOffInstance


def _in_ball(rng, space, s):
    x = rng.standard_normal((s, space.dim))
    x /= space.norm(x)[:, None]
    return x * rng.uniform(0.05, 1.0, s)[:, None]


def _chain(rng, w, hs):
    """Weights w2 with HS(id: (R^d, w) -> (R^d, w2)) = hs."""
    c = rng.uniform(0.1, 1.0, w.size)
    c *= hs**2 / c.sum()
    return w * c


def round_off_instance(rng, s=None, d=None):
    s = s or int(rng.integers(1, 13))
    d = d or int(rng.integers(1, 5))
    w1 = rng.uniform(0.3, 3.0, d)
    h1 = WeightedHilbert(w1)
    h2 = WeightedHilbert(_chain(rng, w1, rng.uniform(0.5, 1.0)))
    pts = _in_ball(rng, h1, s)
    lam = rng.random(s)
    lam[rng.random(s) < 0.3] = rng.integers(0, 2)
    return RoundOffInstance(pts, h1, h2, pts.T @ lam)


def perm_instance(rng, s=None, d=None):
    s = s or int(rng.integers(1, 10))
    d = d or int(rng.integers(1, 4))
    w1 = rng.uniform(0.3, 3.0, d)
    h1 = WeightedHilbert(w1)
    w2 = _chain(rng, w1, rng.uniform(0.5, 1.0))
    h2 = WeightedHilbert(w2)
    h3 = WeightedHilbert(_chain(rng, w2, rng.uniform(0.25, 0.5)))
    v = _in_ball(rng, h1, s)
    # balance signs greedily so the total stays small
    total = np.zeros(d)
    for k in range(s):
        if h2.norm(total + v[k]) > h2.norm(total - v[k]):
            v[k] = -v[k]
        total += v[k]
    n = h2.norm(total)
    if n > 1:
        v /= n
        total /= n
    a = -rng.uniform(0, 1) * total
    return PermInstance(v, a, h1, h2, h3)
