# Rearranging to a target: first the scalar greedy, then the staged vector version.

import math

import numpy as np

from steinitz_lab.koethe import standard_scale
from steinitz_lab.rearrange import parse_stream, rearrange_to_target, riemann_rearrange, verify_permutation_stream
from steinitz_lab.series import ScalarStream, make_series, terms

# 1 - 1/2 + 1/3 - ... rearranged to sum to 1/2
stream = ScalarStream("alternating_power", alpha=1.0)
st = riemann_rearrange(stream, 0.5)
idx = st.take(10_000)
print("first indices:", idx[:12])
print("S_10000 =", math.fsum(stream.terms(np.array(idx))))
print("certificates so far:", len(st.certificates))
print(st.certificates[-1].line())
print("replay:", verify_permutation_stream(st).ok)

# the text format round-trips
text = st.dumps()
back, certs = parse_stream(text)
print(back[:12] == idx[:12], len(certs))

# vector case: move the x-sum to 0 while y stays at pi^2/6
s = make_series(
    2,
    ([1.0, 0.0], ScalarStream("alternating_power", alpha=1.0)),
    ([0.0, 1.0], ScalarStream("power", alpha=2.0)),
)
target = np.array([0.0, math.pi**2 / 6])
scale = standard_scale(2, levels=3)
vs = rearrange_to_target(s, target, scale, 5, stage_width=200).run()
C = scale.discs[2]
for c in vs.certificates:
    partial = terms(s, vs.emitted[: c.prefix_length]).sum(axis=0)
    print(f"stage {c.stage}: N={c.prefix_length:5d}  C-error {C.norm(partial - target):.3g} <= {c.bound:.3g}")

# a target off the domain line is refused with a separating functional
try:
    rearrange_to_target(s, np.array([0.0, 0.0]), scale, 3)
except Exception as e:
    print(type(e).__name__, e)
