# Where can a rearranged series in R^2 land?
#
# x-coordinate: alternating harmonic (conditionally convergent)
# y-coordinate: 1/k^2 (absolutely convergent)
# Rearranging moves the x-sum anywhere; the y-sum is pinned at pi^2/6.

import math

import numpy as np

from steinitz_lab.domain import domain_of_sums, gamma, membership
from steinitz_lab.series import ScalarStream, make_series, series_sum

s = make_series(
    2,
    ([1.0, 0.0], ScalarStream("alternating_power", alpha=1.0)),
    ([0.0, 1.0], ScalarStream("power", alpha=2.0)),
)

total, err = series_sum(s, 1e-10)
print("sum in natural order:", total, "+/-", err)
print("ln 2, pi^2/6        :", math.log(2), math.pi**2 / 6)

g = gamma(s)
print("directions the conditional part can move (Gamma-perp basis):")
print(g.gamma_perp_basis)

dom = domain_of_sums(s, 1e-9)
print("offset    :", dom.offset)
print("directions:", dom.directions)   # one line through the offset

# points on the line are reachable, anything off it is not
for x in ([5.0, math.pi**2 / 6], [0.0, 0.0]):
    out = membership(s, x, 1e-8, domain=dom)
    print(x, "->", out.in_domain, "functional:", out.separating_functional)

# a slower conditional stream on a rescaled axis gives the same line direction
s2 = make_series(
    2,
    ([3.0, 0.0], ScalarStream("alternating_power", alpha=0.5)),
    ([0.0, 1.0], ScalarStream("power", alpha=2.0)),
)
print(np.allclose(domain_of_sums(s2, 1e-9).directions, dom.directions))
