# Nonconvex sets of subseries sums from an explicit finite construction.

import numpy as np

from steinitz_lab.counterexample import (
    BadSeriesCertificate,
    build_bad_series,
    build_ladder,
    check_generation,
    distance_p,
    verify_nonconvexity,
)

lad = build_ladder(4, 3)
print("a =", lad.a, " p(a) =", lad.p.norm(lad.a))
for c in lad.certificates:
    print(c)

gen = check_generation(lad.group, lad.B, 3)
print({m: r.ok for m, r in gen.items()})

d = distance_p(lad.a, lad.group, lad.p)
print("distance from a to the group:", d.bound, "closed" if d.closed else "open")

cert = build_bad_series(lad.a, lad.representations, lad.p, lad.B)
print("terms:", cert.terms.shape[0], " total:", cert.terms.sum(axis=0))

v = verify_nonconvexity(cert, 3)
print("2a reachable in each tail cloud:", v.twice_a_in_cloud)
print("a is kept away by:", v.cloud_distances)
print(v.note)

# certificates are plain JSON and replay to the same verdict
again = BadSeriesCertificate.loads(cert.dumps())
print(verify_nonconvexity(again, 3) == v, np.array_equal(again.terms, cert.terms))
