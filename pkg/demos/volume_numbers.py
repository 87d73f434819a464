# Singular values, volume numbers and the profiles n^eps v_n(T).

import numpy as np

from steinitz_lab.hilbert import LinearMap, WeightedHilbert, s_numbers, volume_number, volume_number_bruteforce
from steinitz_lab.koethe import KoetheMatrix, build_hs_scale, hs_link
from steinitz_lab.nuclearity import composition_chain_check, veps_profile

rng = np.random.default_rng(0)

# diagonal map: singular values are the entries, v_n their running geometric mean
D = LinearMap.euclidean(np.diag([4.0, 1.0, 0.25]))
rep = s_numbers(D)
print(rep.singular_values, rep.volume_numbers, rep.hs_norm)

# weighted spaces change the answer
X = WeightedHilbert([1.0, 4.0, 9.0])
Y = WeightedHilbert([1.0, 1.0, 1.0])
T = LinearMap(rng.standard_normal((3, 3)), X, Y)
for n in (1, 2, 3):
    print(n, volume_number(T, n), volume_number_bruteforce(T, n, trials=200, seed=n))

# rank 2 map: v_3 is exactly zero
low = LinearMap.euclidean(rng.standard_normal((4, 2)) @ rng.standard_normal((2, 4)))
print("v_3 of a rank-2 map:", volume_number(low, 3))

prof = veps_profile(T, 0.5)
print(prof.to_csv())
print(prof.disclaimer)

# a chain of five maps, each with sup n v_n bounded, composes into sup n^5 v_n bounded
spaces = [WeightedHilbert(rng.uniform(0.5, 2, 4)) for _ in range(6)]
maps = [LinearMap(rng.standard_normal((4, 4)), spaces[i], spaces[i + 1]) for i in range(5)]
chain = composition_chain_check(maps, 1.0)
print("sup inequality:", chain.lhs_sup, "<=", chain.rhs_product, chain.sup_ok)
print("delta chain holds:", chain.chain_ok)

# a Hilbert-Schmidt disc scale built from the power grid k^n
scale = build_hs_scale(KoetheMatrix.power(), 4, 3)
print("raw links:", scale.raw_links)
print("rescaled :", [hs_link(scale, n) for n in (1, 2)])
