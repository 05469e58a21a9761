"""
Uniform measure and its first marginal
======================================

The uniform measure on Kac's sphere has a first marginal with a closed form.
We watch it approach the standard Gaussian as N grows.
"""

# %%
# The closed-form marginal
# ------------------------
# ``marginal_prefactor_log`` returns the log-density of the first k
# coordinates of a uniform point on the sphere of radius sqrt(N).

import math

import numpy as np

from kaclab import chaoticity_gap, make_uniform_family
from kaclab.marginals import marginal_prefactor_log

v = np.linspace(-3, 3, 7)
gauss = np.exp(-v ** 2 / 2) / math.sqrt(2 * math.pi)
for N in (5, 20, 200):
    pi1 = np.exp(marginal_prefactor_log(N, 1, v))
    print(f"N={N:4d}  " + " ".join(f"{x:.4f}" for x in pi1))
print("gauss   " + " ".join(f"{x:.4f}" for x in gauss))

# %%
# Sup distance to the Gaussian
# ----------------------------
# The gap over [-4, 4] shrinks roughly like 1/N.

for N in (50, 100, 200, 400):
    g = chaoticity_gap(make_uniform_family(N), 1)
    print(f"N={N:4d}  sup gap {g.sup_gap:.5f}   L1 gap {g.l1_gap:.5f}")
