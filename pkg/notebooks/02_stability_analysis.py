# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
#   kernelspec:
#     display_name: Python 3 (ipykernel)
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Equilibria, linearization and the basin of the identity
#
# Every equilibrium other than `I` is a symmetric rotation commuting with
# `P`.  Here we enumerate the diagonal ones, look at their linearization
# spectra, and then estimate how often random initial attitudes converge.

# %%
from collections import Counter

import numpy as np

from geoatt.analysis import (
    classify_equilibrium,
    diagonal_saddles,
    equilibrium_split,
    group_eigenvalues,
    instability_bound,
    kernel_dimension,
    linearization_spectrum,
    monte_carlo_basin,
    predicted_identity_spectrum,
    unstable_count,
)
from geoatt.linalg import ProjectionPair

# %% [markdown]
# ### At the identity
#
# The spectrum splits into three blocks set by the rank of `P`.

# %%
for p in range(4):
    proj = ProjectionPair(np.diag([1.0] * p + [0.0] * (3 - p)), k=2.0)
    got = group_eigenvalues(linearization_spectrum(np.eye(3), proj))
    print(p, got, predicted_identity_spectrum(3, p, 2.0))

# %% [markdown]
# ### Saddles
#
# `(m, i, j)`: rank of `P`, number of `-1` eigenvalues of `R`, and how many
# of those sit in the range of `P`.  The count of eigenvalues off the
# imaginary axis and the largest real part both depend only on this split.

# %%
rows = []
for R, mask in diagonal_saddles(4):
    proj = ProjectionPair(np.diag(mask), k=1.0)
    lam = linearization_spectrum(R, proj)
    n, m, i, j = equilibrium_split(R, proj)
    rows.append(
        (
            str(classify_equilibrium(R, proj)),
            (m, i, j),
            6 - kernel_dimension(R, proj),
            unstable_count(n, m, i, j),
            round(float(lam.real.max()), 6),
            instability_bound(n, m, i, j, 1.0),
        )
    )
for r in sorted(set(rows), key=lambda r: r[1]):
    print(r)

# %% [markdown]
# Mixed splits (one `-1` direction on each side) only reach a real part of
# 1, below `min(2, 2k)` when `k > 1/2`.

# %%
print(Counter(r[4] for r in rows))

# %% [markdown]
# ### Basin estimate
#
# A small run here; the test suite does 1000 samples.

# %%
rep = monte_carlo_basin(3, ProjectionPair(np.diag([0.0, 1.0, 0.0])), 50, seed=1, dt=1e-2, t_max=40.0)
print(rep.to_dict())
