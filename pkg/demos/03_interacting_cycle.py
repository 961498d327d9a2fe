# %% [markdown]
# # The cycle with Hubbard interaction
#
# The interacting medium is sampled with static-path auxiliary-field Monte Carlo.
# Free energies come from thermodynamic integration along a temperature path,
# so every cycle quantity carries a statistical error.  This demo uses a small
# 4 x 4 lattice and short chains and runs in about a minute.

# %%
import logging

from lkqtm.lattice_bands import THETA_KAGOME, THETA_LIEB, StrainParams
from lkqtm.spa_hubbard import MCParams, build_geometry, run_chain
from lkqtm.sweeps import u_sweep

logging.basicConfig(level=logging.INFO, format="%(message)s")

# %% [markdown]
# ## A single chain
# Local moments form as U grows.  With mu = U/2 the Mott gap pins the filling
# at one for large U, while the weakly correlated metal drifts off half filling
# because the kagome bands lack particle-hole symmetry.  The sweeps below tune
# mu instead.

# %%
g = build_geometry(4, StrainParams(THETA_KAGOME))
for u in (2.0, 9.0):
    res = run_chain(g, MCParams(beta=10.0, u=u, mu=u / 2, n_therm=60, n_meas=60, cluster_l=2, seed=3))
    obs = res.observables
    q, s, err = obs.sublattice_peak
    print(f"U={u}: density={obs.density_mean:.4f} acceptance={obs.acceptance_rate:.2f} peak S={s:.4f}+-{err:.4f} at {q}")

# %% [markdown]
# ## Efficiency against U

# %%
mc = MCParams(beta=1.0, u=1.0, n_therm=40, n_meas=40, cluster_l=2, measure_every=2, seed=1)
for row in u_sweep(THETA_KAGOME, THETA_LIEB, 0.5, 0.3, [0.0, 2.0, 4.0], mc, l=4):
    print(f"U={row.u}: mode={row.cycle.mode.value} efficiency={row.efficiency:.4f}+-{row.efficiency_stderr:.4f}")

# %% [markdown]
# Once U is switched on, every field component brings T/2 of classical energy.
# That heat is absorbed on warming and returned on cooling, so it dilutes the
# efficiency without adding work.  With chains this short the interacting work
# sits within two standard errors of zero, and those cells are reported as
# boundary.  Longer chains on L = 8 resolve a weak engine at small U.
