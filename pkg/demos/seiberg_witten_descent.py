"""Gradient descent on the Seiberg-Witten energy on the flat torus.

Starting from small random data, the energy decreases to the reducible
solution (v, alpha) = (0, 0). At zero holonomy the Dirac operator has
constant spinors in its kernel and the decay slows to a crawl; with a
generic holonomy it is geometric.

Run with ``python3 demos/seiberg_witten_descent.py``.
"""
import numpy as np

from g2calib import dirac_sw as ds

for hol in [(0.5, 0.3, 0.2), (0.0, 0.0, 0.0)]:
    init = ds.SWState.random(2, np.random.default_rng(7), 0.1, holonomy=hol)
    res = ds.sw_descent(init, steps=200)
    print(f"holonomy {hol}: {len(res.energies) - 1} steps, energy "
          f"{res.energies[0]:.2e} -> {res.energies[-1]:.2e}, converged {res.converged}")

# The residual norm is invariant under v -> v exp(if), alpha -> alpha - df.
rng = np.random.default_rng(8)
state = ds.SWState.random(1, rng, 0.3).resize(8)
f = ds.FourierSection.random(1, (), rng, 0.3, real=True).resize(8)
before = ds.sw_residual(state).norm()
after = ds.sw_residual(ds.gauge_act(f, state)).norm()
print(f"\nresidual norm before/after a gauge transformation: {before:.12f} / {after:.12f}")
