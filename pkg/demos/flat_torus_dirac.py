"""Dirac spectra on the flat 3-torus and the jump of the kernel at trivial holonomy.

Run with ``python3 demos/flat_torus_dirac.py``.
"""
import numpy as np

from g2calib import dirac_sw as ds

K = 3
print("holonomy a0            smallest |eigenvalue|   kernel dim")
for t in [1.0, 0.1, 0.01, 1e-3, 0.0]:
    a0 = t * np.array([1.0, 0.5, 0.25])
    D = ds.build_dirac(K, ds.Connection.flat(K, a0))
    ev = D.spectrum()
    print(f"{t:8.0e} * (1,.5,.25)   {np.abs(ev).min():.6f}              {ds.kernel_dim(D.conn)}")

# The spectrum is symmetric and equals +-|2 pi k + a0| mode by mode.
a0 = (np.pi, 0.0, 0.0)
D = ds.build_dirac(K, ds.Connection.flat(K, a0))
ev = np.sort(D.spectrum().ravel())
print(f"\na0 = (pi, 0, 0): min |eigenvalue| = {np.abs(ev).min():.6f} (pi = {np.pi:.6f})")
print(f"oracle mismatch {np.abs(ev - ds.flat_spectrum_oracle(K, a0)).max():.1e}, "
      f"symmetry defect {np.abs(ev + ev[::-1]).max():.1e}")

# The div-curl operator is square with 4-dimensional kernel and cokernel at every cutoff.
for k in range(1, 5):
    print(f"div-curl at K={k}: (kernel, cokernel) = {ds.kernel_cokernel(k)}")
