"""Associative 3-planes: calibration bound, projection flow, and the 8-dimensional tangent space.

Run with ``python3 demos/associative_planes.py``.
"""
import warnings

import numpy as np

from g2calib import grassmann as gr

rng = np.random.default_rng(2024)

# A random plane sits strictly below the calibration bound; the defect
# |chi| measures how far, through phi^2 + |chi|^2/4 = 1.
planes = [gr.random_plane(rng) for _ in range(2000)]
phi = np.array([gr.calibration_value(L) for L in planes])
chi = np.array([gr.chi_defect(L) for L in planes])
print(f"random planes: max |phi| = {np.abs(phi).max():.4f}")
print(f"               max |phi^2 + |chi|^2/4 - 1| = {np.abs(phi**2 + chi**2 / 4 - 1).max():.1e}")

# Perturb an associative plane to defect 0.3 and flow it back.
start = gr.plane_at_defect(gr.random_associative_plane(rng), 0.3, rng)
plane, info = gr.project_to_associative(start, full_output=True)
print("\nprojection flow from defect 0.3:")
for i, d in enumerate(info["trace"]):
    print(f"  step {i:2d}  |chi| = {d:.3e}")
print(f"landed on phi = {gr.calibration_value(plane):+.12f}, rank d chi = {gr.dchi_rank(plane)}")
print("so the associative Grassmannian has dimension 12 - 4 = 8")

# Far from the locus the flow is not guaranteed to converge.
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    try:
        gr.project_to_associative(gr.OrientedPlane3.span(1, 2, 4), max_iter=50)
    except gr.ConvergenceError as err:
        print(f"\nspan(e1, e2, e4): {err}")
    for w in caught:
        print(f"  warning: {w.message}")
