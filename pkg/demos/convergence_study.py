"""Observed convergence order on quasi-uniform disk meshes.

The method converges at rate min(1, s + 0.5) in the lumped L2 norm on
quasi-uniform meshes.  One large kernel is built per configuration and
sliced per level, since the entries depend only on the offset.
"""

import math

import numpy as np

from fraclap import fft_uniform, generate_ball_mesh, mesh_quality, restrict, solve_bvp

RING_COUNTS = [10, 14, 20, 28, 40]
S = 0.5

meshes = [generate_ball_mesh(2, 1.0 / n_r) for n_r in RING_COUNTS]
n_fds = [6 * math.ceil(math.ceil(1.2 / mesh_quality(m).a_h) / 6) for m in meshes]
kernel = fft_uniform(S, 2, max(n_fds), 2 ** 13)

errors, h_bars = [], []
for mesh, n_fd in zip(meshes, n_fds):
    u, report = solve_bvp(mesh, S, "fft", n_fd=n_fd, kernel=restrict(kernel, n_fd))
    errors.append(report.l2_error)
    h_bars.append(mesh.n_elements ** -0.5)
    print(f"N={mesh.n_elements:>6}  n_fd={n_fd:>4}  l2_error={report.l2_error:.4e}  "
          f"iterations={report.iterations}")

order = np.polyfit(np.log(h_bars), np.log(errors), 1)[0]
print(f"\nfitted order: {order:.3f}   expected: {min(1.0, S + 0.5)}")
