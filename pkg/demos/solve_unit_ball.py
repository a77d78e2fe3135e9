"""Solve the constant-source Dirichlet problem on the unit disk and compare
against the closed-form solution."""

import numpy as np

from fraclap import exact_solution, generate_ball_mesh, solve_bvp

mesh = generate_ball_mesh(2, 0.05)
print(f"mesh: {mesh.n_elements} triangles, {mesh.n_interior} interior vertices")

u, report = solve_bvp(mesh, s=0.5, scheme="fft", m=2 ** 12, precond="circulant")
print(report.to_text())

center = np.argmin(np.linalg.norm(mesh.vertices, axis=1))
print(f"u at the innermost vertex: {u[center]:.6f}")
print(f"exact value at the origin: {float(exact_solution(2, 0.5, np.zeros(2))):.6f}")
print(f"lumped L2 error:           {report.l2_error:.3e}")
