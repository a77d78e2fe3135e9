"""Error turnover under refinement with a deliberately coarse kernel.

The kernel here uses the smallest legal trapezoid grid (M = 2 n_fd + 2), so
its entrywise error stays large.  Refining the mesh and overlay grid first
reduces the solution error, then the amplified kernel error takes over and
the total error climbs back up.
"""

from fraclap import generate_ball_mesh, solve_bvp

print("n_fd    N        l2_error")
errors = []
for n_fd in (8, 12, 18, 27, 40, 60, 90, 130):
    mesh = generate_ball_mesh(2, 1.0 / max(3, int(0.55 * n_fd)))
    u, report = solve_bvp(mesh, 0.5, "fft", n_fd=n_fd, m=2 * n_fd + 2,
                          precond="circulant")
    errors.append(report.l2_error)
    print(f"{n_fd:<7} {mesh.n_elements:<8} {report.l2_error:.5e}")

best = min(range(len(errors)), key=errors.__getitem__)
print(f"\nminimum at sweep index {best}; the error is not monotone under refinement")
