"""Asymptotic decay of the kernel entries away from the zero offset.

The true kernel decays like |p|^-(d+2s).  The ball-surrogate (spectral)
kernel decays like |p|^-(d+1)/2 in two and three dimensions, and like
|p|^-(1+min(1,2s)) in one dimension, which is why its entries spread out
below the reference line in log-log plots.  The fitted slopes below use the
least-squares fit over the tail |p| >= max|p|/2.
"""

from fraclap import decay_profile, fft_uniform, spectral

print("fft scheme: expected slope -(d+2s)")
for dim, n_fd, m in [(1, 81, 2 ** 12), (2, 32, 2048), (3, 16, 512)]:
    for s in (0.25, 0.5, 0.75):
        slope = decay_profile(fft_uniform(s, dim, n_fd, m)).fitted_slope
        print(f"  d={dim} s={s:<5} slope={slope:+.3f}  expected={-(dim + 2 * s):+.2f}")

print("spectral scheme: expected slope -(d+1)/2 for d >= 2")
for dim, n_fd in [(2, 48), (3, 20)]:
    for s in (0.25, 0.5, 0.75):
        slope = decay_profile(spectral(s, dim, n_fd, 64)).fitted_slope
        print(f"  d={dim} s={s:<5} slope={slope:+.3f}  expected={-(dim + 1) / 2:+.2f}")

print("spectral scheme in 1D: expected slope -(1+min(1,2s))")
for s in (0.25, 0.75):
    slope = decay_profile(spectral(s, 1, 81, 64)).fitted_slope
    print(f"  d=1 s={s:<5} slope={slope:+.3f}  expected={-(1 + min(1, 2 * s)):+.2f}")
