"""Construction of the dense operator kernel by five schemes.

The kernel holds the Fourier coefficients of the discrete symbol over the
nonnegative offset orthant 0 <= p_j <= 2*n_fd; the full tensor follows from
the reflection symmetry T_{...,-p,...} = T_{...,p,...}.  Schemes:

  analytic  exact closed form, one dimension only
  fft       trapezoid rule on a uniform frequency grid, evaluated by FFT
  nufft     trapezoid rule on nodes quadratically clustered at the origin
  spectral  radially symmetric surrogate |xi|^{2s} over a volume-matched ball,
            reduced to cumulative one-dimensional Bessel integrals
  modspec   fft applied to the regularized integrand plus the spectral ball term

A decay-profile helper fits the tail slope of log|T_p| against log|p|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse

from .core import bessel_j_half_order, gamma, gauss_legendre, order_value

__all__ = [
    "SCHEMES",
    "StiffnessKernel",
    "DecayProfile",
    "analytic_1d",
    "fft_uniform",
    "nonuniform",
    "spectral",
    "modified_spectral",
    "restrict",
    "decay_profile",
    "write_kernel_csv",
    "write_decay_csv",
]

SCHEMES = ("analytic", "fft", "nufft", "spectral", "modspec")

# largest frequency-grid tensor materialized in one piece; larger builds
# stream in chunks (2D) or axis slabs (3D)
_PLAIN_LIMIT = 2 ** 24
_CHUNK_ELEMS = 2 ** 23


@dataclass(frozen=True)
class StiffnessKernel:
    """Kernel coefficients over offsets 0..2*n_fd per axis, tagged with the
    scheme that produced them."""

    dim: int
    s: float
    n_fd: int
    scheme: str
    coeffs: np.ndarray

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        coeffs = np.asarray(self.coeffs, dtype=float)
        expected = (2 * self.n_fd + 1,) * self.dim
        if coeffs.shape != expected:
            raise ValueError(f"coefficient tensor has shape {coeffs.shape}, expected {expected}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("kernel coefficients must be finite")
        if not coeffs.flat[0] > 0.0:
            raise ValueError("the zero-offset kernel entry must be positive")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "s", order_value(self.s))

    @property
    def offsets_per_axis(self) -> int:
        return 2 * self.n_fd + 1

    def full_tensor(self) -> np.ndarray:
        """Kernel extended by reflection to offsets -2*n_fd..2*n_fd per axis."""
        idx = np.abs(np.arange(-2 * self.n_fd, 2 * self.n_fd + 1))
        return self.coeffs[np.ix_(*([idx] * self.dim))]


@dataclass(frozen=True)
class DecayProfile:
    """Offset magnitudes |p| > 0, matching |T_p|, and the least-squares slope
    of log|T_p| against log|p| over the tail |p| >= max|p| / 2."""

    radii: np.ndarray
    magnitudes: np.ndarray
    fitted_slope: float


def analytic_1d(s, n_fd: int) -> StiffnessKernel:
    """Exact one-dimensional kernel.

    The closed form is T_p = (-1)^p Gamma(2s+1) / (Gamma(p+s+1) Gamma(s-p+1)).
    Consecutive entries satisfy T_{p+1} = T_p (p - s)/(p + s + 1), which is how
    the tensor is filled: the product form stays finite for offsets where the
    gamma factors individually overflow.  T_0 > 0 and T_p < 0 for p >= 1.
    """
    s = order_value(s)
    n_fd = _check_n_fd(n_fd)
    p_max = 2 * n_fd
    t = np.empty(p_max + 1)
    t[0] = gamma(2.0 * s + 1.0) / gamma(1.0 + s) ** 2
    if p_max >= 1:
        p = np.arange(p_max, dtype=float)
        t[1:] = t[0] * np.cumprod((p - s) / (p + s + 1.0))
    return StiffnessKernel(dim=1, s=s, n_fd=n_fd, scheme="analytic", coeffs=t)


def fft_uniform(s, dim: int, n_fd: int, m: int) -> StiffnessKernel:
    """Trapezoid-rule kernel on the uniform grid xi_j = pi (2j/M - 1),
    j = 0..M-1 per axis, evaluated with an FFT of size M per axis.

    Requires m >= 2*n_fd + 1.  The attainable accuracy improves with m like
    m^{-(d+2s)} since the rule aliases the exact coefficients.
    """
    s = order_value(s)
    n_fd = _check_n_fd(n_fd)
    coeffs = _uniform_fourier(_psi_integrand(s), dim, n_fd, m)
    return StiffnessKernel(dim=dim, s=s, n_fd=n_fd, scheme="fft", coeffs=coeffs)


def nonuniform(s, dim: int, n_fd: int, m: int, method: str = "auto") -> StiffnessKernel:
    """Trapezoid-rule kernel on nodes clustered quadratically at the origin,
    xi_j = pi (2j/M - 1)^2 sign(2j/M - 1) for j = 0..M, with composite
    trapezoid weights (one-sided half intervals at the two ends).

    ``method`` selects the evaluation path: "direct" contracts the weighted
    sum with per-axis cosine factors (exact up to rounding), "gridding"
    spreads the nodes onto an oversampled uniform grid with a Gaussian window
    and finishes with an FFT.  "auto" takes the direct path while the node
    tensor stays at or below 2^24 points.
    """
    s = order_value(s)
    n_fd = _check_n_fd(n_fd)
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if m < 2 * n_fd + 1:
        raise ValueError(f"m must be at least 2*n_fd + 1 = {2 * n_fd + 1}, got {m}")
    if method not in ("auto", "direct", "gridding"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "direct" if (m + 1) ** dim <= _PLAIN_LIMIT else "gridding"

    xi, w = _clustered_nodes(m)
    if method == "direct":
        coeffs = _nonuniform_direct(s, dim, n_fd, xi, w)
    else:
        coeffs = _nonuniform_gridding(s, dim, n_fd, xi, w)
    return StiffnessKernel(dim=dim, s=s, n_fd=n_fd, scheme="nufft", coeffs=coeffs)


def spectral(s, dim: int, n_fd: int, n_g: int = 64) -> StiffnessKernel:
    """Radially symmetric surrogate kernel: the symbol is replaced by
    |xi|^{2s} and the frequency cube by the ball of equal volume, of radius
    R = 2 sqrt(pi) Gamma(d/2 + 1)^{1/d}.

    The zero offset has the closed form
      2 R^{d+2s} / ((d + 2s) 2^d pi^{d/2} Gamma(d/2)),
    and each nonzero offset reduces to the radial integral of
    r^{2s + d/2} J_{d/2-1}(r) from 0 to R|p|, scaled by
    (2 pi)^{-d/2} |p|^{-(2s+d)}.  The distinct offset magnitudes are sorted
    and the integral is accumulated over consecutive intervals with an
    n_g-point Gauss-Legendre rule, so equal radii share one evaluation.
    """
    s = order_value(s)
    n_fd = _check_n_fd(n_fd)
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if n_g < 4:
        raise ValueError(f"n_g must be at least 4, got {n_g}")

    radius = ball_radius(dim)
    k = 2 * n_fd + 1
    ax = np.arange(k, dtype=np.int64)
    ssq = ax ** 2
    for _ in range(dim - 1):
        ssq = ssq[..., None] + ax ** 2
    uniq, inverse = np.unique(ssq.ravel(), return_inverse=True)
    rho = np.sqrt(uniq.astype(float))

    rule = gauss_legendre(n_g)
    lo = radius * rho[:-1]
    hi = radius * rho[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * rule.nodes[None, :]
    fvals = nodes ** (2.0 * s + 0.5 * dim) * bessel_j_half_order(dim, nodes)
    segments = half * (fvals @ rule.weights)
    # The integrand behaves like r^{2s + d - 1} at the origin, so the first
    # interval [0, R rho_1] sees an algebraic singularity that a single panel
    # resolves poorly for small s.  Grade it dyadically toward zero; every
    # sub-panel is analytic and the rule converges to rounding there.
    segments[0] = _graded_origin_integral(s, dim, hi[0], rule)
    cumulative = np.concatenate(([0.0], np.cumsum(segments)))

    values = np.empty(uniq.shape[0])
    values[0] = (2.0 * radius ** (dim + 2.0 * s)
                 / ((dim + 2.0 * s) * 2 ** dim * math.pi ** (0.5 * dim) * gamma(0.5 * dim)))
    values[1:] = cumulative[1:] / ((2.0 * math.pi) ** (0.5 * dim) * rho[1:] ** (2.0 * s + dim))
    coeffs = values[inverse].reshape((k,) * dim)
    return StiffnessKernel(dim=dim, s=s, n_fd=n_fd, scheme="spectral", coeffs=coeffs)


def modified_spectral(s, dim: int, n_fd: int, m: int, n_g: int = 64) -> StiffnessKernel:
    """Sum of the fft scheme applied to the regularized integrand
    psi(xi) - |xi|^{2s} and the spectral ball term.  In one dimension the ball
    is exactly the interval (-pi, pi), so the construction targets the true
    kernel and can be compared against the closed form directly."""
    reg, ball = _modified_spectral_parts(s, dim, n_fd, m, n_g)
    return StiffnessKernel(dim=dim, s=order_value(s), n_fd=n_fd, scheme="modspec",
                           coeffs=reg + ball.coeffs)


def restrict(kernel: StiffnessKernel, n_fd: int) -> StiffnessKernel:
    """Kernel of a smaller grid obtained by slicing.  Entries depend only on
    the offset, never on n_fd, so this equals a fresh build with identical
    scheme parameters."""
    if n_fd > kernel.n_fd:
        raise ValueError(f"cannot restrict n_fd {kernel.n_fd} to larger value {n_fd}")
    n_fd = _check_n_fd(n_fd)
    sl = (slice(0, 2 * n_fd + 1),) * kernel.dim
    return StiffnessKernel(dim=kernel.dim, s=kernel.s, n_fd=n_fd,
                           scheme=kernel.scheme, coeffs=kernel.coeffs[sl].copy())


def ball_radius(dim: int) -> float:
    """Radius of the ball whose volume matches the cube (-pi, pi)^dim."""
    return 2.0 * math.sqrt(math.pi) * gamma(0.5 * dim + 1.0) ** (1.0 / dim)


def decay_profile(kernel: StiffnessKernel, tail_fraction: float = 0.5) -> DecayProfile:
    """Offset magnitudes and |T_p| for every nonzero offset in the stored
    orthant, plus the log-log least-squares slope over the tail
    |p| >= tail_fraction * max|p| (entries with T_p = 0 are excluded from
    the fit)."""
    if kernel.n_fd < 16:
        raise ValueError("decay profile needs n_fd >= 16 for a meaningful tail")
    k = kernel.offsets_per_axis
    ax = np.arange(k, dtype=np.int64)
    ssq = ax ** 2
    for _ in range(kernel.dim - 1):
        ssq = ssq[..., None] + ax ** 2
    ssq = ssq.ravel()
    mags = np.abs(kernel.coeffs.ravel())
    nonzero_offset = ssq > 0
    radii = np.sqrt(ssq[nonzero_offset].astype(float))
    mags = mags[nonzero_offset]
    order_idx = np.argsort(radii, kind="stable")
    radii = radii[order_idx]
    mags = mags[order_idx]

    rmax = radii[-1]
    tail = (radii >= tail_fraction * rmax) & (mags > 0.0)
    if np.count_nonzero(tail) < 8:
        raise ValueError("fewer than 8 nonzero tail entries, cannot fit decay slope")
    slope = np.polyfit(np.log(radii[tail]), np.log(mags[tail]), 1)[0]
    return DecayProfile(radii=radii, magnitudes=mags, fitted_slope=float(slope))


def write_kernel_csv(kernel: StiffnessKernel, path, config_line: str | None = None):
    """Dump the nonnegative orthant as CSV with header p1[,p2[,p3]],T and
    17-significant-digit scientific entries."""
    k = kernel.offsets_per_axis
    header = ",".join(f"p{i + 1}" for i in range(kernel.dim)) + ",T"
    grids = np.meshgrid(*([np.arange(k)] * kernel.dim), indexing="ij")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if config_line:
            fh.write(f"# config: {config_line}\n")
        fh.write(header + "\n")
        flat = [g.ravel() for g in grids]
        vals = kernel.coeffs.ravel()
        for row in range(vals.shape[0]):
            offs = ",".join(str(int(g[row])) for g in flat)
            fh.write(f"{offs},{vals[row]:.16e}\n")


def write_decay_csv(profile: DecayProfile, path, config_line: str | None = None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if config_line:
            fh.write(f"# config: {config_line}\n")
        fh.write("abs_p,abs_T\n")
        for r, t in zip(profile.radii, profile.magnitudes):
            fh.write(f"{r:.16e},{t:.16e}\n")


# ---------------------------------------------------------------------------
# uniform-grid trapezoid machinery (shared by fft and modspec)

def _check_n_fd(n_fd) -> int:
    if int(n_fd) != n_fd or n_fd < 1:
        raise ValueError(f"n_fd must be a positive integer, got {n_fd}")
    return int(n_fd)


def _psi_integrand(s):
    def evaluate(axes):
        total = None
        for a in axes:
            q = 4.0 * np.sin(0.5 * a) ** 2
            total = q if total is None else total + q
        return total ** s
    return evaluate


def _regularized_integrand(s):
    def evaluate(axes):
        sin_total = None
        sq_total = None
        for a in axes:
            q = 4.0 * np.sin(0.5 * a) ** 2
            sin_total = q if sin_total is None else sin_total + q
            r = a * a
            sq_total = r if sq_total is None else sq_total + r
        return sin_total ** s - sq_total ** s
    return evaluate


def _uniform_fourier(integrand, dim: int, n_fd: int, m: int) -> np.ndarray:
    """Coefficients C_p = (-1)^{sum p} / M^d  sum_j g(xi_j) exp(2 pi i p.j / M)
    over the nonnegative orthant p in [0, 2 n_fd]^d, for g sampled on the
    uniform grid xi_j = pi (2j/M - 1), j = 0..M-1 per axis."""
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    k = 2 * n_fd + 1
    if m < k:
        raise ValueError(f"m must be at least 2*n_fd + 1 = {k}, got {m}")
    xi = np.pi * (2.0 * np.arange(m) / m - 1.0)

    if dim == 1:
        c = scipy.fft.ifft(integrand((xi,)))[:k]
    elif dim == 2:
        if m * m <= _PLAIN_LIMIT:
            c = scipy.fft.ifft2(integrand((xi[:, None], xi[None, :])))[:k, :k]
        else:
            step = max(1, _CHUNK_ELEMS // m)
            partial = np.empty((m, k), dtype=complex)
            for i0 in range(0, m, step):
                block = integrand((xi[i0:i0 + step, None], xi[None, :]))
                partial[i0:i0 + step] = scipy.fft.ifft(block, axis=1)[:, :k]
            c = scipy.fft.ifft(partial, axis=0)[:k]
    else:
        if m ** 3 <= _PLAIN_LIMIT:
            c = scipy.fft.ifftn(integrand((xi[:, None, None], xi[None, :, None],
                                        xi[None, None, :])))[:k, :k, :k]
        else:
            partial = np.empty((m, k, k), dtype=complex)
            for j in range(m):
                block = integrand((xi[j], xi[:, None], xi[None, :]))
                partial[j] = scipy.fft.ifft2(block)[:k, :k]
            c = scipy.fft.ifft(partial, axis=0)[:k]

    scale = np.max(np.abs(c.real))
    residue = np.max(np.abs(c.imag))
    if residue > 1e-10 * max(scale, np.finfo(float).tiny):
        raise ArithmeticError(
            f"imaginary residue {residue:.3e} exceeds 1e-10 of the coefficient scale {scale:.3e}")
    signs = 1.0 - 2.0 * (np.arange(k) % 2)
    out = c.real
    for axis in range(dim):
        shape = [1] * dim
        shape[axis] = k
        out = out * signs.reshape(shape)
    return out


# ---------------------------------------------------------------------------
# clustered-node machinery for the nufft scheme

def _clustered_nodes(m: int):
    t = 2.0 * np.arange(m + 1) / m - 1.0
    xi = np.pi * t * t * np.sign(t)
    w = np.empty(m + 1)
    w[1:-1] = 0.5 * (xi[2:] - xi[:-2])
    w[0] = 0.5 * (xi[1] - xi[0])
    w[-1] = 0.5 * (xi[-1] - xi[-2])
    return xi, w


def _nonuniform_direct(s, dim, n_fd, xi, w):
    """Weighted sum contracted axis by axis with cosine factors.  The node and
    weight sets are symmetric under xi -> -xi, so the sine parts cancel
    exactly and the cosine contraction is the symmetrized real value."""
    k = 2 * n_fd + 1
    cos_f = np.cos(np.outer(np.arange(k), xi))
    if dim == 1:
        q = w * _psi_integrand(s)((xi,)) / (2.0 * math.pi)
        return cos_f @ q
    if dim == 2:
        q = np.outer(w, w) * _psi_integrand(s)((xi[:, None], xi[None, :])) / (2.0 * math.pi) ** 2
        return cos_f @ q @ cos_f.T
    q = (w[:, None, None] * w[None, :, None] * w[None, None, :]
         * _psi_integrand(s)((xi[:, None, None], xi[None, :, None], xi[None, None, :]))
         / (2.0 * math.pi) ** 3)
    out = np.tensordot(cos_f, q, axes=(1, 0))
    out = np.tensordot(out, cos_f, axes=(1, 1))          # contract former axis 1
    out = np.tensordot(out, cos_f, axes=(1, 1))          # contract former axis 2
    return np.ascontiguousarray(out)


# Gaussian gridding parameters: oversampling 2, window support of 12 grid
# points on each side.  The window variance tau balances the truncation and
# aliasing errors at about 3e-12 relative.
_GRID_WIDTH = 12
_GRID_OVERSAMPLING = 2


def _spreading_matrix(xi, n_os, tau):
    h = 2.0 * math.pi / n_os
    centers = np.rint((xi + math.pi) / h).astype(np.int64)
    offsets = np.arange(-_GRID_WIDTH, _GRID_WIDTH + 1)
    idx = centers[None, :] + offsets[:, None]
    dist = idx * h - math.pi - xi[None, :]
    vals = np.exp(-dist * dist / (4.0 * tau))
    rows = np.mod(idx, n_os)
    cols = np.broadcast_to(np.arange(xi.shape[0])[None, :], rows.shape)
    mat = scipy.sparse.coo_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n_os, xi.shape[0]))
    return mat.tocsc()


def _nonuniform_gridding(s, dim, n_fd, xi, w):
    k = 2 * n_fd + 1
    n_os = scipy.fft.next_fast_len(max(2 * _GRID_OVERSAMPLING * (2 * n_fd + 1),
                                       4 * _GRID_WIDTH + 4))
    if n_os ** dim > 2 ** 25:
        raise MemoryError(
            f"gridded transform of size {n_os}^{dim} exceeds the desk-scale memory budget")
    tau = math.sqrt(2.0) * math.pi * _GRID_WIDTH / (n_os * n_os)
    spread = _spreading_matrix(xi, n_os, tau)
    mpts = xi.shape[0]

    if dim == 1:
        b = spread @ (w * _psi_integrand(s)((xi,)))
    elif dim == 2:
        step = max(1, _CHUNK_ELEMS // mpts)
        left = np.zeros((n_os, mpts))
        for i0 in range(0, mpts, step):
            block = (w[i0:i0 + step, None] * w[None, :]
                     * _psi_integrand(s)((xi[i0:i0 + step, None], xi[None, :])))
            left += spread[:, i0:i0 + step] @ block
        b = (spread @ left.T).T
    else:
        b = np.zeros((n_os,) * 3)
        for j in range(mpts):
            plane = (w[j] * w[:, None] * w[None, :]
                     * _psi_integrand(s)((xi[j], xi[:, None], xi[None, :])))
            plane = spread @ plane
            plane = (spread @ plane.T).T
            col = spread.getcol(j).tocoo()
            b[col.row] += col.data[:, None, None] * plane[None, :, :]

    b_hat = scipy.fft.ifftn(b)
    sl = (slice(0, k),) * dim
    c = b_hat[sl].real.copy()
    # Per-axis deconvolution of the Gaussian window plus the alternating sign
    # from the grid starting at -pi.  The (2 pi / n_os)^d Poisson factor
    # cancels against the n_os^d of the unnormalized mode sums and the
    # 1/(2 pi)^d of the coefficient definition.
    p = np.arange(k, dtype=float)
    correction = np.exp(tau * p * p) / math.sqrt(4.0 * math.pi * tau)
    signs = 1.0 - 2.0 * (np.arange(k) % 2)
    factor = correction * signs
    for axis in range(dim):
        shape = [1] * dim
        shape[axis] = k
        c = c * factor.reshape(shape)
    return c


def _graded_origin_integral(s, dim, upper, rule):
    """Integral of r^{2s + d/2} J_{d/2-1}(r) over [0, upper] with dyadic
    grading toward the singular endpoint."""
    exponent = 2.0 * s + dim - 1.0  # local behavior r^exponent near 0
    edges = upper * 2.0 ** (-np.arange(1, 54, dtype=float))
    total = 0.0
    hi = upper
    for lo in edges:
        nodes, weights = rule.mapped(lo, hi)
        total += weights @ (nodes ** (2.0 * s + 0.5 * dim) * bessel_j_half_order(dim, nodes))
        hi = lo
    # closed leading-order contribution of the last sliver [0, hi]
    lead = hi ** (exponent + 1.0) / ((exponent + 1.0) * 2.0 ** (0.5 * dim - 1.0) * gamma(0.5 * dim))
    return total + lead


def _modified_spectral_parts(s, dim, n_fd, m, n_g):
    reg = _uniform_fourier(_regularized_integrand(order_value(s)), dim, n_fd, m)
    ball = spectral(s, dim, n_fd, n_g)
    return reg, ball
