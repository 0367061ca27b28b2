"""Skew Brownian motion: path schemes and interface local-time laws.

A skew Brownian path with skew parameter q in [-1, 1] started at x0 solves

    x(t) = x0 + q * eta(t) + w(t),

where eta is the local time the path accumulates at the interface x = 0.
Three simulation routes are implemented, chosen by q:

- |q| < 1, q != 0: an explicit Euler scheme whose drift is a narrow Gaussian
  bump of total mass artanh(q); the local time is read off the accumulated
  drift, and the defining identity above holds exactly by construction.
- q = 0: plain Brownian motion; the local time comes from the modulus of the
  path minus its martingale part, clamped to be nondecreasing.
- q = +1 or -1: exact one-sided reflection via the running-extremum map.

The law of eta(t) does not depend on q. Its CDF, its atom at zero, an exact
sampler, and the mean local time are provided as closed-form targets for the
simulation schemes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import (
    NumericFailure,
    RandomStream,
    TimeGrid,
    WienerPath,
    gaussian_tail,
    gaussian_tail_inverse,
    integrate,
    map_blocks,
    path_block_size,
    substream_normals,
)

__all__ = [
    "SUPPORT_RADIUS",
    "SbmParams",
    "MollifiedDrift",
    "SbmPath",
    "TransformedPath",
    "LocalTimeLaw",
    "TerminalEnsemble",
    "skew_to_mass",
    "drift_for_skew",
    "eval_mollified_drift",
    "drift_support_radius",
    "local_time_resolution",
    "s_transform",
    "s_transform_slope",
    "s_inverse",
    "transformed_volatility",
    "limit_sigma",
    "space_map",
    "space_map_inverse",
    "simulate_sbm",
    "simulate_sbm_mollified",
    "simulate_sbm_transformed",
    "simulate_reflected",
    "tanaka_local_time",
    "local_time_atom",
    "local_time_cdf",
    "local_time_cdf_right",
    "sample_local_time",
    "expected_local_time",
    "terminal_ensemble",
    "transformed_terminal_ensemble",
    "reflected_path_block",
    "wiener_matrix",
    "ensemble_block_size",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Half-width of the effective support of the standard Gaussian bump, in units
# of the inverse squeeze scale: beyond 6 standard deviations the drift is
# below 2e-8 of its peak and is treated as inactive.
SUPPORT_RADIUS = 6.0


# ---------------------------------------------------------------------------
# parameters and drift


@dataclass(frozen=True)
class SbmParams:
    """Skew parameter, start point, and squeeze scale of the drift bump."""

    q: float
    x0: float
    mollifier_n: int = 256

    def __post_init__(self):
        if not -1.0 <= self.q <= 1.0:
            raise ValueError(f"skew parameter must lie in [-1, 1], got {self.q}")
        if self.mollifier_n < 1:
            raise ValueError(f"mollifier scale must be >= 1, got {self.mollifier_n}")


@dataclass(frozen=True)
class MollifiedDrift:
    """Gaussian drift bump: total mass `mass`, squeezed by factor `scale`.

    The unsqueezed profile is mass * exp(-x^2/2) / sqrt(2 pi); squeezing
    multiplies the argument and the height by `scale`, preserving the mass.
    """

    mass: float
    scale: int = 256

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")


def skew_to_mass(q: float) -> float:
    """Drift mass whose hyperbolic tangent equals the skew parameter."""
    if not -1.0 < q < 1.0:
        raise ValueError(
            f"skew parameter must lie strictly inside (-1, 1), got {q}; "
            "the drift mass diverges at the reflecting edges"
        )
    return math.atanh(q)


def drift_for_skew(q: float, scale: int = 256) -> MollifiedDrift:
    return MollifiedDrift(mass=skew_to_mass(q), scale=int(scale))


def eval_mollified_drift(drift: MollifiedDrift, x):
    """Squeezed drift value scale * a(scale * x); scalar in, scalar out."""
    z = drift.scale * np.asarray(x, dtype=float)
    out = (drift.scale * drift.mass / _SQRT_2PI) * np.exp(-0.5 * z * z)
    return float(out) if out.ndim == 0 else out


def drift_support_radius(drift: MollifiedDrift) -> float:
    """Distance from the interface beyond which the drift is negligible."""
    return SUPPORT_RADIUS / drift.scale


def local_time_resolution(drift: MollifiedDrift, q: float, horizon: float) -> float:
    """Largest local time a path can log without entering the drift support.

    The Euler scheme accumulates eta at rate a_n(x)/q even far from the
    interface, where the bump tail is tiny but nonzero. Over `horizon` this
    puts a floor on resolvable local time; empirical values below it are
    indistinguishable from the exact law's atom at zero.
    """
    if q == 0.0:
        raise ValueError("resolution floor is defined for q != 0 only")
    edge = eval_mollified_drift(drift, drift_support_radius(drift))
    return horizon * edge / abs(q)


# ---------------------------------------------------------------------------
# drift-eliminating space transform


def _transform_coeffs(drift: MollifiedDrift) -> tuple[float, float]:
    # normalising slope c and the mass, bundled for the integrand
    c = math.exp(-drift.mass) / (1.0 + math.exp(-2.0 * drift.mass))
    return c, drift.mass


def _slope_integrand(mass: float):
    # exp{-2 * (cumulative drift mass from 0 to v)}, normalised at v = 0
    return lambda v: math.exp(-mass + 2.0 * mass * float(gaussian_tail(v)))

_CAP = 8.0  # beyond this the integrand is flat to machine precision


def _capped_integral(mass: float, z: float) -> float:
    g = _slope_integrand(mass)
    if z >= 0.0:
        zc = min(z, _CAP)
        val = integrate(g, 0.0, zc)
        if z > _CAP:
            val += (z - _CAP) * math.exp(-mass)
        return val
    zc = max(z, -_CAP)
    val = -integrate(g, zc, 0.0)
    if z < -_CAP:
        val += (z + _CAP) * math.exp(mass)
    return val


def s_transform(drift: MollifiedDrift, x: float) -> float:
    """Space transform removing the squeezed drift from the dynamics.

    Strictly increasing, fixes 0, with slopes between the two limit values
    (1 -/+ tanh(mass)) / 2; as the squeeze scale grows it converges to the
    piecewise-linear map of space_map.
    """
    c, mass = _transform_coeffs(drift)
    return (c / drift.scale) * _capped_integral(mass, drift.scale * float(x))


def s_transform_slope(drift: MollifiedDrift, x: float) -> float:
    """Derivative of s_transform at x."""
    c, mass = _transform_coeffs(drift)
    return c * _slope_integrand(mass)(drift.scale * float(x))


def s_inverse(drift: MollifiedDrift, y: float) -> float:
    """Inverse of s_transform, bracketed by the global slope bounds."""
    y = float(y)
    if y == 0.0:
        return 0.0
    c, mass = _transform_coeffs(drift)
    s_min = c * math.exp(-abs(mass))
    s_max = c * math.exp(abs(mass))
    pad = 1e-12 * (1.0 + abs(y) / s_min)
    if y > 0.0:
        lo, hi = y / s_max - pad, y / s_min + pad
    else:
        lo, hi = y / s_min - pad, y / s_max + pad
    try:
        root, info = brentq(
            lambda x: s_transform(drift, x) - y,
            lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200, full_output=True,
        )
    except ValueError as exc:
        raise NumericFailure(f"transform inversion failed at y={y}: {exc}") from exc
    if not info.converged:
        raise NumericFailure(f"transform inversion did not converge at y={y}")
    return float(root)


def transformed_volatility(drift: MollifiedDrift, y: float) -> float:
    """Diffusion coefficient of the transformed process at transformed
    position y: the transform slope at the preimage of y."""
    return s_transform_slope(drift, s_inverse(drift, y))


def limit_sigma(q: float, y):
    """Squeeze-limit volatility (1 - q * sign y) / 2; sign(0) is taken as 0."""
    if not -1.0 < q < 1.0:
        raise ValueError(f"limit transform needs |q| < 1, got q={q}")
    out = 0.5 * (1.0 - q * np.sign(np.asarray(y, dtype=float)))
    return float(out) if out.ndim == 0 else out


def space_map(q: float, x):
    """Squeeze-limit of s_transform: x * (1 - q * sign x) / 2."""
    if not -1.0 < q < 1.0:
        raise ValueError(f"limit transform needs |q| < 1, got q={q}")
    x = np.asarray(x, dtype=float)
    out = 0.5 * x * (1.0 - q * np.sign(x))
    return float(out) if out.ndim == 0 else out


def space_map_inverse(q: float, y):
    """Inverse of space_map: 2 y / (1 - q * sign y)."""
    if not -1.0 < q < 1.0:
        raise ValueError(f"limit transform needs |q| < 1, got q={q}")
    y = np.asarray(y, dtype=float)
    out = 2.0 * y / (1.0 - q * np.sign(y))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class SbmPath:
    """Skew path with its local time and driver; x = x0 + q * eta + w at
    every node, eta nondecreasing from 0."""

    grid: TimeGrid
    q: float
    x: np.ndarray
    eta: np.ndarray
    driver: WienerPath
    tanaka_clamp: float = 0.0

    @property
    def x0(self) -> float:
        return float(self.x[0])


@dataclass(frozen=True, eq=False)
class TransformedPath:
    """Euler path in transformed coordinates plus its pullback to x-space."""

    grid: TimeGrid
    q: float
    y: np.ndarray
    x: np.ndarray
    driver: WienerPath


def simulate_sbm(params: SbmParams, wiener: WienerPath) -> SbmPath:
    """Route to the appropriate scheme for the skew parameter."""
    if abs(params.q) == 1.0:
        return simulate_reflected(params.x0, params.q, wiener)
    if params.q == 0.0:
        x = params.x0 + wiener.scalar()
        eta, clamp = tanaka_local_time(x, wiener)
        return SbmPath(wiener.grid, 0.0, x, eta, wiener, tanaka_clamp=clamp)
    return simulate_sbm_mollified(params, wiener)


def simulate_sbm_mollified(params: SbmParams, wiener: WienerPath) -> SbmPath:
    """Explicit Euler scheme with the squeezed Gaussian drift.

    The local time is the primary recursion (accumulated drift divided by q)
    and the position is reconstructed from it, so the defining identity
    x = x0 + q * eta + w holds to the last bit at every node.
    """
    if abs(params.q) >= 1.0 or params.q == 0.0:
        raise ValueError(
            "mollified scheme needs 0 < |q| < 1; use simulate_reflected for "
            "|q| = 1 and the modulus estimator for q = 0"
        )
    if wiener.dims != 1:
        raise ValueError("skew schemes take a one-dimensional driver")
    grid = wiener.grid
    q, x0, n = params.q, params.x0, params.mollifier_n
    mass = skew_to_mass(q)
    coef = n * mass / _SQRT_2PI
    dt = grid.dt
    w = wiener.scalar()
    m = grid.steps
    x = np.empty(m + 1)
    eta = np.empty(m + 1)
    x[0], eta[0] = x0, 0.0
    xk, ek = x0, 0.0
    for k in range(m):
        z = n * xk
        ek += (coef * math.exp(-0.5 * z * z) / q) * dt
        xk = x0 + q * ek + w[k + 1]
        eta[k + 1] = ek
        x[k + 1] = xk
    return SbmPath(grid, q, x, eta, wiener)


def simulate_sbm_transformed(params: SbmParams, wiener: WienerPath) -> TransformedPath:
    """Euler scheme in squeeze-limit transformed coordinates.

    The transformed state diffuses with the piecewise-constant volatility of
    limit_sigma and no drift; positions are pulled back through the inverse
    map. No local time is produced by this route; it serves as an
    independent check on the law of x(t).
    """
    if abs(params.q) >= 1.0:
        raise ValueError(f"transformed scheme needs |q| < 1, got q={params.q}")
    if wiener.dims != 1:
        raise ValueError("skew schemes take a one-dimensional driver")
    grid = wiener.grid
    q = params.q
    dw = np.diff(wiener.scalar())
    m = grid.steps
    y = np.empty(m + 1)
    y[0] = space_map(q, params.x0)
    yk = y[0]
    for k in range(m):
        yk += 0.5 * (1.0 - q * _sign(yk)) * dw[k]
        y[k + 1] = yk
    x = space_map_inverse(q, y)
    return TransformedPath(grid, q, y, np.atleast_1d(x), wiener)


def _sign(v: float) -> float:
    return 1.0 if v > 0.0 else (-1.0 if v < 0.0 else 0.0)


def simulate_reflected(x0: float, q: float, wiener: WienerPath) -> SbmPath:
    """Exact one-sided reflection at the interface for q = +1 or -1.

    The local time is the running-extremum map of the free path, the unique
    nondecreasing process keeping x0 + q * eta + w on the closed half-line.
    """
    if q not in (1.0, -1.0):
        raise ValueError(f"reflection requires q = +1 or -1, got {q}")
    if wiener.dims != 1:
        raise ValueError("skew schemes take a one-dimensional driver")
    w = wiener.scalar()
    if q == 1.0:
        if x0 < 0.0:
            raise ValueError(f"start must lie in [0, inf) for q = 1, got {x0}")
        eta = np.maximum.accumulate(np.maximum(-(x0 + w), 0.0))
    else:
        if x0 > 0.0:
            raise ValueError(f"start must lie in (-inf, 0] for q = -1, got {x0}")
        eta = np.maximum.accumulate(np.maximum(x0 + w, 0.0))
    x = x0 + q * eta + w
    return SbmPath(wiener.grid, q, x, eta, wiener)


def tanaka_local_time(x_path, wiener: WienerPath) -> tuple[np.ndarray, float]:
    """Local time of a driftless path from its modulus, clamped monotone.

    Returns (eta, clamp): eta[k] is the running maximum of
    |x_k| - |x_0| - sum_{j<k} sign(x_j) dw_j, and clamp is the largest
    correction the running maximum applied (a discretisation diagnostic,
    shrinking like sqrt(dt)).
    """
    x = np.asarray(x_path, dtype=float)
    if x.shape != (wiener.grid.steps + 1,):
        raise ValueError("path and driver live on different grids")
    dw = np.diff(wiener.scalar())
    raw = np.empty_like(x)
    raw[0] = 0.0
    raw[1:] = np.cumsum(np.sign(x[:-1]) * dw)
    raw = np.abs(x) - abs(float(x[0])) - raw
    eta = np.maximum.accumulate(raw)
    return eta, float(np.max(eta - raw))


# ---------------------------------------------------------------------------
# local-time law


@dataclass(frozen=True)
class LocalTimeLaw:
    """Law of the interface local time at time t for a start at x; the law
    is the same for every skew parameter."""

    x: float
    t: float

    def __post_init__(self):
        if not self.t > 0.0:
            raise ValueError(f"time must be positive, got {self.t}")


def local_time_atom(law: LocalTimeLaw) -> float:
    """P{eta(t) = 0}: the chance the interface is never touched by t."""
    return float(1.0 - 2.0 * gaussian_tail(abs(law.x) / math.sqrt(law.t)))


def local_time_cdf(law: LocalTimeLaw, a):
    """P{eta(t) < a}, left-continuous; zero for a <= 0.

    The atom at zero is included as soon as a > 0, so the function jumps
    from 0 to the atom across a = 0 when the start is off the interface.
    """
    a = np.asarray(a, dtype=float)
    root_t = math.sqrt(law.t)
    body = 1.0 - 2.0 * gaussian_tail((abs(law.x) + np.maximum(a, 0.0)) / root_t)
    out = np.where(a > 0.0, body, 0.0)
    return float(out) if out.ndim == 0 else out


def local_time_cdf_right(law: LocalTimeLaw, a):
    """P{eta(t) <= a}, the right-continuous companion of local_time_cdf."""
    a = np.asarray(a, dtype=float)
    root_t = math.sqrt(law.t)
    body = 1.0 - 2.0 * gaussian_tail((abs(law.x) + np.maximum(a, 0.0)) / root_t)
    out = np.where(a >= 0.0, body, 0.0)
    return float(out) if out.ndim == 0 else out


def sample_local_time(law: LocalTimeLaw, stream: RandomStream, size: int | None = None):
    """Exact draw(s) from the local-time law by inversion.

    A uniform below the atom maps to exactly zero; above it, the continuous
    branch inverts the folded-Gaussian tail. With size=None a single float
    is returned, otherwise an array of that length.
    """
    rng = stream.generator()
    u = rng.random() if size is None else rng.random(int(size))
    atom = local_time_atom(law)
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    branch = math.sqrt(law.t) * gaussian_tail_inverse(0.5 * (1.0 - arr)) - abs(law.x)
    out = np.where(arr < atom, 0.0, np.maximum(branch, 0.0))
    return float(out[0]) if size is None else out


def expected_local_time(x: float, t: float) -> float:
    """Mean local time at the interface up to t for a start at x.

    Equals the time integral of the heat kernel at the interface; computed
    by adaptive quadrature after substituting tau = s^2, which removes the
    integrable endpoint singularity.
    """
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if t == 0.0:
        return 0.0
    x = float(x)
    if x == 0.0:
        return math.sqrt(2.0 * t / math.pi)
    half_sq = 0.5 * x * x

    def integrand(s: float) -> float:
        return math.exp(-half_sq / (s * s)) if s > 0.0 else 0.0

    val = integrate(integrand, 0.0, math.sqrt(t))
    return math.sqrt(2.0 / math.pi) * val


# ---------------------------------------------------------------------------
# ensembles (one substream per path; block layout fixed by the step count)


@dataclass(frozen=True, eq=False)
class TerminalEnsemble:
    """Terminal states of `count` independent paths under one seed.

    Path i is driven by substream first_index + i; tanaka_clamp is populated
    only on the modulus-estimator route (q = 0).
    """

    params: SbmParams
    grid: TimeGrid
    seed: int
    first_index: int
    x: np.ndarray
    eta: np.ndarray
    tanaka_clamp: np.ndarray | None = None

    @property
    def count(self) -> int:
        return int(self.x.size)


def _mollified_block(params: SbmParams, grid: TimeGrid, seed: int, start: int, stop: int):
    q, n = params.q, params.mollifier_n
    coef = n * skew_to_mass(q) / _SQRT_2PI
    m, dt = grid.steps, grid.dt
    b = stop - start
    dw = substream_normals(seed, start, b, m) * math.sqrt(dt)
    w = np.zeros(b)
    eta = np.zeros(b)
    x = np.full(b, float(params.x0))
    for k in range(m):
        z = n * x
        eta += (coef / q) * dt * np.exp(-0.5 * z * z)
        w += dw[k]
        x = params.x0 + q * eta + w
    return x, eta


def wiener_matrix(x0: float, grid: TimeGrid, seed: int, start: int, stop: int):
    """Driver paths for substreams [start, stop), shifted to start at x0.

    Returns (x0 + w, dw) with shapes (steps + 1, stop - start) and
    (steps, stop - start); the columns match sample_wiener draws path by
    path.
    """
    dw = substream_normals(seed, start, stop - start, grid.steps) * math.sqrt(grid.dt)
    w = np.empty((grid.steps + 1, stop - start))
    w[0] = 0.0
    np.cumsum(dw, axis=0, out=w[1:])
    return x0 + w, dw


def _tanaka_block(params: SbmParams, grid: TimeGrid, seed: int, start: int, stop: int):
    x, dw = wiener_matrix(params.x0, grid, seed, start, stop)
    raw = np.empty_like(x)
    raw[0] = 0.0
    np.cumsum(np.sign(x[:-1]) * dw, axis=0, out=raw[1:])
    raw = np.abs(x) - abs(params.x0) - raw
    eta = np.maximum.accumulate(raw, axis=0)
    clamp = np.max(eta - raw, axis=0)
    return x[-1], eta[-1], clamp


def reflected_path_block(x0: float, q: float, grid: TimeGrid, seed: int,
                         start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact reflected paths for substreams [start, stop); returns the full
    (steps + 1, stop - start) position and local-time matrices."""
    if q not in (1.0, -1.0):
        raise ValueError(f"reflection requires q = +1 or -1, got {q}")
    w, _ = wiener_matrix(0.0, grid, seed, start, stop)
    if q == 1.0:
        if x0 < 0.0:
            raise ValueError(f"start must lie in [0, inf) for q = 1, got {x0}")
        eta = np.maximum.accumulate(np.maximum(-(x0 + w), 0.0), axis=0)
    else:
        if x0 > 0.0:
            raise ValueError(f"start must lie in (-inf, 0] for q = -1, got {x0}")
        eta = np.maximum.accumulate(np.maximum(x0 + w, 0.0), axis=0)
    return x0 + q * eta + w, eta


def ensemble_block_size(params: SbmParams, steps: int) -> int:
    """Paths per block for this parameter set; a function of (q, steps)
    only, so block layout never depends on machine or worker count."""
    base = path_block_size(steps)
    if params.q == 0.0 or abs(params.q) == 1.0:
        # these routes hold full (steps + 1, block) matrices
        return max(128, base // 4)
    return base


def terminal_ensemble(params: SbmParams, grid: TimeGrid, count: int, seed: int,
                      first_index: int = 0, workers: int = 1) -> TerminalEnsemble:
    """Simulate `count` paths and keep their terminal position and local
    time. Results are bit-identical for any worker count."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    block = ensemble_block_size(params, grid.steps)

    if abs(params.q) == 1.0:
        def run(a, b):
            x, eta = reflected_path_block(
                params.x0, params.q, grid, seed, first_index + a, first_index + b)
            return x[-1], eta[-1]
        parts = map_blocks(run, count, block, workers)
        x = np.concatenate([p[0] for p in parts])
        eta = np.concatenate([p[1] for p in parts])
        return TerminalEnsemble(params, grid, seed, first_index, x, eta)

    if params.q == 0.0:
        def run(a, b):
            return _tanaka_block(params, grid, seed, first_index + a, first_index + b)
        parts = map_blocks(run, count, block, workers)
        x = np.concatenate([p[0] for p in parts])
        eta = np.concatenate([p[1] for p in parts])
        clamp = np.concatenate([p[2] for p in parts])
        return TerminalEnsemble(params, grid, seed, first_index, x, eta, clamp)

    def run(a, b):
        return _mollified_block(params, grid, seed, first_index + a, first_index + b)
    parts = map_blocks(run, count, block, workers)
    x = np.concatenate([p[0] for p in parts])
    eta = np.concatenate([p[1] for p in parts])
    return TerminalEnsemble(params, grid, seed, first_index, x, eta)


def _transformed_block(params: SbmParams, grid: TimeGrid, seed: int, start: int, stop: int):
    q = params.q
    m, dt = grid.steps, grid.dt
    dw = substream_normals(seed, start, stop - start, m) * math.sqrt(dt)
    y = np.full(stop - start, space_map(q, params.x0))
    for k in range(m):
        y += 0.5 * (1.0 - q * np.sign(y)) * dw[k]
    return space_map_inverse(q, y)


def transformed_terminal_ensemble(params: SbmParams, grid: TimeGrid, count: int,
                                  seed: int, first_index: int = 0,
                                  workers: int = 1) -> np.ndarray:
    """Terminal positions from the transformed-coordinate scheme, driven by
    the same substreams terminal_ensemble would use."""
    if abs(params.q) >= 1.0:
        raise ValueError(f"transformed scheme needs |q| < 1, got q={params.q}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")

    def run(a, b):
        return _transformed_block(params, grid, seed, first_index + a, first_index + b)
    parts = map_blocks(run, count, path_block_size(grid.steps), workers)
    return np.concatenate(parts)
