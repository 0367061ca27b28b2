"""Multidimensional diffusions with a skew hyperplane interface.

The state splits along a unit normal nu into a one-dimensional skew motion
(the normal coordinate, carrying the interface local time eta) and d-1
tangential coordinates that feel the interface only through eta: their drift
alpha and extra noise beta_tilde advance on the local-time clock. A second
Wiener process wtilde, independent of the driver, supplies that extra noise;
its increments over a step are exactly N(0, d_eta * I) given d_eta.

Also here: the generalized inverse of eta (first passage of the local-time
clock), the time-changed representation of the path with its residual
check, tail bounds for both clocks, and the shared-noise experiment showing
the terminal state depends continuously (in probability) on the start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import null_space

from .core import (
    RandomStream,
    TimeGrid,
    WienerPath,
    derive_stream,
    gaussian_tail,
    make_grid,
    map_blocks,
    substream_normals,
)
from .sbm import (
    LocalTimeLaw,
    SbmParams,
    SbmPath,
    local_time_cdf,
    reflected_path_block,
    simulate_sbm,
    skew_to_mass,
)
from .stats import mc_summary

__all__ = [
    "LOCAL_TIME_MESH",
    "MESH_SPAN",
    "CoefficientError",
    "HyperplaneFrame",
    "GdiffCoefficients",
    "GdiffPath",
    "CoefficientReport",
    "TimeChangedSample",
    "RhoTailReport",
    "SmallLocalTimeReport",
    "OffsetEstimate",
    "make_frame",
    "coefficient_profile",
    "probe_points",
    "validate_coefficients",
    "simulate_gdiff",
    "gdiff_terminal_ensemble",
    "inverse_local_time",
    "time_changed_path",
    "continuity_experiment",
    "rho_tail_check",
    "rho_tail_experiment",
    "small_local_time_check",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Resolution of the shared tangential-noise clock in continuity experiments:
# wtilde is realized once per path on a fixed local-time mesh so that both
# members of a coupled pair read the same noise field.
LOCAL_TIME_MESH = 1e-3
MESH_SPAN = 8.0


class CoefficientError(ValueError):
    """A tangential coefficient violates symmetry or nonnegativity."""


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True, eq=False)
class HyperplaneFrame:
    """Unit normal plus an orthonormal basis of the interface hyperplane."""

    normal: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        d = self.normal.size
        if d < 2:
            raise ValueError(f"frame needs dimension >= 2, got {d}")
        if self.basis.shape != (d, d - 1):
            raise ValueError(f"basis must have shape ({d}, {d - 1}), got {self.basis.shape}")
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-12:
            raise ValueError("normal must be a unit vector")
        gram = self.basis.T @ self.basis
        if (np.max(np.abs(gram - np.eye(d - 1))) > 1e-12
                or np.max(np.abs(self.basis.T @ self.normal)) > 1e-12):
            raise ValueError("basis must be orthonormal and orthogonal to the normal")

    @property
    def dim(self) -> int:
        return int(self.normal.size)

    def project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto the hyperplane, in ambient coordinates."""
        v = np.asarray(v, dtype=float)
        return v - np.outer(v @ self.normal, self.normal).reshape(v.shape)

    def tangential(self, v: np.ndarray) -> np.ndarray:
        """Coordinates of the projection in the hyperplane basis."""
        return np.asarray(v, dtype=float) @ self.basis

    def assemble(self, x_nu, u) -> np.ndarray:
        """Ambient point(s) from normal coordinate(s) and basis coordinates."""
        return np.multiply.outer(np.asarray(x_nu, dtype=float), self.normal) + \
            np.asarray(u, dtype=float) @ self.basis.T


def make_frame(normal) -> HyperplaneFrame:
    """Frame for the hyperplane orthogonal to `normal` (any nonzero vector)."""
    v = np.asarray(normal, dtype=float).ravel()
    norm = np.linalg.norm(v)
    if v.size < 2:
        raise ValueError(f"frame needs dimension >= 2, got {v.size}")
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("normal must be a finite nonzero vector")
    v = v / norm
    basis = null_space(v[None, :])
    return HyperplaneFrame(v, basis)


# ---------------------------------------------------------------------------
# tangential coefficients


@dataclass(frozen=True, eq=False)
class GdiffCoefficients:
    """Tangential drift alpha, noise factor beta_tilde, joint bound, skew.

    alpha maps (..., d-1) tangential coordinates to the same shape;
    beta_tilde maps them to symmetric nonnegative (..., d-1, d-1) matrices.
    `bound` caps both the size functional |alpha| + ||beta_tilde|| and the
    squared-Lipschitz quotient.
    """

    alpha: Callable[[np.ndarray], np.ndarray]
    beta_tilde: Callable[[np.ndarray], np.ndarray]
    bound: float
    q: float
    name: str = "custom"

    def __post_init__(self):
        if not self.bound > 0.0:
            raise ValueError(f"coefficient bound must be positive, got {self.bound}")
        if not -1.0 <= self.q <= 1.0:
            raise ValueError(f"skew parameter must lie in [-1, 1], got {self.q}")


def coefficient_profile(name: str, dim: int, q: float, alpha0: float = 0.0,
                        beta0: float = 0.5, amp: float = 0.5,
                        freq: float = 1.0) -> GdiffCoefficients:
    """Named coefficient sets with analytically known bounds.

    zero        alpha = 0, beta_tilde = 0
    constant    alpha = alpha0 * ones, beta_tilde = beta0 * identity
    sinusoidal  alpha_i(u) = amp * sin(freq * u_i),
                beta_tilde(u) = beta0 * I + (amp/2) * diag(sin(freq * u_i));
                Lipschitz with constant amp * freq, positive semidefinite
                whenever beta0 >= amp / 2
    """
    if dim < 2:
        raise ValueError(f"profiles need dimension >= 2, got {dim}")
    k = dim - 1
    eye = np.eye(k)

    if name == "zero":
        def alpha(u):
            return np.zeros_like(np.asarray(u, dtype=float))

        def beta(u):
            u = np.asarray(u, dtype=float)
            return np.zeros(u.shape[:-1] + (k, k))

        return GdiffCoefficients(alpha, beta, bound=1.0, q=q, name="zero")

    if name == "constant":
        def alpha(u, a0=float(alpha0)):
            return np.full_like(np.asarray(u, dtype=float), a0)

        def beta(u, b0=float(beta0)):
            u = np.asarray(u, dtype=float)
            out = np.empty(u.shape[:-1] + (k, k))
            out[...] = b0 * eye
            return out

        bound = abs(alpha0) * math.sqrt(k) + abs(beta0)
        return GdiffCoefficients(alpha, beta, bound=max(bound, 1e-12), q=q,
                                 name="constant")

    if name == "sinusoidal":
        if beta0 < amp / 2.0:
            raise CoefficientError(
                f"sinusoidal profile needs beta0 >= amp/2 for nonnegativity, "
                f"got beta0={beta0}, amp={amp}"
            )

        def alpha(u, a=float(amp), f=float(freq)):
            return a * np.sin(f * np.asarray(u, dtype=float))

        def beta(u, b0=float(beta0), a=float(amp), f=float(freq)):
            u = np.asarray(u, dtype=float)
            diag = b0 + 0.5 * a * np.sin(f * u)
            out = np.zeros(u.shape[:-1] + (k, k))
            step = np.arange(k)
            out[..., step, step] = diag
            return out

        sup_part = amp * math.sqrt(k) + beta0 + 0.5 * amp
        lip_part = 1.25 * (amp * freq) ** 2
        return GdiffCoefficients(alpha, beta, bound=max(sup_part, lip_part), q=q,
                                 name="sinusoidal")

    raise ValueError(f"unknown coefficient profile {name!r}; "
                     "choose zero, constant, or sinusoidal")


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def probe_points(tangent_dim: int, count: int = 1000, extent: float = 2.0,
                 seed: int = 0) -> np.ndarray:
    """Probe set on the interface: half low-discrepancy lattice, half random.

    The lattice is a Kronecker sequence with square-root-of-prime frequencies
    scaled to [-extent, extent]^tangent_dim.
    """
    if tangent_dim < 1:
        raise ValueError(f"tangent dimension must be >= 1, got {tangent_dim}")
    if count < 2:
        raise ValueError(f"need at least 2 probes, got {count}")
    if tangent_dim > len(_PRIMES):
        raise ValueError(f"probe lattice supports at most {len(_PRIMES)} dimensions")
    half = count // 2
    freqs = np.sqrt(np.array(_PRIMES[:tangent_dim], dtype=float))
    idx = np.arange(1, half + 1)[:, None]
    lattice = (idx * freqs) % 1.0
    lattice = extent * (2.0 * lattice - 1.0)
    rng = derive_stream(seed, 0).generator()
    random_part = rng.uniform(-extent, extent, size=(count - half, tangent_dim))
    return np.vstack([lattice, random_part])


@dataclass(frozen=True)
class CoefficientReport:
    """Probe maxima of the size and Lipschitz functionals against the bound."""

    sup_value: float
    lipschitz_value: float
    bound: float
    probes: int
    pairs_scanned: int

    @property
    def passed(self) -> bool:
        return self.sup_value <= self.bound and self.lipschitz_value <= self.bound


_MAX_PAIRS = 1_000_000


def _spectral_norms(mats: np.ndarray) -> np.ndarray:
    # symmetric batch: spectral norm is the largest absolute eigenvalue
    eig = np.linalg.eigvalsh(mats)
    return np.max(np.abs(eig), axis=-1)


def _alpha_batch(coeffs: GdiffCoefficients, pts: np.ndarray) -> np.ndarray:
    """Evaluate alpha on a (p, k) batch, tolerating single-point callables."""
    try:
        out = np.asarray(coeffs.alpha(pts), dtype=float)
        if out.shape == pts.shape:
            return out
    except Exception:
        pass
    out = np.empty_like(pts)
    for i in range(pts.shape[0]):
        out[i] = np.asarray(coeffs.alpha(pts[i]), dtype=float)
    return out


def _beta_batch(coeffs: GdiffCoefficients, pts: np.ndarray) -> np.ndarray:
    """Evaluate beta_tilde on a (p, k) batch, tolerating single-point callables."""
    k = pts.shape[-1]
    want = pts.shape[:-1] + (k, k)
    try:
        out = np.asarray(coeffs.beta_tilde(pts), dtype=float)
        if out.shape == want:
            return out
    except Exception:
        pass
    out = np.empty(want)
    for i in range(pts.shape[0]):
        out[i] = np.asarray(coeffs.beta_tilde(pts[i]), dtype=float)
    return out


def validate_coefficients(coeffs: GdiffCoefficients, probes) -> CoefficientReport:
    """Check the size bound and Lipschitz bound over a probe set.

    Raises CoefficientError if beta_tilde is asymmetric or has a negative
    eigenvalue at any probe. The pairwise Lipschitz scan is capped at 10^6
    pairs by truncating the probe list.
    """
    pts = np.asarray(probes, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.size == 0:
        raise ValueError("probe set must be nonempty")
    a = _alpha_batch(coeffs, pts)
    b = _beta_batch(coeffs, pts)
    if np.max(np.abs(b - np.swapaxes(b, -1, -2))) > 1e-9:
        raise CoefficientError("beta_tilde is asymmetric at a probe point")
    eig = np.linalg.eigvalsh(b)
    if np.min(eig) < -1e-9:
        raise CoefficientError("beta_tilde has a negative eigenvalue at a probe point")
    sup_value = float(np.max(np.linalg.norm(a, axis=-1) + np.max(np.abs(eig), axis=-1)))

    # pairwise scan, truncated to keep at most _MAX_PAIRS pairs
    p = pts.shape[0]
    if p * (p - 1) // 2 > _MAX_PAIRS:
        p = int((1 + math.isqrt(1 + 8 * _MAX_PAIRS)) // 2)
        pts, a, b = pts[:p], a[:p], b[:p]
    lip = 0.0
    pairs = 0
    for i in range(p - 1):
        du = pts[i + 1:] - pts[i]
        dist_sq = np.einsum("ij,ij->i", du, du)
        keep = dist_sq > 0.0
        if not np.any(keep):
            continue
        da = a[i + 1:][keep] - a[i]
        db = b[i + 1:][keep] - b[i]
        num = np.einsum("ij,ij->i", da, da) + _spectral_norms(db) ** 2
        lip = max(lip, float(np.max(num / dist_sq[keep])))
        pairs += int(np.count_nonzero(keep))
    return CoefficientReport(
        sup_value=sup_value,
        lipschitz_value=lip,
        bound=float(coeffs.bound),
        probes=int(pts.shape[0]),
        pairs_scanned=pairs,
    )


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True, eq=False)
class GdiffPath:
    """One interface-diffusion path with its drivers and bookkeeping.

    x has shape (steps + 1, d). The normal coordinate of x is exactly
    normal_path.x (stored, not recomputed), and tangent holds the basis
    coordinates of the tangential part. drift_integral and noise_integral
    accumulate the alpha and beta_tilde contributions on the local-time
    clock, for the time-changed residual check.
    """

    grid: TimeGrid
    frame: HyperplaneFrame
    coefficients: GdiffCoefficients
    x: np.ndarray
    eta: np.ndarray
    tangent: np.ndarray
    normal_path: SbmPath
    driver: WienerPath
    tangent_stream: RandomStream
    drift_integral: np.ndarray
    noise_integral: np.ndarray


def simulate_gdiff(coeffs: GdiffCoefficients, x0, frame: HyperplaneFrame,
                   wiener: WienerPath, tangent_stream: RandomStream,
                   mollifier_n: int = 256) -> GdiffPath:
    """Splitting scheme for the interface diffusion.

    Per step: the normal coordinate advances by the one-dimensional skew
    scheme on the driver's normal component, producing the local-time
    increment d_eta; the tangential coordinates then advance by
    alpha * d_eta + beta_tilde * xi + (projected driver increment), where
    xi ~ N(0, d_eta * I) is drawn from the tangent stream. This is the exact
    conditional law of the interface noise increment because that noise is
    independent of the driver.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    d = frame.dim
    if x0.size != d:
        raise ValueError(f"start point must have dimension {d}, got {x0.size}")
    if wiener.dims != d:
        raise ValueError(f"driver must have dimension {d}, got {wiener.dims}")
    grid = wiener.grid
    m = grid.steps

    normal_driver = WienerPath(grid, (wiener.values @ frame.normal)[:, None])
    normal_path = simulate_sbm(
        SbmParams(coeffs.q, float(x0 @ frame.normal), mollifier_n), normal_driver)
    d_eta = np.diff(normal_path.eta)

    z = tangent_stream.generator().standard_normal((m, d - 1))
    xi = np.sqrt(d_eta)[:, None] * z
    dw_tan = wiener.increments() @ frame.basis

    u = np.empty((m + 1, d - 1))
    drift_int = np.zeros((m + 1, d - 1))
    noise_int = np.zeros((m + 1, d - 1))
    u[0] = frame.tangential(x0)
    for k in range(m):
        a_step = np.asarray(coeffs.alpha(u[k]), dtype=float) * d_eta[k]
        b_step = np.asarray(coeffs.beta_tilde(u[k]), dtype=float) @ xi[k]
        drift_int[k + 1] = drift_int[k] + a_step
        noise_int[k + 1] = noise_int[k] + b_step
        u[k + 1] = u[k] + a_step + b_step + dw_tan[k]

    x = frame.assemble(normal_path.x, u)
    return GdiffPath(
        grid=grid, frame=frame, coefficients=coeffs, x=x, eta=normal_path.eta,
        tangent=u, normal_path=normal_path, driver=wiener,
        tangent_stream=tangent_stream, drift_integral=drift_int,
        noise_integral=noise_int,
    )


def gdiff_terminal_ensemble(coeffs: GdiffCoefficients, frame: HyperplaneFrame,
                            x0, t: float, dt: float = 1e-4, paths: int = 1000,
                            seed: int = 0, mollifier_n: int = 256,
                            workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Terminal states and local times of `paths` interface diffusions.

    Returns (x, eta) with shapes (paths, d) and (paths,). Path i draws its
    driver from substream 2i and its interface noise from substream 2i + 1.
    Only the mollified normal regime 0 < |q| < 1 is vectorized here; other
    skews go through simulate_gdiff path by path.
    """
    q = coeffs.q
    if not 0.0 < abs(q) < 1.0:
        raise ValueError("ensemble kernel needs 0 < |q| < 1; simulate per path otherwise")
    if paths < 1:
        raise ValueError(f"paths must be >= 1, got {paths}")
    x0 = np.asarray(x0, dtype=float).ravel()
    d = frame.dim
    if x0.size != d:
        raise ValueError(f"start point must have dimension {d}, got {x0.size}")
    grid = make_grid(t, max(1, round(t / dt)))
    m = grid.steps
    coef = mollifier_n * skew_to_mass(q) / _SQRT_2PI / q
    x0_nu = float(x0 @ frame.normal)
    u0 = frame.tangential(x0)
    block = max(64, min(256, (1 << 24) // max(1, m * d)))

    def run(astart, astop):
        nb = astop - astart
        dwd = np.empty((m, nb, d))
        zt = np.empty((m, nb, d - 1))
        for i in range(nb):
            gw = derive_stream(seed, 2 * (astart + i)).generator()
            dwd[:, i, :] = gw.standard_normal((m, d))
            gt = derive_stream(seed, 2 * (astart + i) + 1).generator()
            zt[:, i, :] = gt.standard_normal((m, d - 1))
        dwd *= math.sqrt(grid.dt)
        dw_nu = dwd @ frame.normal
        dw_tan = dwd @ frame.basis
        eta = np.zeros(nb)
        w_nu = np.zeros(nb)
        x_nu = np.full(nb, x0_nu)
        u = np.tile(u0, (nb, 1))
        for k in range(m):
            z = mollifier_n * x_nu
            d_eta = coef * grid.dt * np.exp(-0.5 * z * z)
            eta += d_eta
            w_nu += dw_nu[k]
            x_nu = x0_nu + q * eta + w_nu
            xi = np.sqrt(d_eta)[:, None] * zt[k]
            a_val = _alpha_batch(coeffs, u)
            b_val = _beta_batch(coeffs, u)
            u = u + a_val * d_eta[:, None] + np.einsum("pij,pj->pi", b_val, xi) + dw_tan[k]
        return frame.assemble(x_nu, u), eta

    parts = map_blocks(run, paths, block, workers)
    x = np.concatenate([p[0] for p in parts], axis=0)
    eta = np.concatenate([p[1] for p in parts])
    return x, eta


# ---------------------------------------------------------------------------
# local-time clock


def inverse_local_time(path, level: float):
    """First grid time at which the path's local time reaches `level`.

    Returns None when the local time never reaches the level within the
    horizon (the clock has infinite mean, so this is a normal outcome, not
    an error).
    """
    if level < 0.0:
        raise ValueError(f"level must be >= 0, got {level}")
    eta = np.asarray(path.eta, dtype=float)
    idx = int(np.searchsorted(eta, level, side="left"))
    if idx >= eta.size:
        return None
    return float(path.grid.times()[idx])


@dataclass(frozen=True, eq=False)
class TimeChangedSample:
    """The path read on the local-time clock at the requested levels.

    For each reached level: the first passage time of the clock, the state
    there, and the residual of the time-changed integral identity (all
    terms evaluated from the stored path data). Unreached levels are
    flagged and left as NaN.
    """

    levels: np.ndarray
    reached: np.ndarray
    times: np.ndarray
    states: np.ndarray
    residuals: np.ndarray

    @property
    def truncated(self) -> bool:
        return bool(not np.all(self.reached))


def time_changed_path(path: GdiffPath, levels) -> TimeChangedSample:
    """Sample x at the inverse local time of each level and report the
    residual of the time-changed representation.

    The residual at level t is
    x(rho_t) - x(0) - t * q * nu - (tangential drift + noise integrals up
    to rho_t) - w(rho_t); for the exact process it vanishes, and for the
    scheme it shrinks with the step size.
    """
    lv = np.atleast_1d(np.asarray(levels, dtype=float))
    if np.any(lv < 0.0):
        raise ValueError("levels must be >= 0")
    eta = path.eta
    times = path.grid.times()
    d = path.frame.dim
    idx = np.searchsorted(eta, lv, side="left")
    reached = idx < eta.size
    out_t = np.full(lv.size, np.nan)
    states = np.full((lv.size, d), np.nan)
    residuals = np.full((lv.size, d), np.nan)
    q_nu = path.coefficients.q * path.frame.normal
    for j in range(lv.size):
        if not reached[j]:
            continue
        k = int(idx[j])
        out_t[j] = times[k]
        states[j] = path.x[k]
        tangential = path.frame.basis @ (path.drift_integral[k] + path.noise_integral[k])
        residuals[j] = (path.x[k] - path.x[0] - lv[j] * q_nu - tangential
                        - path.driver.values[k])
    return TimeChangedSample(lv, reached, out_t, states, residuals)


# ---------------------------------------------------------------------------
# tail bounds for the two clocks


@dataclass(frozen=True)
class RhoTailReport:
    """Empirical P{clock first passage >= horizon} against its bound."""

    level: float
    horizon: float
    frequency: float
    stderr: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.frequency - 3.0 * self.stderr <= self.bound


def rho_tail_check(eta_paths, times, level: float, t_max: float | None = None,
                   x_nu: float = 0.0) -> RhoTailReport:
    """Tail check for the inverse local time on a simulated ensemble.

    eta_paths has one row per path over the nodes `times`; the ensemble
    horizon N = times[-1] is the tail threshold. The event {rho_level >= N}
    is {eta < level strictly before N}, read off the second-to-last node.
    The bound is 2 (|x_nu| + t_max) / sqrt(2 pi N) with t_max defaulting to
    the level itself.
    """
    eta = np.asarray(eta_paths, dtype=float)
    times = np.asarray(times, dtype=float)
    if eta.ndim != 2 or eta.shape[1] != times.size:
        raise ValueError("eta_paths must be (paths, nodes) matching times")
    if level < 0.0:
        raise ValueError(f"level must be >= 0, got {level}")
    horizon = float(times[-1])
    if not horizon > 0.0:
        raise ValueError("ensemble horizon must be positive")
    if t_max is None:
        t_max = level
    if t_max < level:
        raise ValueError(f"t_max={t_max} must cover the level {level}")
    hits = eta[:, -2] < level if level > 0.0 else np.zeros(eta.shape[0], dtype=bool)
    frequency = float(np.mean(hits))
    stderr = math.sqrt(max(frequency * (1.0 - frequency), 1e-12) / eta.shape[0])
    bound = 2.0 * (abs(x_nu) + t_max) / math.sqrt(2.0 * math.pi * horizon)
    return RhoTailReport(float(level), horizon, frequency, stderr, bound)


def rho_tail_experiment(x_nu: float, level: float, horizon: float,
                        t_max: float | None = None, dt: float = 4e-3,
                        paths: int = 100_000, seed: int = 0, q: float = 1.0,
                        workers: int = 1) -> RhoTailReport:
    """Simulate reflected paths to the tail horizon and run rho_tail_check.

    The local-time law is skew-independent, so the cheapest exact scheme
    (reflection) stands in for any q; the start's normal coordinate is
    x_nu.
    """
    if level < 0.0:
        raise ValueError(f"level must be >= 0, got {level}")
    grid = make_grid(horizon, max(2, round(horizon / dt)))
    x0 = abs(x_nu) if q == 1.0 else -abs(x_nu)

    def run(a, b):
        _, eta = reflected_path_block(x0, q, grid, seed, a, b)
        if level > 0.0:
            return int(np.count_nonzero(eta[-2] < level))
        return 0

    block = max(128, min(1024, (1 << 23) // max(1, grid.steps)))
    hits = sum(map_blocks(run, paths, block, workers))
    frequency = hits / paths
    stderr = math.sqrt(max(frequency * (1.0 - frequency), 1e-12) / paths)
    if t_max is None:
        t_max = level
    bound = 2.0 * (abs(x_nu) + t_max) / math.sqrt(2.0 * math.pi * horizon)
    return RhoTailReport(float(level), float(horizon), float(frequency), stderr, bound)


@dataclass(frozen=True)
class SmallLocalTimeReport:
    """P{eta(t) < a} from the interface: exact value, bound, MC frequency."""

    t: float
    a: float
    cdf_value: float
    bound: float
    mc_frequency: float
    mc_stderr: float

    @property
    def exact_passed(self) -> bool:
        return self.cdf_value <= self.bound

    @property
    def mc_passed(self) -> bool:
        return self.mc_frequency - 3.0 * self.mc_stderr <= self.bound

    @property
    def passed(self) -> bool:
        return self.exact_passed and self.mc_passed


def small_local_time_check(t: float, a: float, dt: float = 1e-4,
                           paths: int = 100_000, seed: int = 0,
                           workers: int = 1) -> SmallLocalTimeReport:
    """Check P{eta(t) < a} <= a sqrt(2) / sqrt(pi t) for a start on the
    interface, both from the closed-form CDF and from simulated reflected
    paths."""
    if t <= 0.0 or a <= 0.0:
        raise ValueError(f"need t > 0 and a > 0, got t={t}, a={a}")
    cdf_value = float(local_time_cdf(LocalTimeLaw(0.0, t), a))
    bound = a * math.sqrt(2.0) / math.sqrt(math.pi * t)
    grid = make_grid(t, max(1, round(t / dt)))

    def run(lo, hi):
        _, eta = reflected_path_block(0.0, 1.0, grid, seed, lo, hi)
        return int(np.count_nonzero(eta[-1] < a))

    block = max(128, min(1024, (1 << 23) // max(1, grid.steps)))
    hits = sum(map_blocks(run, paths, block, workers))
    frequency = hits / paths
    stderr = math.sqrt(max(frequency * (1.0 - frequency), 1e-12) / paths)
    return SmallLocalTimeReport(float(t), float(a), cdf_value, bound,
                                float(frequency), stderr)


# ---------------------------------------------------------------------------
# stochastic continuity in the starting point


@dataclass(frozen=True, eq=False)
class OffsetEstimate:
    """Shared-noise estimate of P{|x_offset(t) - x(t)| > eps}."""

    offset: np.ndarray
    offset_norm: float
    probability: float
    stderr: float
    count: int

    @property
    def halfwidth(self) -> float:
        return 3.0 * self.stderr


def continuity_experiment(coeffs: GdiffCoefficients, frame: HyperplaneFrame,
                          x0, offsets, t: float, eps: float,
                          paths: int = 4000, seed: int = 0, dt: float = 2.5e-4,
                          mollifier_n: int = 256,
                          workers: int = 1) -> list[OffsetEstimate]:
    """Probability that a start perturbation moves the terminal state by
    more than eps, under fully shared noise.

    Every path couples the base start x0 with each offset start through the
    same driver and the same interface-noise field; the latter is realized
    per path on a fixed local-time mesh (cell LOCAL_TIME_MESH, span
    MESH_SPAN) so that two variants reading different amounts of local time
    still see one consistent noise. An offset of zero gives identical
    inputs, hence probability exactly zero.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    q = coeffs.q
    if not 0.0 < abs(q) < 1.0:
        raise ValueError("continuity kernel needs 0 < |q| < 1")
    x0 = np.asarray(x0, dtype=float).ravel()
    d = frame.dim
    if x0.size != d:
        raise ValueError(f"start point must have dimension {d}, got {x0.size}")
    offs = [np.asarray(o, dtype=float).ravel() for o in offsets]
    for o in offs:
        if o.size != d:
            raise ValueError(f"offsets must have dimension {d}")
    if paths < 2:
        raise ValueError(f"paths must be >= 2, got {paths}")

    grid = make_grid(t, max(1, round(t / dt)))
    m = grid.steps
    coef = mollifier_n * skew_to_mass(q) / _SQRT_2PI / q
    cells = int(round(MESH_SPAN / LOCAL_TIME_MESH))
    starts = [x0] + [x0 + o for o in offs]
    nu0 = [float(s @ frame.normal) for s in starts]
    u0 = [frame.tangential(s) for s in starts]
    n_var = len(starts)
    block = max(32, min(256, (1 << 23) // max(1, m * d)))

    def run(astart, astop):
        nb = astop - astart
        dwd = np.empty((m, nb, d))
        mesh = np.zeros((nb, cells + 1, d - 1))
        for i in range(nb):
            gw = derive_stream(seed, 2 * (astart + i)).generator()
            dwd[:, i, :] = gw.standard_normal((m, d))
            gt = derive_stream(seed, 2 * (astart + i) + 1).generator()
            steps_tan = gt.standard_normal((cells, d - 1)) * math.sqrt(LOCAL_TIME_MESH)
            np.cumsum(steps_tan, axis=0, out=mesh[i, 1:, :])
        dwd *= math.sqrt(grid.dt)
        dw_nu = dwd @ frame.normal
        dw_tan = dwd @ frame.basis
        rows = np.arange(nb)

        eta = [np.zeros(nb) for _ in range(n_var)]
        x_nu = [np.full(nb, nu0[v]) for v in range(n_var)]
        u = [np.tile(u0[v], (nb, 1)) for v in range(n_var)]
        gathered = [mesh[rows, 0] for _ in range(n_var)]
        w_nu = np.zeros(nb)

        for k in range(m):
            w_nu = w_nu + dw_nu[k]
            for v in range(n_var):
                z = mollifier_n * x_nu[v]
                d_eta = coef * grid.dt * np.exp(-0.5 * z * z)
                eta[v] = eta[v] + d_eta
                x_nu[v] = nu0[v] + q * eta[v] + w_nu
                new_idx = np.minimum((eta[v] * (1.0 / LOCAL_TIME_MESH)).astype(np.int64),
                                     cells)
                new_g = mesh[rows, new_idx]
                xi = new_g - gathered[v]
                a_val = _alpha_batch(coeffs, u[v])
                b_val = _beta_batch(coeffs, u[v])
                u[v] = (u[v] + a_val * d_eta[:, None]
                        + np.einsum("pij,pj->pi", b_val, xi) + dw_tan[k])
                gathered[v] = new_g

        if max(float(np.max(e)) for e in eta) > MESH_SPAN:
            raise RuntimeError(
                "a path's local time exceeded the shared-noise mesh span; "
                "raise MESH_SPAN for this parameter set"
            )
        counts = np.empty(n_var - 1, dtype=np.int64)
        for v in range(1, n_var):
            gap_sq = (x_nu[v] - x_nu[0]) ** 2 + np.einsum(
                "pi,pi->p", u[v] - u[0], u[v] - u[0])
            counts[v - 1] = np.count_nonzero(gap_sq > eps * eps)
        return counts

    parts = map_blocks(run, paths, block, workers)
    totals = np.sum(np.stack(parts), axis=0)
    out = []
    for j, o in enumerate(offs):
        p_hat = float(totals[j]) / paths
        stderr = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / paths)
        out.append(OffsetEstimate(
            offset=o, offset_norm=float(np.linalg.norm(o)),
            probability=p_hat, stderr=stderr, count=int(paths),
        ))
    return out
