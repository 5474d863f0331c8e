"""Range-based position estimators."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from weavesim.errors import WeaveError
from weavesim.positioning.models import C_SOUND, Beacon, PositionEstimate, vlp_rss

STEP_TOL_M = 1e-10
MAX_ITER = 100


class PositioningError(WeaveError):
    pass


class DegenerateGeometry(PositioningError):
    pass


class NoConvergence(PositioningError):
    pass


class UnobservableBias(PositioningError):
    pass


class NoConsensus(PositioningError):
    pass


class NegativePower(PositioningError):
    pass


def _affine_rank(points: np.ndarray) -> int:
    if len(points) < 2:
        return 0
    diffs = points[1:] - points[0]
    scale = max(float(np.abs(diffs).max()), 1e-300)
    return int(np.linalg.matrix_rank(diffs / scale, tol=1e-9))


def _levenberg(fun, x0: np.ndarray, max_iter: int = MAX_ITER, step_tol: float = STEP_TOL_M):
    """Damped Gauss-Newton. ``fun(x)`` returns (residuals, jacobian).

    Stops when a step is shorter than ``step_tol`` or after ``max_iter``
    iterations. Returns (x, iterations, step_converged).
    """
    x = np.array(x0, float)
    r, J = fun(x)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        JtJ = J.T @ J
        g = J.T @ r
        # isotropic damping keeps the iteration rotation-equivariant
        scale = max(float(np.trace(JtJ)) / len(x), 1e-12)
        while True:
            A = JtJ + lam * scale * np.eye(len(x))
            try:
                step = -np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(A, g, rcond=None)[0]
            x_new = x + step
            r_new, J_new = fun(x_new)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                x, r, J, cost = x_new, r_new, J_new, cost_new
                lam = max(lam / 10, 1e-12)
                break
            lam *= 10
            if lam > 1e12:
                # no descent direction left: we are at a stationary point
                return x, it, True
        if float(np.linalg.norm(step)) < step_tol:
            return x, it, True
    return x, max_iter, False


def _range_problem(anchors: np.ndarray, ranges: np.ndarray, fixed_z: float | None):
    def fun(p):
        x = p if fixed_z is None else np.array([p[0], p[1], fixed_z])
        diff = x - anchors
        dist = np.linalg.norm(diff, axis=1)
        safe = np.where(dist > 0, dist, 1.0)
        J = np.where(dist[:, None] > 0, diff / safe[:, None], 0.0)
        if fixed_z is not None:
            J = J[:, :2]
        return dist - ranges, J

    return fun


def _newton_polish(anchors, ranges, x, fixed_z, steps: int = 6):
    """Refine a damped Gauss-Newton result with exact-Hessian Newton steps.

    Gauss-Newton converges only linearly when residuals are large; a few
    Newton steps pin the stationary point to rounding level. A step is kept
    only while the Hessian is positive definite and the gradient shrinks.
    """
    dims = len(x)

    def grad_hess(p):
        pt = p if fixed_z is None else np.array([p[0], p[1], fixed_z])
        diff = pt - anchors
        dist = np.linalg.norm(diff, axis=1)
        if np.any(dist == 0):
            return None, None
        u = diff / dist[:, None]
        r = dist - ranges
        H = u.T @ u + np.einsum("i,ijk->jk", r / dist, np.eye(3) - u[:, :, None] * u[:, None, :])
        g = u.T @ r
        return g[:dims], H[:dims, :dims]

    g, H = grad_hess(x)
    for _ in range(steps):
        if g is None:
            break
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            break
        step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        g_new, H_new = grad_hess(x + step)
        if g_new is None or np.linalg.norm(g_new) >= np.linalg.norm(g):
            break
        x, g, H = x + step, g_new, H_new
    return x


def linear_position(anchors, ranges, fixed_z: float | None = None) -> np.ndarray:
    """Closed-form estimate from differences of squared range equations."""
    anchors = np.asarray(anchors, float)
    ranges = np.asarray(ranges, float)
    b0, r0 = anchors[0], ranges[0]
    rhs = (np.sum(anchors[1:] ** 2, axis=1) - b0 @ b0) - (ranges[1:] ** 2 - r0**2)
    A = 2 * (anchors[1:] - b0)
    if fixed_z is not None:
        rhs = rhs - A[:, 2] * fixed_z
        A = A[:, :2]
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return sol if fixed_z is None else np.array([sol[0], sol[1], fixed_z])


def trilaterate_ls(anchors, ranges, init=None, fixed_z: float | None = None) -> PositionEstimate:
    """Least-squares position from ranges to known anchors.

    Damped Gauss-Newton from ``init`` if given, otherwise from both the
    anchor centroid and the closed-form solution, keeping the lower-cost
    result, then a short Newton polish. With ``fixed_z`` only (x, y) are
    estimated.
    """
    anchors = np.asarray(anchors, float)
    ranges = np.asarray(ranges, float)
    if anchors.ndim != 2 or anchors.shape[1] != 3 or len(anchors) != len(ranges):
        raise ValueError("anchors must be (n, 3) and match ranges")
    dims = 3 if fixed_z is None else 2
    if len(anchors) < dims + 1 or _affine_rank(anchors[:, :dims]) < dims:
        raise DegenerateGeometry(f"{len(anchors)} anchors do not span {dims} dimensions")
    fun = _range_problem(anchors, ranges, fixed_z)

    if init is not None:
        starts = [np.asarray(init, float)]
    else:
        starts = [linear_position(anchors, ranges, fixed_z), anchors.mean(axis=0)]
    best = None
    for s in starts:
        x0 = s[:dims].copy()
        if not np.all(np.isfinite(x0)):
            raise ValueError("initial guess must be finite")
        x, iters, ok = _levenberg(fun, x0)
        x = _newton_polish(anchors, ranges, x, fixed_z)
        r, _ = fun(x)
        cost = float(r @ r)
        if best is None or cost < best[0]:
            best = (cost, x, iters, ok)
    cost, x, iters, ok = best
    if not np.all(np.isfinite(x)):
        raise NoConvergence("iterate became non-finite")
    r, J = fun(x)
    if np.linalg.matrix_rank(J, tol=1e-9 * max(1.0, np.abs(J).max())) < dims:
        raise DegenerateGeometry("jacobian is rank deficient at the solution")
    pos = x if fixed_z is None else np.array([x[0], x[1], fixed_z])
    return PositionEstimate(pos, math.sqrt(cost / len(r)), iters, tuple(range(len(r))), extra={"converged": ok})


def trilaterate_hybrid(anchors, toas, speed: float = C_SOUND, init=None) -> PositionEstimate:
    """Joint position and common device clock bias from times of arrival.

    The emission instant is assumed known (RF trigger), so each TOA is the
    flight time plus one shared unknown bias.
    """
    anchors = np.asarray(anchors, float)
    pseudo = np.asarray(toas, float) * speed
    if len(anchors) < 5:
        raise UnobservableBias(f"{len(anchors)} observations cannot fix position and bias")
    if _affine_rank(anchors) < 3:
        raise DegenerateGeometry("anchors do not span 3 dimensions")

    def fun(p):
        diff = p[:3] - anchors
        dist = np.linalg.norm(diff, axis=1)
        safe = np.where(dist > 0, dist, 1.0)
        J = np.empty((len(anchors), 4))
        J[:, :3] = np.where(dist[:, None] > 0, diff / safe[:, None], 0.0)
        J[:, 3] = 1.0
        return dist + p[3] - pseudo, J

    b0, q0 = anchors[0], pseudo[0]
    A = np.hstack([2 * (anchors[1:] - b0), -2 * (pseudo[1:] - q0)[:, None]])
    rhs = (np.sum(anchors[1:] ** 2, axis=1) - b0 @ b0) - (pseudo[1:] ** 2 - q0**2)
    if np.linalg.matrix_rank(A, tol=1e-9 * max(1.0, np.abs(A).max())) < 4:
        raise UnobservableBias("anchor and range differences do not separate bias from position")
    linear = np.linalg.lstsq(A, rhs, rcond=None)[0]

    starts = [np.asarray(init, float)] if init is not None else [linear, np.append(anchors.mean(axis=0), 0.0)]
    best = None
    for s in starts:
        x, iters, ok = _levenberg(fun, s)
        r, _ = fun(x)
        cost = float(r @ r)
        if best is None or cost < best[0]:
            best = (cost, x, iters, ok)
    cost, x, iters, ok = best
    if not np.all(np.isfinite(x)):
        raise NoConvergence("iterate became non-finite")
    r, J = fun(x)
    if np.linalg.matrix_rank(J, tol=1e-9 * max(1.0, np.abs(J).max())) < 4:
        raise UnobservableBias("jacobian is rank deficient at the solution")
    return PositionEstimate(
        x[:3], math.sqrt(cost / len(r)), iters, tuple(range(len(r))), x[3] / speed, {"converged": ok}
    )


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 200
    noise_sigma: float = 0.01  # range sigma, metres
    threshold_sigmas: float = 3.0
    min_sample: int = 4
    min_inliers: int = 5

    @property
    def threshold(self) -> float:
        return self.threshold_sigmas * self.noise_sigma


def _samples(n: int, cfg: RansacConfig, rng):
    if math.comb(n, cfg.min_sample) <= cfg.iterations:
        yield from itertools.combinations(range(n), cfg.min_sample)
        return
    if rng is None:
        raise ValueError("random sampling needs an rng")
    for _ in range(cfg.iterations):
        yield tuple(sorted(rng.choice(n, cfg.min_sample, replace=False).tolist()))


def ransac_trilaterate(anchors, ranges, config: RansacConfig = RansacConfig(), rng=None) -> PositionEstimate:
    """Consensus trilateration that discards range outliers.

    All minimal subsets are tried when there are no more of them than the
    iteration budget; otherwise subsets are drawn from ``rng``. The largest
    consensus (ties to lower inlier RMS) is refit by least squares.
    """
    anchors = np.asarray(anchors, float)
    ranges = np.asarray(ranges, float)
    n = len(anchors)
    if n < config.min_inliers:
        raise NoConsensus(f"{n} observations, need at least {config.min_inliers}")
    thr = config.threshold

    def consensus(x):
        res = np.abs(np.linalg.norm(anchors - x, axis=1) - ranges)
        mask = res <= thr
        rms = math.sqrt(float(np.mean(res[mask] ** 2))) if mask.any() else math.inf
        return mask, rms

    best = None
    for sample in _samples(n, config, rng):
        idx = list(sample)
        if _affine_rank(anchors[idx]) < 3:
            continue
        x = linear_position(anchors[idx], ranges[idx])
        mask, rms = consensus(x)
        key = (-int(mask.sum()), rms)
        if best is None or key < best[0]:
            best = (key, mask)
    if best is None or -best[0][0] < config.min_inliers:
        raise NoConsensus("no minimal sample reached the inlier quota")

    mask = best[1]
    est = trilaterate_ls(anchors[mask], ranges[mask])
    for _ in range(5):
        # one more consensus pass around the refined fit
        new_mask, _ = consensus(est.position)
        if new_mask.sum() <= mask.sum() or np.array_equal(new_mask, mask):
            break
        mask = new_mask
        est = trilaterate_ls(anchors[mask], ranges[mask])
    inliers = tuple(int(i) for i in np.flatnonzero(mask))
    return PositionEstimate(est.position, est.residual_rms, est.iterations, inliers)


def vlp_position(leds: list[Beacon], powers, rx_z: float = 0.0, area: float = 1e-4) -> PositionEstimate:
    """Invert ceiling-LED RSS to ranges (receiver facing up) and trilaterate at known height."""
    powers = np.asarray(powers, float)
    if len(powers) != len(leds):
        raise ValueError("one power reading per LED")
    if np.any(powers <= 0):
        raise NegativePower("RSS must be > 0 to invert")
    ranges = np.empty(len(leds))
    for k, (led, p) in enumerate(zip(leds, powers)):
        h = led.position[2] - rx_z
        if h <= 0:
            raise ValueError(f"LED {led.id} is not above the receiver plane")
        m = led.lambertian_order
        scale = led.power_w * (m + 1) * area / (2 * math.pi)
        ranges[k] = (scale * h ** (m + 1) / p) ** (1 / (m + 3))
    anchors = np.array([led.position for led in leds], float)
    return trilaterate_ls(anchors, ranges, fixed_z=rx_z)


def vlp_observe(leds: list[Beacon], rx_position, rng=None, rel_noise: float = 0.0, area: float = 1e-4) -> np.ndarray:
    """RSS at an upward-facing receiver with optional multiplicative Gaussian noise."""
    p = np.array([vlp_rss(led, rx_position, area=area) for led in leds])
    if rel_noise > 0:
        p = p * (1 + rel_noise * rng.standard_normal(len(p)))
    return p
