"""Cubic-spiral primitives and the dense control-set cone."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CurvatureExceeded, EmptySet, NoConvergence
from .geometry import Pose2D, SampledPath, arclength_stations, wrap_angle
from .lattice import ControlAction, ControlSet, LatticeConfig

SIMPSON_NODES = 129
MAX_NEWTON = 50
TOL = 1e-6

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class CubicSpiral:
    """Curvature ``k(s) = a + b s + c s^2 + d s^3`` on ``[0, sf]``."""

    coeffs: tuple[float, float, float, float]
    sf: float

    def curvature(self, s):
        a, b, c, d = self.coeffs
        return a + s * (b + s * (c + s * d))

    def heading(self, s):
        a, b, c, d = self.coeffs
        return s * (a + s * (b / 2 + s * (c / 3 + s * d / 4)))

    def max_abs_curvature(self) -> float:
        a, b, c, d = self.coeffs
        s = list(np.linspace(0.0, self.sf, 257))
        # interior extrema of the cubic
        for r in np.roots([3 * d, 2 * c, b]) if (d or c or b) else []:
            if abs(r.imag) < 1e-12 and 0 < r.real < self.sf:
                s.append(r.real)
        return float(np.max(np.abs(self.curvature(np.asarray(s)))))

    def endpoint(self, nodes: int = SIMPSON_NODES) -> Pose2D:
        x, y, th = _integrate_end(self.coeffs[1], self.coeffs[2], self.sf, nodes)
        return Pose2D(x, y, th)

    def positions(self, stations: np.ndarray) -> np.ndarray:
        """(x, y) at each arc-length station, Gauss-Legendre between stations."""
        out = np.zeros((len(stations), 2))
        for i in range(1, len(stations)):
            s0, s1 = stations[i - 1], stations[i]
            s = 0.5 * (s1 - s0) * _GL_X + 0.5 * (s1 + s0)
            th = self.heading(s)
            w = 0.5 * (s1 - s0) * _GL_W
            out[i] = out[i - 1] + [w @ np.cos(th), w @ np.sin(th)]
        return out


def _simpson_weights(sf: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    s = np.linspace(0.0, sf, nodes)
    h = sf / (nodes - 1)
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return s, w * h / 3.0


def _d_coeff(b, c, sf):
    # enforces k(sf) = 0 with k(0) = 0
    return -(b / sf**2 + c / sf)


def _integrate_end(b, c, sf, nodes=SIMPSON_NODES):
    d = _d_coeff(b, c, sf)
    s, w = _simpson_weights(sf, nodes)
    th = s * s * (b / 2 + s * (c / 3 + s * d / 4))
    return float(w @ np.cos(th)), float(w @ np.sin(th)), float(b * sf**2 / 4 + c * sf**3 / 12)


def _residual_and_jacobian(p, target):
    b, c, sf = p
    d = _d_coeff(b, c, sf)
    s, w = _simpson_weights(sf, SIMPSON_NODES)
    th = s * s * (b / 2 + s * (c / 3 + s * d / 4))
    cos, sin = np.cos(th), np.sin(th)
    x, y = w @ cos, w @ sin
    th_end = b * sf**2 / 4 + c * sf**3 / 12
    r = np.array([x - target[0], y - target[1], th_end - target[2]])

    s4 = s**4 / 4
    dth = [s * s / 2 - s4 / sf**2, s**3 / 3 - s4 / sf, s4 * (2 * b / sf**3 + c / sf**2)]
    J = np.empty((3, 3))
    for k, g in enumerate(dth):
        J[0, k] = -(w @ (sin * g))
        J[1, k] = w @ (cos * g)
    J[0, 2] += cos[-1]
    J[1, 2] += sin[-1]
    J[2] = [sf**2 / 4, sf**3 / 12, b * sf / 2 + c * sf**2 / 4]
    return r, J


def _initial_guesses(x, y, th):
    dist = math.hypot(x, y)
    base = dist * (th * th / 5 + 1) + 2 * abs(th) / 5
    for sf in (base, dist * 1.05, base * 1.3, dist * 1.6):
        # small-angle solution for lateral offset and end heading
        A = np.array([[7 * sf**3 / 60, sf**4 / 30], [sf**2 / 4, sf**3 / 12]])
        try:
            b, c = np.linalg.solve(A, [y, th])
        except np.linalg.LinAlgError:
            b, c = 0.0, 0.0
        yield np.array([b, c, sf])


def _newton(p, target):
    def merit(r):
        return float(np.max(np.abs(r)))

    r, J = _residual_and_jacobian(p, target)
    for _ in range(MAX_NEWTON):
        if merit(r) < TOL:
            return p
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        alpha = 1.0
        while alpha > 1e-4:
            q = p + alpha * step
            if q[2] > 1e-6:
                rq, Jq = _residual_and_jacobian(q, target)
                if merit(rq) < merit(r) or merit(rq) < TOL:
                    p, r, J = q, rq, Jq
                    break
            alpha *= 0.5
        else:
            return None
    return p if merit(r) < TOL else None


def solve_spiral_bvp(target: Pose2D, kappa_max: float = 0.5) -> CubicSpiral:
    """Cubic spiral from the origin pose (0, 0, 0) to ``target``.

    Shooting on (b, c, sf) with damped Newton; ``a = 0`` and ``d`` is fixed by
    zero curvature at both ends.
    """
    if target.x <= 0:
        raise ValueError("target must lie ahead of the origin (x > 0)")
    goal = np.array([target.x, target.y, target.theta])
    if abs(target.y) < 1e-12 and abs(target.theta) < 1e-12:
        return CubicSpiral((0.0, 0.0, 0.0, 0.0), float(target.x))

    over_limit = None
    for p0 in _initial_guesses(*goal):
        p = _newton(p0, goal)
        if p is None:
            continue
        b, c, sf = (float(v) for v in p)
        sp = CubicSpiral((0.0, b, c, _d_coeff(b, c, sf)), sf)
        if sp.max_abs_curvature() <= kappa_max + 1e-12:
            return sp
        over_limit = sp
    if over_limit is not None:
        raise CurvatureExceeded(
            f"spiral to {target.as_tuple()} needs |k| = {over_limit.max_abs_curvature():.3f}"
        )
    raise NoConvergence(f"no spiral found to {target.as_tuple()}")


def sample_spiral(sp: CubicSpiral, delta: float) -> SampledPath:
    stations = arclength_stations(sp.sf, delta)
    return SampledPath(sp.positions(stations), delta)


# --- dense cone -----------------------------------------------------------

DEFAULT_THETA_ENDPOINTS = (
    0.0,
    math.atan(1 / 3),
    math.atan(1 / 2),
    math.pi / 4,
    math.atan(2),
    math.atan(3),
)


@dataclass(frozen=True)
class DenseSetConfig:
    """Endpoint cone for the dense set, expressed in the start-heading frame.

    ``theta_endpoints`` are heading changes; their reflections are included.
    """

    x_range: tuple[float, float] = (0.4, 4.0)
    y_range: tuple[float, float] = (-2.0, 2.0)
    theta_endpoints: tuple[float, ...] = DEFAULT_THETA_ENDPOINTS
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    kappa_max: float = 0.5
    delta: float = 0.1

    def heading_changes(self) -> np.ndarray:
        vals = np.concatenate([self.theta_endpoints, -np.asarray(self.theta_endpoints)])
        return np.unique(np.round(vals, 12))


def _make_action(h, i, j, e, local: CubicSpiral, cfg: DenseSetConfig) -> ControlAction:
    lat = cfg.lattice
    sampled = sample_spiral(local, cfg.delta)
    th = lat.headings[h]
    c, s = math.cos(th), math.sin(th)
    pts = sampled.points @ np.array([[c, -s], [s, c]]).T
    pts[-1] = (i * lat.dx, j * lat.dy)
    return ControlAction(h, i, j, e, SampledPath(pts, cfg.delta), local.sf, local.coeffs)


def generate_dense_control_set(cfg: DenseSetConfig = DenseSetConfig()) -> ControlSet:
    """Every lattice-aligned endpoint inside the cone that a spiral can reach."""
    lat = cfg.lattice
    changes = cfg.heading_changes()
    reach = math.hypot(max(abs(v) for v in cfg.x_range), max(abs(v) for v in cfg.y_range))
    ni = int(math.ceil(reach / lat.dx)) + 1
    nj = int(math.ceil(reach / lat.dy)) + 1
    eps = 1e-9
    cache: dict[tuple, CubicSpiral | None] = {}
    actions = []
    for h, th in enumerate(lat.headings):
        c, s = math.cos(th), math.sin(th)
        for i in range(-ni, ni + 1):
            for j in range(-nj, nj + 1):
                X, Y = i * lat.dx, j * lat.dy
                lx, ly = c * X + s * Y, -s * X + c * Y
                if not (cfg.x_range[0] - eps <= lx <= cfg.x_range[1] + eps):
                    continue
                if not (cfg.y_range[0] - eps <= ly <= cfg.y_range[1] + eps):
                    continue
                for e, the in enumerate(lat.headings):
                    dth = wrap_angle(the - th)
                    if np.min(np.abs(changes - dth)) > 1e-9:
                        continue
                    key = (round(lx, 9), round(ly, 9), round(dth, 9))
                    if key not in cache:
                        try:
                            cache[key] = solve_spiral_bvp(Pose2D(*key), cfg.kappa_max)
                        except (NoConvergence, CurvatureExceeded):
                            cache[key] = None
                    if cache[key] is not None:
                        actions.append(_make_action(h, i, j, e, cache[key], cfg))
    if not actions:
        raise EmptySet("no control action could be generated")
    return ControlSet(actions, lat, cfg.delta)
