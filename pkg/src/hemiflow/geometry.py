"""Hemisphere geometry: points, geodesics, and the half-space chart.

Points live on the closed upper hemisphere of the unit sphere in R^{n+1}
(last ambient coordinate >= 0); its boundary is the equator.  The chart
used throughout is the stereographic projection from a pole on the
equator, which maps the hemisphere conformally onto the upper half-space
{x in R^n : x_n >= 0} and the equator onto its boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PoleSingularity

UNIT_TOL = 1e-12
HEIGHT_TOL = 1e-12
POLE_TOL = 1e-10


def _as_unit(coords, tol=UNIT_TOL):
    v = np.asarray(coords, dtype=float)
    if v.ndim != 1:
        raise ValueError("point coordinates must be a 1-d vector")
    r = np.linalg.norm(v)
    if abs(r - 1.0) > tol:
        raise ValueError(f"|coords| = {r!r} is not 1 within {tol}")
    return v


@dataclass(frozen=True)
class SpherePoint:
    """Point on the closed upper hemisphere, stored in ambient coordinates."""

    coords: np.ndarray

    def __init__(self, coords):
        v = _as_unit(coords)
        if v[-1] < -HEIGHT_TOL:
            raise ValueError("point lies below the equator")
        object.__setattr__(self, "coords", v)

    @property
    def n(self) -> int:
        """Sphere dimension (ambient dimension minus one)."""
        return self.coords.shape[0] - 1

    @property
    def height(self) -> float:
        return float(self.coords[-1])

    def boundary_distance(self) -> float:
        """Geodesic distance to the equator (the latitude angle)."""
        return float(np.arcsin(np.clip(self.coords[-1], -1.0, 1.0)))

    def is_boundary(self, tol: float = HEIGHT_TOL) -> bool:
        return abs(self.coords[-1]) <= tol


class BoundarySpherePoint(SpherePoint):
    """Point on the equator of the hemisphere."""

    def __init__(self, coords):
        v = _as_unit(coords)
        if abs(v[-1]) > HEIGHT_TOL:
            raise ValueError("boundary point must have vanishing last coordinate")
        v = v.copy()
        v[-1] = 0.0
        super().__init__(v / np.linalg.norm(v))


@dataclass(frozen=True)
class HalfSpacePoint:
    """Point of the closed upper half-space {x_n >= 0} in R^n."""

    coords: np.ndarray

    def __init__(self, coords):
        v = np.asarray(coords, dtype=float)
        if v.ndim != 1:
            raise ValueError("half-space coordinates must be a 1-d vector")
        if v[-1] < -HEIGHT_TOL:
            raise ValueError("half-space point must have x_n >= 0")
        object.__setattr__(self, "coords", v)

    @property
    def height(self) -> float:
        return float(self.coords[-1])


def geodesic_distance(p: SpherePoint, q: SpherePoint) -> float:
    """Great-circle distance in radians, clamped to [0, pi]."""
    c = float(np.dot(p.coords, q.coords))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def geodesic_distance_coords(u, v) -> float:
    c = float(np.dot(u, v))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def tangent_project(point_coords, vec):
    """Project an ambient vector onto the tangent plane at a sphere point."""
    p = np.asarray(point_coords, dtype=float)
    v = np.asarray(vec, dtype=float)
    return v - np.dot(v, p) * p


def geodesic_step(point_coords, tangent, t: float):
    """Exact exponential-map step along a tangent vector (not necessarily unit)."""
    p = np.asarray(point_coords, dtype=float)
    v = np.asarray(tangent, dtype=float)
    speed = np.linalg.norm(v)
    if speed * abs(t) < 1e-300:
        return p.copy()
    u = v / speed
    ang = speed * t
    q = np.cos(ang) * p + np.sin(ang) * u
    return q / np.linalg.norm(q)


def tangent_basis(point_coords, within_equator: bool = False):
    """Orthonormal tangent basis at a point.

    With ``within_equator`` the basis spans the tangent space of the equator
    sphere (dimension n-1), otherwise of the full sphere (dimension n).
    """
    p = np.asarray(point_coords, dtype=float)
    dim = p.shape[0]
    cols = [p]
    if within_equator:
        cols.append(np.eye(dim)[-1])
    basis = []
    for k in range(dim):
        e = np.eye(dim)[k]
        w = e.copy()
        for c in cols + basis:
            w = w - np.dot(w, c) * c
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            basis.append(w / nrm)
    want = dim - 1 - (1 if within_equator else 0)
    return np.array(basis[:want])


# ---------------------------------------------------------------------------
# Stereographic chart
# ---------------------------------------------------------------------------

def stereographic_to_halfspace(p: SpherePoint) -> HalfSpacePoint:
    """Project from the pole -e_1 on the equator onto the half-space.

    x_j = p_{j+1} / (1 + p_1).  The equator maps onto {x_n = 0} and the open
    hemisphere onto {x_n > 0}; the map is conformal with factor
    2 / (1 + |x|^2).
    """
    v = p.coords
    if 1.0 + v[0] < POLE_TOL:
        raise PoleSingularity("point is too close to the projection pole -e_1")
    x = v[1:] / (1.0 + v[0])
    return HalfSpacePoint(x)


def halfspace_to_sphere(x) -> SpherePoint:
    """Inverse of :func:`stereographic_to_halfspace`."""
    v = np.asarray(x, dtype=float)
    s = float(np.dot(v, v))
    coords = np.concatenate(([1.0 - s], 2.0 * v)) / (1.0 + s)
    return SpherePoint(coords)


def chart_conformal_factor(x) -> float:
    """rho(x) with pullback metric rho^2 * euclidean: rho = 2/(1+|x|^2)."""
    v = np.asarray(x, dtype=float)
    return 2.0 / (1.0 + float(np.dot(v, v)))


@dataclass(frozen=True)
class RotatedChart:
    """Stereographic chart whose pole is opposite a chosen equator anchor.

    The rotation fixes the vertical axis e_{n+1} and maps e_1 to the anchor,
    so the hemisphere still lands on the upper half-space, with the anchor
    itself mapped to the origin.
    """

    rotation: np.ndarray  # (n+1, n+1) orthogonal, fixes e_{n+1}

    @staticmethod
    def for_anchor(anchor_coords) -> "RotatedChart":
        b = np.asarray(anchor_coords, dtype=float)
        dim = b.shape[0]
        e1 = np.eye(dim)[0]
        c = float(np.dot(e1, b))
        if c > 1.0 - 1e-14:
            return RotatedChart(np.eye(dim))
        if c < -1.0 + 1e-14:
            # rotate by pi in the (e1, e2) plane
            rot = np.eye(dim)
            rot[0, 0] = -1.0
            rot[1, 1] = -1.0
            return RotatedChart(rot)
        # Rotation in the span{e1, b} plane sending e1 to b: acts as
        # [cos -sin; sin cos] on the (e1, w) frame, identity elsewhere.
        s = float(np.linalg.norm(b - c * e1))
        w = (b - c * e1) / s
        rot = np.eye(dim) + np.outer(b - e1, e1) + np.outer(-s * e1 + (c - 1.0) * w, w)
        return RotatedChart(rot)

    @staticmethod
    def for_point(point: SpherePoint) -> "RotatedChart":
        """Chart adapted to a concentration point: anchor below the point."""
        v = point.coords.copy()
        v[-1] = 0.0
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            anchor = np.eye(point.coords.shape[0])[0]
        else:
            anchor = v / nrm
        return RotatedChart.for_anchor(anchor)

    def to_chart(self, coords) -> np.ndarray:
        p = self.rotation.T @ np.asarray(coords, dtype=float)
        if 1.0 + p[0] < POLE_TOL:
            raise PoleSingularity("point too close to the chart pole")
        return p[1:] / (1.0 + p[0])

    def to_sphere(self, x) -> np.ndarray:
        v = np.asarray(x, dtype=float)
        s = float(np.dot(v, v))
        p = np.concatenate(([1.0 - s], 2.0 * v)) / (1.0 + s)
        return self.rotation @ p

    def chart_jacobian(self, coords) -> np.ndarray:
        """d(chart)/d(sphere point) as an n x (n+1) matrix at a sphere point."""
        p = self.rotation.T @ np.asarray(coords, dtype=float)
        d = 1.0 + p[0]
        x = p[1:] / d
        jac = np.zeros((p.shape[0] - 1, p.shape[0]))
        jac[:, 1:] = np.eye(p.shape[0] - 1) / d
        jac[:, 0] = -x / d
        return jac @ self.rotation.T
