"""Curvature candidates: ambient polynomials of degree <= 2 on the hemisphere.

A field is K(x) = kappa0 + b.x + x.Q.x restricted to the sphere.  Keeping the
family polynomial makes every derived quantity exact: tangent gradients and
Hessians, Laplace-Beltrami values, boundary normal derivatives, and the
pullback of K to the half-space chart are all closed-form, so no numerical
differentiation enters the core.

Conventions
-----------
* The outward normal at the equator is nu = -e_{n+1}, so
  dK/dnu(z) = -dK/dx_{n+1}(z) (the ambient partial is already tangent there).
* K_1 denotes the restriction of K to the equator sphere S^{n-1}.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonPositiveField
from .geometry import SpherePoint, tangent_basis

_MONOMIAL_RE = re.compile(r"^x(\d+)(?:\^(2)|\*x(\d+))?$")


def parse_monomial(text: str, ambient_dim: int):
    """Parse a monomial string over x1..x{n+1} of total degree <= 2.

    Accepted forms: ``x3``, ``x3^2``, ``x1*x2`` (1-based variables).
    Returns a tuple of 0-based variable indices of length 1 or 2.
    """
    m = _MONOMIAL_RE.match(text.replace(" ", ""))
    if not m:
        raise ConfigError(f"cannot parse monomial {text!r}")
    i = int(m.group(1))
    if m.group(2):
        j = i
    elif m.group(3):
        j = int(m.group(3))
    else:
        j = None
    for k in (i, j):
        if k is not None and not (1 <= k <= ambient_dim):
            raise ConfigError(f"variable x{k} out of range in {text!r}")
    return (i - 1,) if j is None else (i - 1, j - 1)


@dataclass(frozen=True)
class ScalarField:
    """Positive curvature candidate on the closed upper hemisphere."""

    n: int
    kappa0: float
    linear: np.ndarray     # b, shape (n+1,)
    quadratic: np.ndarray  # Q symmetric, shape (n+1, n+1)

    def __init__(self, n, kappa0, terms=()):
        if n < 5:
            raise ConfigError("dimension must be at least 5")
        if kappa0 <= 0:
            raise ConfigError("constant term must be positive")
        dim = n + 1
        b = np.zeros(dim)
        q = np.zeros((dim, dim))
        for monomial, coeff in terms:
            idx = parse_monomial(monomial, dim) if isinstance(monomial, str) else tuple(monomial)
            if len(idx) == 1:
                b[idx[0]] += coeff
            else:
                i, j = idx
                q[i, j] += coeff / 2.0
                q[j, i] += coeff / 2.0
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "kappa0", float(kappa0))
        object.__setattr__(self, "linear", b)
        object.__setattr__(self, "quadratic", q)
        lower = self.positivity_lower_bound()
        if lower <= 0.0:
            grid_min = float(self._grid_values(24).min())
            if grid_min <= 0.0:
                raise NonPositiveField(f"field takes values <= 0 (grid minimum {grid_min})")

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def constant(n: int, value: float = 1.0) -> "ScalarField":
        return ScalarField(n, value, ())

    @staticmethod
    def from_config(cfg: dict) -> "ScalarField":
        try:
            n = int(cfg["dimension"])
            kappa0 = float(cfg["kappa0"])
            terms = [(t["monomial"], float(t["coeff"])) for t in cfg.get("terms", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid field specification: {exc}") from exc
        return ScalarField(n, kappa0, terms)

    def to_config(self) -> dict:
        terms = []
        dim = self.n + 1
        for i in range(dim):
            if self.linear[i] != 0.0:
                terms.append({"monomial": f"x{i+1}", "coeff": float(self.linear[i])})
        for i in range(dim):
            for j in range(i, dim):
                c = self.quadratic[i, j] * (1.0 if i == j else 2.0)
                if c != 0.0:
                    mono = f"x{i+1}^2" if i == j else f"x{i+1}*x{j+1}"
                    terms.append({"monomial": mono, "coeff": float(c)})
        return {"dimension": self.n, "kappa0": self.kappa0, "terms": terms}

    def positivity_lower_bound(self) -> float:
        """Conservative bound kappa0 - sum |coeff| * max|monomial| over the sphere."""
        total = float(np.sum(np.abs(self.linear)))
        dim = self.n + 1
        for i in range(dim):
            for j in range(i, dim):
                c = self.quadratic[i, j] * (1.0 if i == j else 2.0)
                if c != 0.0:
                    total += abs(c) * (1.0 if i == j else 0.5)
        return self.kappa0 - total

    # -- pointwise calculus (exact) -----------------------------------------

    def value(self, p) -> float:
        v = np.asarray(p.coords if isinstance(p, SpherePoint) else p, dtype=float)
        return float(self.kappa0 + self.linear @ v + v @ self.quadratic @ v)

    def ambient_gradient(self, v) -> np.ndarray:
        return self.linear + 2.0 * self.quadratic @ np.asarray(v, dtype=float)

    def tangent_gradient(self, p) -> np.ndarray:
        """Gradient of K on the sphere, as an ambient vector tangent at p."""
        v = np.asarray(p.coords if isinstance(p, SpherePoint) else p, dtype=float)
        g = self.ambient_gradient(v)
        return g - np.dot(g, v) * v

    def tangent_hessian(self, p, basis=None) -> np.ndarray:
        """Riemannian Hessian of K on S^n in an orthonormal tangent basis.

        Hess(X, Y) = X . D^2K . Y - <dK(p), p> <X, Y> (geodesics curve back
        toward the origin with acceleration -p).
        """
        v = np.asarray(p.coords if isinstance(p, SpherePoint) else p, dtype=float)
        if basis is None:
            basis = tangent_basis(v)
        radial = float(np.dot(self.ambient_gradient(v), v))
        amb = 2.0 * self.quadratic
        return basis @ amb @ basis.T - radial * np.eye(len(basis))

    def laplace_beltrami(self, p) -> float:
        """Laplace-Beltrami value on S^n; for K = x_k this is -n x_k."""
        v = np.asarray(p.coords if isinstance(p, SpherePoint) else p, dtype=float)
        amb = 2.0 * self.quadratic
        return float(np.trace(amb) - v @ amb @ v - self.n * np.dot(self.ambient_gradient(v), v))

    def normal_derivative(self, z) -> float:
        """dK/dnu at a boundary point, outward normal nu = -e_{n+1}."""
        v = np.asarray(z.coords if isinstance(z, SpherePoint) else z, dtype=float)
        return float(-self.ambient_gradient(v)[-1])

    # -- restriction to the equator sphere ----------------------------------

    def boundary_gradient(self, z) -> np.ndarray:
        """Gradient of K_1 on the equator sphere, ambient representation."""
        v = np.asarray(z.coords if isinstance(z, SpherePoint) else z, dtype=float)
        g = self.ambient_gradient(v)
        g = g - np.dot(g, v) * v
        g[-1] = 0.0
        return g

    def boundary_hessian(self, z, basis=None) -> np.ndarray:
        """Riemannian Hessian of K_1 on the equator S^{n-1}."""
        v = np.asarray(z.coords if isinstance(z, SpherePoint) else z, dtype=float)
        if basis is None:
            basis = tangent_basis(v, within_equator=True)
        radial = float(np.dot(self.ambient_gradient(v), v))
        amb = 2.0 * self.quadratic
        return basis @ amb @ basis.T - radial * np.eye(len(basis))

    # -- chart pullback (exact rational calculus) ----------------------------

    def chart_data(self, chart, x):
        """Value, gradient, Hessian of the pullback K o chart^{-1} at chart point x.

        The pullback through p(x) = ((1-|x|^2), 2x)/(1+|x|^2) (composed with the
        chart rotation) is rational; first and second derivatives are assembled
        from the exact derivatives of p.
        """
        x = np.asarray(x, dtype=float)
        nn = x.shape[0]
        rot = chart.rotation
        s = float(x @ x)
        d = 1.0 + s
        p = np.concatenate(([1.0 - s], 2.0 * x)) / d
        # dp/dx: row alpha of J is the gradient of p_alpha.
        jac = np.zeros((nn + 1, nn))
        jac[0] = -4.0 * x / d**2
        jac[1:] = 2.0 * np.eye(nn) / d
        jac[1:] += -4.0 * np.outer(x, x) / d**2
        # second derivatives of each p_alpha
        hess_p = np.zeros((nn + 1, nn, nn))
        eye = np.eye(nn)
        hess_p[0] = -4.0 * eye / d**2 + 16.0 * np.outer(x, x) / d**3
        for k in range(nn):
            hp = np.zeros((nn, nn))
            hp -= 4.0 * (np.outer(eye[k], x) + np.outer(x, eye[k])) / d**2
            hp -= 4.0 * x[k] * eye / d**2
            hp += 16.0 * x[k] * np.outer(x, x) / d**3
            hess_p[k + 1] = hp
        # rotate the field coefficients instead of the points
        b = rot.T @ self.linear
        q = rot.T @ self.quadratic @ rot
        value = float(self.kappa0 + b @ p + p @ q @ p)
        amb_grad = b + 2.0 * q @ p
        grad = jac.T @ amb_grad
        hess = jac.T @ (2.0 * q) @ jac
        hess += np.einsum("a,aij->ij", amb_grad, hess_p)
        return value, grad, hess

    # -- global extrema ------------------------------------------------------

    def _grid_values(self, density: int):
        pts = hemisphere_grid(self.n, density)
        return (
            self.kappa0
            + pts @ self.linear
            + np.einsum("ki,ij,kj->k", pts, self.quadratic, pts)
        )

    def min_max(self, grid_density: int = 12):
        """Grid-scan extrema refined by projected-gradient ascent/descent."""
        if grid_density < 10:
            raise ConfigError("grid_density must be at least 10")
        pts = hemisphere_grid(self.n, grid_density)
        vals = (
            self.kappa0
            + pts @ self.linear
            + np.einsum("ki,ij,kj->k", pts, self.quadratic, pts)
        )
        kmin = self._polish_extremum(pts[np.argmin(vals)], sign=-1.0)
        kmax = self._polish_extremum(pts[np.argmax(vals)], sign=+1.0)
        if kmin <= 0.0:
            raise NonPositiveField(f"refined minimum {kmin} is not positive")
        return kmin, kmax

    def _polish_extremum(self, start, sign: float, steps: int = 200) -> float:
        v = np.asarray(start, dtype=float)
        step = 0.1
        best = self.value(v)
        for _ in range(steps):
            g = self.tangent_gradient(v)
            if np.linalg.norm(g) < 1e-14:
                break
            cand = v + sign * step * g
            cand[-1] = max(cand[-1], 0.0)
            cand = cand / np.linalg.norm(cand)
            val = self.value(cand)
            if sign * (val - best) > 0:
                v, best = cand, val
                step = min(step * 1.3, 0.5)
            else:
                step *= 0.5
                if step < 1e-14:
                    break
        return best


def hemisphere_grid(n: int, density: int) -> np.ndarray:
    """Deterministic quasi-uniform points on the closed upper hemisphere.

    A seeded uniform sample (area-exact in distribution) plus the ambient
    coordinate poles; adequate for scanning the smooth low-degree fields the
    family supports.
    """
    rng = np.random.default_rng(20240 + 7 * n + density)
    count = max(density ** 2 * (n + 1) * 8, 4096)
    pts = rng.standard_normal((count, n + 1))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts[:, -1] = np.abs(pts[:, -1])
    poles = np.concatenate([np.eye(n + 1), -np.eye(n + 1)])
    poles[:, -1] = np.abs(poles[:, -1])
    poles = poles[np.linalg.norm(poles, axis=1) > 0.5]
    poles /= np.linalg.norm(poles, axis=1, keepdims=True)
    return np.concatenate([pts, poles])
