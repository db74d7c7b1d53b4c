"""Associated 4-vector, boost vector, boosted spheres and the Mobius reparametrisation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .sphere import SphereGrid


def lorentz_factor(a) -> float:
    a = np.asarray(a, dtype=float)
    return math.sqrt(1.0 + float(a @ a))


def boost_matrix(a) -> np.ndarray:
    """Lambda_a acting on (t, x): t' = gamma t + a.x, x' = x + (gamma-1)(ahat.x)ahat + a t."""
    a = np.asarray(a, dtype=float)
    g = lorentz_factor(a)
    B = np.eye(4)
    B[0, 0] = g
    B[0, 1:] = a
    B[1:, 0] = a
    n2 = float(a @ a)
    if n2 > 0:
        B[1:, 1:] += (g - 1.0) * np.outer(a, a) / n2
    return B


def apply_boost(a, Z) -> np.ndarray:
    return boost_matrix(a) @ np.asarray(Z, dtype=float)


def z_vector(grid: SphereGrid, omega: np.ndarray) -> np.ndarray:
    """Z = (int w^3, int w^3 x^i) / int w^2 over the round sphere."""
    w2 = grid.integrate(omega**2)
    w3 = omega**3
    zt = grid.integrate(w3)
    zi = grid.integrate(w3 * grid.x)
    return np.concatenate([[zt], zi]) / w2


def boost_vector(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z[0] <= 0:
        raise ValueError(f"Z is not future-pointing (Z^t = {Z[0]:.6g})")
    q = Z[0] ** 2 - float(Z[1:] @ Z[1:])
    if q <= 0:
        raise ValueError(f"Z is not timelike (Minkowski square {-q:.6g} >= 0)")
    return Z[1:] / math.sqrt(q)


def boosted_profile(grid_or_points, rho: float, a) -> np.ndarray:
    """b_{rho,a}(x) = rho / (sqrt(1 + |a|^2) - a.x) on a grid or at points (3, ...)."""
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    x = grid_or_points.x if isinstance(grid_or_points, SphereGrid) else np.asarray(grid_or_points)
    a = np.asarray(a, dtype=float)
    return rho / (lorentz_factor(a) - np.tensordot(a, x, axes=1))


def mobius_map(a, x) -> np.ndarray:
    """Phi(x): spatial part of Lambda_{-a}(1, x) divided by its time part."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    g = lorentz_factor(a)
    ax = np.tensordot(a, x, axes=1)
    t = g - ax
    n2 = float(a @ a)
    sp = x.copy()
    if n2 > 0:
        sp = sp + (g - 1.0) * ax / n2 * a.reshape((3,) + (1,) * (x.ndim - 1))
    sp = sp - a.reshape((3,) + (1,) * (x.ndim - 1))
    return sp / t


def boost_surface(grid: SphereGrid, omega: np.ndarray, a, degree: int | None = None) -> np.ndarray:
    """omega_a(x) = omega(Phi(x)) / (sqrt(1 + |a|^2) - a.x), sampled at the nodes.

    omega is evaluated spectrally (degree ``degree``, default native) at the
    mapped points; the result is not band-limited for a != 0.
    """
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        return np.array(omega, dtype=float)
    c = grid.analysis(omega, grid.lmax if degree is None else degree)
    y = mobius_map(a, grid.x)
    vals = grid.evaluate(c, y)
    return vals / (lorentz_factor(a) - np.tensordot(a, grid.x, axes=1))


@dataclass
class RoundnessReport:
    rho_tilde: float
    a: list
    sup_dev: float
    grad_dev: float
    hess_dev: float
    curvature_dev: float

    def to_dict(self) -> dict:
        return asdict(self)


def roundness_report(grid: SphereGrid, omega: np.ndarray) -> RoundnessReport:
    """Deviation of omega from b_{rho, a}, rho the area radius and a from the 4-vector.

    Also reports sup |K~ - 1| for the rescaled metric (omega / rho)^2 ghat.
    """
    a = boost_vector(z_vector(grid, omega))
    rho = math.sqrt(float(grid.integrate(omega**2)) / (4.0 * math.pi))
    b = boosted_profile(grid, rho, a)
    d = omega - b
    gd = grid.cgrad(d)
    hd = grid.hess(d)
    k_tilde = rho**2 * (1.0 - grid.laplace(np.log(omega))) / omega**2
    return RoundnessReport(
        rho, [float(v) for v in a], float(np.max(np.abs(d))),
        float(np.sqrt(np.max(np.einsum("aij,aij->ij", gd, gd)))),
        float(np.sqrt(np.max(np.einsum("abij,abij->ij", hd, hd)))),
        float(np.max(np.abs(k_tilde - 1.0))),
    )
