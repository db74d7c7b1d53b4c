"""Geometry of a cross-section {r = omega} of the null cone.

Induced metric gamma = omega^2 ghat.  Tangent tensors use the Cartesian
storage of :mod:`nullcone.sphere` (lower indices, projected); the metric is
then ``omega**2 * grid.proj`` and its inverse ``grid.proj / omega**2``.
"""

from __future__ import annotations

import hashlib
import math
from functools import cached_property

import numpy as np

from .background import BackgroundModel
from .sphere import SphereGrid, _contract_index

AMBIENT_SELECTORS = ("RicLL", "RmLLLL", "Ric_ulul", "Rbar", "Rm_ijkL")


def christoffel_difference(grid: SphereGrid, u: np.ndarray) -> np.ndarray:
    """C[c, a, b] with Gamma_gamma^b_ca - Gamma_hat^b_ca = C[c, a, b] for gamma = e^{2 psi} ghat, u = d psi."""
    P = grid.proj
    return (np.einsum("cbij,aij->cabij", P, u) + np.einsum("abij,cij->cabij", P, u)
            - np.einsum("caij,bij->cabij", P, u))


class CrossSection:
    """A graph omega over the round sphere inside a background cone.

    ``degree`` is the spectral degree trusted for omega itself (default: the
    grid's native resolution).  Pass the state bandlimit for band-limited
    graphs to keep derivative round-off at its floor.
    """

    def __init__(self, grid: SphereGrid, omega: np.ndarray, model: BackgroundModel,
                 degree: int | None = None):
        omega = np.array(omega, dtype=float)
        if omega.shape != grid.shape:
            raise ValueError(f"omega shape {omega.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(omega)):
            raise ValueError("omega has non-finite values")
        if omega.min() < model.rmin:
            raise ValueError(f"min omega={omega.min():.6g} below r_min={model.rmin:.6g}")
        omega.setflags(write=False)
        self.grid = grid
        self.omega = omega
        self.model = model
        self._auto = degree is None
        self.degree = grid.lmax if degree is None else min(int(degree), grid.lmax)

    @classmethod
    def round(cls, grid: SphereGrid, radius: float, model: BackgroundModel) -> CrossSection:
        return cls(grid, np.full(grid.shape, float(radius)), model, degree=0)

    @cached_property
    def key(self) -> str:
        return hashlib.sha1(self.omega.tobytes()).hexdigest()

    def with_omega(self, omega: np.ndarray) -> CrossSection:
        return CrossSection(self.grid, omega, self.model, None if self._auto else self.degree)

    # ------------------------------------------------------------------ basics

    @cached_property
    def coeffs(self) -> np.ndarray:
        if self._auto:
            c = self.grid._deriv_coeffs(self.omega, None)
            c[0, 0, 0] = self.grid.analysis(self.omega, 0)[0, 0, 0]
            return c
        return self.grid.analysis(self.omega, self.degree)

    @cached_property
    def effective_degree(self) -> int:
        shells = np.abs(self.coeffs).sum(axis=(0, 2))
        nz = np.nonzero(shells)[0]
        return int(nz[-1]) if nz.size else 0

    @cached_property
    def domega(self) -> np.ndarray:
        """Round gradient of omega (Cartesian covector)."""
        return self.grid.cgrad_coeffs(self.coeffs)

    @cached_property
    def grad_sq(self) -> np.ndarray:
        """|d omega|^2 with respect to ghat."""
        return np.einsum("aij,aij->ij", self.domega, self.domega)

    @cached_property
    def lap_omega(self) -> np.ndarray:
        return self.grid.synthesis(self.grid.laplace_coeffs(self.coeffs))

    @cached_property
    def hess_round(self) -> np.ndarray:
        return self.grid.covd(self.domega, 1, min(self.effective_degree + 1, self.grid.lmax))

    @cached_property
    def hvals(self):
        return self.model.h_eval(self.omega)

    @cached_property
    def metric(self) -> np.ndarray:
        return self.omega**2 * self.grid.proj

    @cached_property
    def metric_inv(self) -> np.ndarray:
        return self.grid.proj / self.omega**2

    @cached_property
    def dlog(self) -> np.ndarray:
        return self.domega / self.omega

    @cached_property
    def christoffel(self) -> np.ndarray:
        return christoffel_difference(self.grid, self.dlog)

    # ------------------------------------------------------------------ calculus on gamma

    def covd(self, T: np.ndarray, k: int, lmax: int | None = None) -> np.ndarray:
        """Covariant derivative w.r.t. gamma of a Cartesian tangent k-tensor (derivative index first)."""
        D = self.grid.covd(T, k, lmax)
        C = self.christoffel
        for i in range(k):
            # subtract C[c, a_i, b] T[..., b, ...]
            Ti = np.moveaxis(T, i, 0)
            corr = np.einsum("cabij,b...ij->ca...ij", C, Ti)
            D = D - np.moveaxis(corr, 1, i + 1)
        return D

    def grad(self, f: np.ndarray, lmax: int | None = None) -> np.ndarray:
        return self.grid.cgrad(f, lmax)

    def hess(self, f: np.ndarray, lmax: int | None = None) -> np.ndarray:
        return self.covd(self.grid.cgrad(f, lmax), 1)

    def laplace(self, f: np.ndarray, lmax: int | None = None) -> np.ndarray:
        """Delta_gamma f = Delta_hat f / omega^2 (conformal invariance in two dimensions)."""
        return self.grid.laplace(f, lmax) / self.omega**2

    def trace(self, T: np.ndarray) -> np.ndarray:
        return np.einsum("aaij->ij", T) / self.omega**2

    def inner(self, S: np.ndarray, T: np.ndarray, k: int) -> np.ndarray:
        """Pointwise gamma inner product of two covariant k-tensors."""
        axes = "abcdefgh"[:k]
        return np.einsum(f"{axes}ij,{axes}ij->ij", S, T) / self.omega ** (2 * k)

    def norm(self, T: np.ndarray, k: int) -> np.ndarray:
        return np.sqrt(np.maximum(self.inner(T, T, k), 0.0))

    def trace_free(self, T: np.ndarray) -> np.ndarray:
        return T - 0.5 * np.einsum("aaij->ij", T) * self.grid.proj

    def div(self, T: np.ndarray, k: int) -> np.ndarray:
        """gamma-divergence on the first index of a k-tensor."""
        D = self.covd(T, k)
        return np.einsum("aa...ij->...ij", D) / self.omega**2

    def integrate(self, f: np.ndarray) -> float:
        """Integral against the induced area element omega^2 dmu_hat."""
        return float(self.grid.integrate(f * self.omega**2))

    # ------------------------------------------------------------------ scalars

    @cached_property
    def area(self) -> float:
        return float(self.grid.integrate(self.omega**2))

    @cached_property
    def rho(self) -> float:
        return math.sqrt(self.area / (4.0 * math.pi))

    @cached_property
    def ul_theta(self) -> np.ndarray:
        return 2.0 / self.omega

    @cached_property
    def H2(self) -> np.ndarray:
        """Spacetime mean curvature squared."""
        w = self.omega
        h = self.hvals[0]
        return 4.0 * h / w**2 - 4.0 * self.lap_omega / w**3 + 4.0 * self.grad_sq / w**4

    @cached_property
    def H2_mean(self) -> float:
        return float(self.grid.integrate(self.H2 * self.omega**2) / self.area)

    @cached_property
    def log_omega_lap(self) -> np.ndarray:
        return self.grid.laplace(np.log(self.omega))

    @cached_property
    def K(self) -> np.ndarray:
        """Gauss curvature of omega^2 ghat."""
        return (1.0 - self.log_omega_lap) / self.omega**2

    @cached_property
    def R(self) -> np.ndarray:
        return 2.0 * self.K

    # ------------------------------------------------------------------ tensors

    @cached_property
    def hess_gamma_omega(self) -> np.ndarray:
        """Hess_gamma omega = Hess_hat omega - C(d omega)."""
        corr = np.einsum("cabij,bij->caij", self.christoffel, self.domega)
        return self.hess_round - corr

    @cached_property
    def ul_chi(self) -> np.ndarray:
        return self.omega * self.grid.proj

    @cached_property
    def ul_chi_circ(self) -> np.ndarray:
        return self.ul_chi - 0.5 * self.trace(self.ul_chi) * self.metric

    @cached_property
    def A(self) -> np.ndarray:
        """Scalar second fundamental form A = ul_theta chi.

        A = A_r - 2 ul_theta Hess omega + |d omega|^2_gamma ul_theta ul_chi with
        A_r = 2 h(omega) ghat (geodesic background, zeta_r = 0).
        """
        P = self.grid.proj
        h = self.hvals[0]
        grad_sq_gamma = self.grad_sq / self.omega**2
        return (2.0 * h * P - 2.0 * self.ul_theta * self.hess_gamma_omega
                + grad_sq_gamma * self.ul_theta * self.ul_chi)

    @cached_property
    def A_circ(self) -> np.ndarray:
        return self.A - 0.5 * self.trace(self.A) * self.metric

    @cached_property
    def torsion(self) -> np.ndarray:
        """tau = tau_r - ul_chi_circ(grad omega, .) - (|ul_chi_circ|^2 + Ric(ul_L, ul_L)) d omega / ul_theta."""
        tau_r = np.zeros_like(self.domega)
        grad_up = self.domega / self.omega**2
        chi_term = np.einsum("abij,aij->bij", self.ul_chi_circ, grad_up)
        src = self.inner(self.ul_chi_circ, self.ul_chi_circ, 2) + self.ambient_contract("Ric_ulul")
        return tau_r - chi_term - src / self.ul_theta * self.domega

    # ------------------------------------------------------------------ ambient curvature

    @cached_property
    def _frame5(self):
        """5-slot images of the Cartesian tangent basis, of n (ul_L) and of L."""
        g = self.grid
        shape = g.shape
        E = np.zeros((5, 3) + shape)
        E[:3] = g.proj
        E[3] = self.domega
        w2 = self.omega**2
        Lv = np.zeros((5,) + shape)
        Lv[:3] = -2.0 * self.domega / w2
        Lv[3] = -self.grad_sq / w2
        Lv[4] = 1.0
        nv = np.zeros((5,) + shape)
        nv[3] = 1.0
        return E, nv, Lv

    @cached_property
    def _riemann5(self):
        return self.model.riemann_tensor(self.omega, self.grid.proj)

    @cached_property
    def _ginv5(self):
        return self.model.inverse_metric(self.omega, self.grid.proj)

    def ambient_contract(self, which: str) -> np.ndarray:
        """Contractions of the ambient curvature table through the frame decomposition."""
        if which not in AMBIENT_SELECTORS:
            raise ValueError(f"unknown ambient selector {which!r}; choose from {AMBIENT_SELECTORS}")
        return self._ambient[which]

    @cached_property
    def _ambient(self) -> dict:
        R = self._riemann5
        G = self._ginv5
        E, nv, Lv = self._frame5
        Ric = np.einsum("bd...,abcd...->ac...", G, R)
        out = {
            "RicLL": np.einsum("a...,ac...,c...->...", nv, Ric, Lv),
            "Ric_ulul": np.einsum("a...,ac...,c...->...", nv, Ric, nv),
            "Rbar": np.einsum("ac...,ac...->...", G, Ric),
            "RmLLLL": np.einsum("abcd...,a...,b...,c...,d...->...", R, nv, Lv, nv, Lv),
        }
        RL = np.einsum("abcd...,d...->abc...", R, Lv)
        for i in range(3):
            RL = _contract_index(np.moveaxis(E, 0, 1), RL, i)
        out["Rm_ijkL"] = RL
        return out

    def rm_ijkL_closed_form(self) -> np.ndarray:
        """(2(1-h)/omega^2 + h'/omega)(d omega_i gamma_jk - d omega_j gamma_ik)."""
        h, h1, _ = self.hvals
        coef = 2.0 * (1.0 - h) / self.omega**2 + h1 / self.omega
        gam = self.metric
        dw = self.domega
        return coef * (np.einsum("aij,bcij->abcij", dw, gam) - np.einsum("bij,acij->abcij", dw, gam))


def gauss_curvature(sigma: CrossSection) -> np.ndarray:
    return sigma.K


def area_radius(sigma: CrossSection) -> float:
    return sigma.rho


def spacetime_mean_curvature(sigma: CrossSection) -> tuple[np.ndarray, float]:
    return sigma.H2, sigma.H2_mean


def scalar_A(sigma: CrossSection) -> tuple[np.ndarray, np.ndarray]:
    return sigma.A, sigma.A_circ


def torsion(sigma: CrossSection) -> np.ndarray:
    return sigma.torsion


def ul_theta(sigma: CrossSection) -> np.ndarray:
    return sigma.ul_theta
