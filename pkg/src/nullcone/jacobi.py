"""Jacobi operator, linear solves, stability spectrum and a constrained Newton solver."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import eigh, null_space
from scipy.sparse.linalg import LinearOperator, gmres

from .geometry import CrossSection

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """A linear or nonlinear solve failed; ``state`` holds the last valid iterate if any."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class JacobiContext:
    """Coefficient fields of the Jacobi operator on a fixed cross-section.

    J(f) = -2 Delta f - 4 tau(grad f) - H2 f - f (Ric(ul_L, L) - Rm(ul_L, L, L, ul_L)/2)
           - f H2/ul_theta^2 (|ul_chi_circ|^2 + Ric(ul_L, ul_L))
           - f (<ul_chi_circ, A_circ>/ul_theta + 2 div tau + 2 |tau|^2)
    """

    def __init__(self, sigma: CrossSection):
        self.sigma = sigma
        s = sigma
        self.tau = s.torsion
        self.tau_up = self.tau / s.omega**2
        ult = s.ul_theta
        chi0 = s.ul_chi_circ
        ric_lL = s.ambient_contract("RicLL")
        # Rm(ul_L, L, L, ul_L) = -Rm(ul_L, L, ul_L, L)
        rm_lLLl = -s.ambient_contract("RmLLLL")
        ric_ll = s.ambient_contract("Ric_ulul")
        div_tau = s.div(self.tau, 1)
        self.potential = (-s.H2 - (ric_lL - 0.5 * rm_lLLl)
                          - s.H2 / ult**2 * (s.inner(chi0, chi0, 2) + ric_ll)
                          - (s.inner(chi0, s.A_circ, 2) / ult + 2.0 * div_tau
                             + 2.0 * s.inner(self.tau, self.tau, 1)))
        self.has_torsion = bool(np.any(self.tau != 0.0))

    @property
    def grid(self):
        return self.sigma.grid

    @cached_property
    def closed_form_potential(self) -> np.ndarray:
        """In-model potential -H2 + 2 h'(omega)/omega."""
        s = self.sigma
        return -s.H2 + 2.0 * s.hvals[1] / s.omega

    def apply(self, f: np.ndarray, lmax: int | None = None) -> np.ndarray:
        s = self.sigma
        out = -2.0 * s.laplace(f, lmax) + self.potential * f
        if self.has_torsion:
            df = s.grid.cgrad(f, lmax)
            out = out - 4.0 * np.einsum("aij,aij->ij", self.tau_up, df)
        return out

    def apply_closed_form(self, f: np.ndarray, lmax: int | None = None) -> np.ndarray:
        return -2.0 * self.sigma.laplace(f, lmax) + self.closed_form_potential * f

    def round_multiplier(self, lmax: int) -> np.ndarray:
        """Eigenvalues of J on the round sphere of the same area radius, by degree."""
        rho = self.sigma.rho
        h, h1, _ = self.sigma.model.h_eval(rho)
        l = np.arange(lmax + 1)
        return 2.0 * l * (l + 1) / rho**2 - 4.0 * h / rho**2 + 2.0 * h1 / rho


def jacobi_apply(ctx: JacobiContext, f: np.ndarray, lmax: int | None = None) -> np.ndarray:
    return ctx.apply(f, lmax)


# ---------------------------------------------------------------------- coefficient packing

def _mask(lmax: int) -> np.ndarray:
    m = np.zeros((2, lmax + 1, lmax + 1), dtype=bool)
    for l in range(lmax + 1):
        m[0, l, : l + 1] = True
        m[1, l, 1 : l + 1] = True
    return m


def _degrees(lmax: int) -> np.ndarray:
    return np.broadcast_to(np.arange(lmax + 1)[:, None], (lmax + 1, lmax + 1))


class _Packer:
    def __init__(self, grid, lmax):
        self.grid = grid
        self.lmax = lmax
        self.mask = _mask(lmax)
        self.deg = np.stack([_degrees(lmax)] * 2)[self.mask]
        self.n = int(self.mask.sum())

    def to_field(self, v):
        c = np.zeros((2, self.lmax + 1, self.lmax + 1))
        c[self.mask] = v
        return self.grid.synthesis(c)

    def to_vec(self, f):
        return self.grid.analysis(f, self.lmax)[self.mask]


def _gmres(A, b, M, tol, maxiter, restart):
    return gmres(A, b, rtol=tol, atol=0.0, M=M, maxiter=maxiter, restart=restart)


def jacobi_solve(ctx: JacobiContext, g: np.ndarray, tol: float = 1e-10, lmax: int | None = None,
                 maxiter: int = 60, floor: float = 1e-6) -> np.ndarray:
    """Solve J f = g by preconditioned GMRES in coefficient space (Galerkin at ``lmax``).

    The preconditioner is the inverse of the round-sphere spectrum, with
    eigenvalues floored at ``floor / rho^2`` in magnitude.  Raises SolverError
    when the residual target is not reached.
    """
    grid = ctx.grid
    lmax = grid.lmax if lmax is None else lmax
    pk = _Packer(grid, lmax)
    lam = ctx.round_multiplier(lmax)[pk.deg]
    fl = floor / ctx.sigma.rho**2
    lam = np.where(np.abs(lam) < fl, np.where(lam < 0, -fl, fl), lam)
    A = LinearOperator((pk.n, pk.n), matvec=lambda v: pk.to_vec(ctx.apply(pk.to_field(v), lmax)))
    M = LinearOperator((pk.n, pk.n), matvec=lambda v: v / lam)
    b = pk.to_vec(g)
    bn = np.linalg.norm(b)
    if bn == 0:
        return np.zeros(grid.shape)
    x, info = _gmres(A, b, M, tol, maxiter, restart=min(pk.n, 60))
    res = np.linalg.norm(A.matvec(x) - b) / bn
    if not np.isfinite(res) or res > tol * 10:
        raise SolverError(f"jacobi_solve did not converge: relative residual {res:.3e} (target {tol:.1e})")
    return pk.to_field(x)


def min_eig_meanzero(ctx: JacobiContext, lmax: int | None = None) -> float:
    """Smallest eigenvalue of J on gamma-mean-zero functions of degree <= lmax.

    Assembles the Galerkin pair K = <Y, omega^2 J Y>, M = <Y, omega^2 Y> and
    solves the symmetric generalized problem on the complement of the
    constants, so Rayleigh quotients are int f J f dmu / int f^2 dmu.  Dense
    assembly costs (lmax+1)^2 operator applications and is immune to the slow
    convergence of inverse iteration on near-degenerate degree-1 triplets.
    """
    s = ctx.sigma
    grid = ctx.grid
    lmax = grid.L if lmax is None else lmax
    pk = _Packer(grid, lmax)
    w2 = s.omega**2
    n = pk.n
    K = np.empty((n, n))
    M = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        f = pk.to_field(e)
        K[:, j] = pk.to_vec(w2 * ctx.apply(f, lmax))
        M[:, j] = pk.to_vec(w2 * f)
        e[j] = 0.0
    asym = np.max(np.abs(K - K.T)) / np.max(np.abs(K))
    log.debug("min_eig_meanzero: n=%d, Galerkin asymmetry %.2e", n, asym)
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    # gamma-mean-zero: orthogonal to M @ 1 in the coefficient inner product
    Q = null_space((M @ pk.to_vec(np.ones(grid.shape)))[None, :])
    lam = eigh(Q.T @ K @ Q, Q.T @ M @ Q, eigvals_only=True, subset_by_index=[0, 0])
    return float(lam[0])


# ---------------------------------------------------------------------- Newton

@dataclass
class NewtonConfig:
    tol: float = 1e-11
    max_iter: int = 20
    linear_tol: float = 1e-12
    max_halvings: int = 8
    area_target: float | None = None
    # a stalled iterate within this factor of tol is accepted as the round-off floor
    floor_factor: float = 100.0


@dataclass
class NewtonRun:
    sigma: CrossSection
    rows: list = field(default_factory=list)
    reason: str = ""
    converged: bool = False

    @property
    def residuals(self) -> list[float]:
        return [r["residual"] for r in self.rows]


def stcmc_residual(sigma: CrossSection) -> float:
    """max |H2 - mean H2| / mean H2."""
    return float(np.max(np.abs(sigma.H2 - sigma.H2_mean)) / abs(sigma.H2_mean))


def _newton_operator(sigma: CrossSection, ctx: JacobiContext, L: int):
    pk = _Packer(sigma.grid, L)
    ult = sigma.ul_theta

    def matvec(v):
        return pk.to_vec(ctx.apply(ult * pk.to_field(v)))

    lam = ctx.round_multiplier(L)[pk.deg] * (2.0 / sigma.rho)
    fl = 1e-6 / sigma.rho**3
    lam = np.where(np.abs(lam) < fl, fl, lam)
    A = LinearOperator((pk.n, pk.n), matvec=matvec)
    M = LinearOperator((pk.n, pk.n), matvec=lambda v: v / lam)
    return pk, A, M


def newton_stcmc(sigma0: CrossSection, cfg: NewtonConfig | None = None) -> NewtonRun:
    """Constrained Newton iteration for constant H2 at fixed area.

    Each step solves J(ul_theta f) = c - H2 on degrees <= L, eliminating the
    constant c through the linearised area constraint int ul_theta f dmu =
    A_target - A (two solves per step, f = c f1 - f2).
    """
    cfg = cfg or NewtonConfig()
    sigma = sigma0
    L = sigma.grid.L
    target = sigma0.area if cfg.area_target is None else cfg.area_target
    run = NewtonRun(sigma=sigma)
    res = stcmc_residual(sigma)
    area_err = abs(sigma.area - target) / target
    run.rows.append({"iter": 0, "residual": res, "c": sigma.H2_mean, "damping": 1.0, "area_error": area_err})
    for it in range(1, cfg.max_iter + 1):
        if res <= cfg.tol and area_err <= cfg.tol:
            run.converged, run.reason = True, "tolerance"
            break
        ctx = JacobiContext(sigma)
        pk, A, M = _newton_operator(sigma, ctx, L)
        b1 = pk.to_vec(np.ones(sigma.grid.shape))
        b2 = pk.to_vec(sigma.H2)
        f1, i1 = gmres(A, b1, rtol=cfg.linear_tol, atol=0.0, M=M, maxiter=50, restart=min(pk.n, 80))
        f2, i2 = gmres(A, b2, rtol=cfg.linear_tol, atol=0.0, M=M, maxiter=50, restart=min(pk.n, 80))
        F1, F2 = pk.to_field(f1), pk.to_field(f2)
        ult = sigma.ul_theta
        d1 = sigma.integrate(ult * F1)
        d2 = sigma.integrate(ult * F2)
        if abs(d1) < 1e-300 or not np.isfinite(d1):
            raise SolverError("degenerate area constraint: int ul_theta J^-1(1) vanishes", state=sigma)
        c = (target - sigma.area + d2) / d1
        step = c * F1 - F2
        damping = 1.0
        for _ in range(cfg.max_halvings + 1):
            trial_omega = sigma.grid.truncate(sigma.omega + damping * step, L)
            try:
                trial = sigma.with_omega(trial_omega)
                tres = stcmc_residual(trial)
            except ValueError:
                tres = np.inf
            if tres < res or tres <= cfg.tol:
                break
            damping *= 0.5
        else:
            if res <= cfg.floor_factor * cfg.tol and area_err <= cfg.floor_factor * cfg.tol:
                run.converged, run.reason = True, "roundoff_floor"
                break
            run.sigma, run.reason = sigma, "stagnation"
            raise SolverError(f"Newton stagnated at iteration {it} with residual {res:.3e}", state=sigma)
        sigma, res = trial, tres
        area_err = abs(sigma.area - target) / target
        run.rows.append({"iter": it, "residual": res, "c": c, "damping": damping, "area_error": area_err})
    else:
        if not (res <= cfg.tol and area_err <= cfg.tol):
            run.sigma, run.reason = sigma, "max_iter"
            return run
        run.converged, run.reason = True, "tolerance"
    run.sigma = sigma
    return run
