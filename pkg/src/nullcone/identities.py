"""Residual checks of the structural identities, a-priori diagnostics and weighted norms."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import CrossSection
from .jacobi import JacobiContext


@dataclass
class ResidualReport:
    name: str
    max_residual: float
    scale: float
    relative: float
    bandlimit: int

    def to_dict(self) -> dict:
        return asdict(self)


def _report(name: str, residual: np.ndarray, terms: list[np.ndarray], bandlimit: int,
            reference: np.ndarray | None = None) -> ResidualReport:
    """Relative residual against the largest term.

    ``reference`` (the undifferentiated quantity) floors the scale so that
    identities whose terms all vanish, as on round spheres, are not judged
    relative to round-off.
    """
    mres = float(np.max(np.abs(residual)))
    scale = max(float(np.max(np.abs(t))) for t in terms)
    if reference is not None:
        scale = max(scale, float(np.max(np.abs(reference))))
    rel = 0.0 if scale == 0.0 else mres / scale
    return ResidualReport(name, mres, scale, rel, bandlimit)


def gauss_residual(sigma: CrossSection) -> ResidualReport:
    """H2 - 2R + 2 (Rbar - 2 Ric(L, ul_L) + Rm(ul_L, L, L, ul_L)/2).

    With ul_chi_circ = 0 the norm of the second fundamental form vector is H2/2,
    so the traced Gauss equation reads R - H2/2 = Rbar - 2 Ric + Rm/2.  The
    ambient side comes from the curvature table; in the model it equals
    2 (1 - h(omega)) / omega^2.
    """
    amb = (sigma.ambient_contract("Rbar") - 2.0 * sigma.ambient_contract("RicLL")
           - 0.5 * sigma.ambient_contract("RmLLLL"))
    res = sigma.H2 - 2.0 * sigma.R + 2.0 * amb
    return _report("gauss", res, [sigma.H2, 2.0 * sigma.R, 2.0 * amb], sigma.grid.L)


def gauss_residual_closed(sigma: CrossSection) -> ResidualReport:
    h = sigma.hvals[0]
    extra = 4.0 * (h - 1.0) / sigma.omega**2
    res = sigma.H2 - 2.0 * sigma.R - extra
    return _report("gauss_closed", res, [sigma.H2, 2.0 * sigma.R, extra], sigma.grid.L)


def codazzi_residual(sigma: CrossSection) -> tuple[ResidualReport, ResidualReport]:
    """Full and contracted Codazzi residuals for A.

    Full:       D_i A_jk - D_j A_ik - ul_theta Rm_ijkL - tau_j A_ik + tau_i A_jk
    Contracted: d H2_i - div A_i - ul_theta gamma^jk Rm_ijkL - tau^k A_ik + tau_i H2
    """
    s = sigma
    A = s.A
    tau = s.torsion
    DA = s.covd(A, 2)
    rm = s.ul_theta * s.ambient_contract("Rm_ijkL")
    tA = np.einsum("bij,acij->abcij", tau, A)
    full = DA - np.swapaxes(DA, 0, 1) - rm - tA + np.swapaxes(tA, 0, 1)
    r1 = _report("codazzi", full, [DA, rm, tA], s.grid.L, A)

    dH2 = s.grid.cgrad(s.H2)
    divA = np.einsum("kkiab->iab", DA) / s.omega**2
    rm_c = np.einsum("ijjab->iab", rm) / s.omega**2
    tauA = np.einsum("kab,kiab->iab", tau, A) / s.omega**2
    contracted = dH2 - divA - rm_c - tauA + tau * s.H2
    r2 = _report("codazzi_contracted", contracted, [dH2, divA, rm_c, tauA], s.grid.L, s.H2)
    return r1, r2


def _intrinsic_rm(s: CrossSection) -> np.ndarray:
    g = s.metric
    return s.K * (np.einsum("acxy,bdxy->abcdxy", g, g) - np.einsum("adxy,bcxy->abcdxy", g, g))


def simon_full_residual(sigma: CrossSection) -> ResidualReport:
    """Residual of the full null Simon identity for D_k D_l A_ij (torsion terms included)."""
    s = sigma
    A = s.A
    Aup = A / s.omega**2  # A^m_l with the first index raised
    tau = s.torsion
    DA = s.covd(A, 2)          # [l, i, j]
    DDA = s.covd(DA, 3)        # [k, l, i, j]
    Dtau = s.covd(tau, 1)      # [i, j]
    W = s.ul_theta * s.ambient_contract("Rm_ijkL")  # W[k, j, l] = ul_theta Rm_kjlL
    DW = s.covd(W, 3)          # [i, k, j, l]
    Rm = _intrinsic_rm(s)

    lhs = DDA
    swap = np.einsum("ijklxy->klijxy", DDA)
    curv = (np.einsum("kijmxy,mlxy->klijxy", Rm, Aup)
            + np.einsum("kilmxy,mjxy->klijxy", Rm, Aup))
    tau_terms = (np.einsum("jxy,iklxy->klijxy", tau, DA)
                 + np.einsum("ixy,kjlxy->klijxy", tau, DA)
                 - np.einsum("kxy,ijlxy->klijxy", tau, DA)
                 - np.einsum("lxy,kijxy->klijxy", tau, DA)
                 + np.einsum("ijxy,klxy->klijxy", Dtau, A)
                 + np.einsum("kixy,ljxy->klijxy", Dtau, A)
                 - np.einsum("ikxy,jlxy->klijxy", Dtau, A)
                 - np.einsum("klxy,ijxy->klijxy", Dtau, A))
    amb = np.einsum("ikjlxy->klijxy", DW) + DW
    res = lhs - swap - curv - tau_terms - amb
    return _report("simon_full", res, [lhs, swap, curv, tau_terms, amb], s.grid.L, A)


def simon_contracted_coefficients(sigma: CrossSection) -> dict:
    """Coefficients of the trace-free (d omega x d omega) term, printed and rederived.

    Rederiving the trace from the model gives -24(1-h)/w^4 - 16h'/w^3 + 4h''/w^2;
    the printed coefficient carries -4h''/w^2 instead, leaving a remainder
    8h''/w^2 (d omega x d omega)_circ of relative size O(1/rho^2).
    """
    w = sigma.omega
    h, h1, h2 = sigma.hvals
    ult = sigma.ul_theta
    printed = (ult**2 * (2 * (1 - h) / w**2 + 2 * h1 / w - h2)
               - ult * (16 * (1 - h) / w**3 + 12 * h1 / w**2))
    exact = -24 * (1 - h) / w**4 - 16 * h1 / w**3 + 4 * h2 / w**2
    return {"printed": printed, "exact": exact}


def simon_contracted_residual(sigma: CrossSection, variant: str = "exact") -> ResidualReport:
    """Hess H2 - Delta A + (R + 2(1-h)/w^2 + h'/w) A_circ - c(w) (dw x dw)_circ (torsion-free model)."""
    if variant not in ("exact", "printed"):
        raise ValueError(f"unknown variant {variant!r}")
    s = sigma
    w = s.omega
    h, h1, _ = s.hvals
    DA = s.covd(s.A, 2)
    DDA = s.covd(DA, 3)
    lapA = np.einsum("kkijxy->ijxy", DDA) / w**2
    hessH2 = s.hess(s.H2)
    dw = s.domega
    dwdw = np.einsum("ixy,jxy->ijxy", dw, dw)
    dwdw0 = dwdw - 0.5 * s.grad_sq * s.grid.proj
    coef = simon_contracted_coefficients(s)[variant]
    t_A = (s.R + 2 * (1 - h) / w**2 + h1 / w) * s.A_circ
    t_dw = coef * dwdw0
    res = hessH2 - lapA + t_A - t_dw
    return _report(f"simon_contracted_{variant}", res, [hessH2, lapA, t_A, t_dw], s.grid.L, s.H2)


def simon_residual(sigma: CrossSection, form: str = "full") -> ResidualReport:
    if form == "full":
        return simon_full_residual(sigma)
    if form == "contracted":
        return simon_contracted_residual(sigma, "exact")
    if form == "contracted_printed":
        return simon_contracted_residual(sigma, "printed")
    raise ValueError(f"unknown Simon form {form!r}")


def jacobi_consistency(sigma: CrossSection, f: np.ndarray, eps: float) -> tuple[ResidualReport, np.ndarray, np.ndarray]:
    """Central difference of H2 along omega +- eps f against J(ul_theta f).

    Returns the report plus both sides.
    """
    if not (0 < eps <= 1e-3 * float(sigma.omega.min())):
        raise ValueError(f"step eps={eps} outside (0, 1e-3 min omega]")
    plus = sigma.with_omega(sigma.omega + eps * f)
    minus = sigma.with_omega(sigma.omega - eps * f)
    fd = (plus.H2 - minus.H2) / (2 * eps)
    jf = JacobiContext(sigma).apply(sigma.ul_theta * f)
    return _report("jacobi_consistency", fd - jf, [fd, jf], sigma.grid.L), fd, jf


# ---------------------------------------------------------------------- a-priori class

@dataclass
class APrioriReport:
    sigma: float
    dev: float
    acirc: float
    grad_acirc: float
    c3: float
    member: bool

    def to_dict(self) -> dict:
        return asdict(self)


def c3_surrogate(sigma: CrossSection) -> float:
    """max over l <= 3 of sup |D_hat^l (omega / rho)| in round frame norms."""
    f = sigma.omega / sigma.rho
    g = sigma.grid
    best = float(np.max(np.abs(f)))
    T = f
    for k in range(1, 4):
        T = g.cgrad(T) if k == 1 else g.covd(T, k - 1)
        axes = "abcdefgh"[:k]
        best = max(best, float(np.sqrt(np.max(np.einsum(f"{axes}ij,{axes}ij->ij", T, T)))))
    return best


def apriori_report(sigma: CrossSection, s: float, B1: float = 2.0, B2: float = 10.0,
                   B3: float = 10.0) -> APrioriReport:
    dev = float(np.max(np.abs(sigma.omega - s)))
    acirc = s**4 * float(np.max(sigma.norm(sigma.A_circ, 2)))
    grad_acirc = s**5 * float(np.max(sigma.norm(sigma.covd(sigma.A_circ, 2), 3)))
    member = dev <= B1 and acirc <= B2 and grad_acirc <= B3
    return APrioriReport(s, dev, acirc, grad_acirc, c3_surrogate(sigma), bool(member))


# ---------------------------------------------------------------------- weighted norms

def weighted_norm(f: np.ndarray, sigma: CrossSection | None, grid=None, k: int = 0, p: float = 2) -> float:
    """||f||_{W^{k,p}} = ||f||_{L^p} + rho ||grad f||_{W^{k-1,p}} for the round or conformal metric.

    ``sigma=None`` selects the round metric on ``grid`` (rho = 1).
    """
    if k not in (0, 1, 2, 3) or p not in (2, math.inf, float("inf")):
        raise ValueError(f"unsupported norm parameters k={k}, p={p}")
    if sigma is not None:
        grid = sigma.grid
        w = sigma.omega
        rho = sigma.rho
    else:
        if grid is None:
            raise ValueError("a grid is required for the round metric")
        w = np.ones(grid.shape)
        rho = 1.0

    def lp(T, rank):
        axes = "abcdefgh"[:rank]
        sq = np.einsum(f"{axes}ij,{axes}ij->ij", T, T) / w ** (2 * rank) if rank else T * T
        if p == 2:
            return math.sqrt(float(grid.integrate(sq * w**2)))
        return math.sqrt(float(np.max(sq)))

    total = 0.0
    T = f
    for rank in range(k + 1):
        total += rho**rank * lp(T, rank)
        if rank < k:
            if rank == 0:
                T = grid.cgrad(T)
            elif sigma is not None:
                T = sigma.covd(T, rank)
            else:
                T = grid.covd(T, rank)
    return total
