"""Band-limited calculus on the round unit sphere.

Grid: Gauss-Legendre colatitudes (poles excluded) times uniform longitudes
starting at 0.  Spectral basis: real orthonormal spherical harmonics without
the Condon-Shortley phase,

    Y_l0      = Pbar_l0(cos t)
    Y_lm      = sqrt(2) Pbar_lm(cos t) cos(m p)     (m > 0)
    Y_l,-m    = sqrt(2) Pbar_lm(cos t) sin(m p)     (m > 0)

with int_{S^2} Y_lm Y_l'm' = delta.  Coefficient arrays have shape
``(..., 2, lmax + 1, lmax + 1)``: index 0 holds the cosine (m >= 0) family,
index 1 the sine (m > 0) family; entries with m > l are zero.

Tensor fields tangent to the sphere are stored by their Cartesian components
in R^3, tensor indices leading, e.g. a covector is ``(3, n_theta, n_phi)``.
Cartesian components of smooth tangent fields are smooth scalars, so every
covariant derivative reduces to scalar spectral gradients followed by a
tangential projection, with no pole special-casing.
"""

from __future__ import annotations

import functools
import math
from pathlib import Path

import numpy as np


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1].

    numpy's weights lose a few digits near the endpoints for n of order 100;
    two Newton passes on the nodes plus the closed-form weight formula
    restores them to round-off.
    """
    x, _ = np.polynomial.legendre.leggauss(n)
    for _ in range(2):
        p0, p1 = np.ones_like(x), x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        x = x - p1 / dp
    p0, p1 = np.ones_like(x), x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return x, w


def _legendre_tables(lmax: int, cos_t: np.ndarray, sin_t: np.ndarray):
    """Normalized associated Legendre functions and their theta-derivatives.

    Returns arrays of shape ``(n_theta, lmax + 1, lmax + 1)`` indexed
    ``[node, l, m]`` that already include the sqrt(2) factor for m > 0:
    the basis values, d/dtheta of them, and m/sin(theta) times them.
    """
    nt = cos_t.size
    p = np.zeros((nt, lmax + 1, lmax + 1))
    p[:, 0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, lmax + 1):
        p[:, m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * sin_t * p[:, m - 1, m - 1]
    for m in range(0, lmax):
        p[:, m + 1, m] = math.sqrt(2 * m + 3) * cos_t * p[:, m, m]
    for m in range(0, lmax + 1):
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            p[:, l, m] = a * (cos_t * p[:, l - 1, m] - b * p[:, l - 2, m])

    # dP_lm/dt = (sqrt((l+m)(l-m+1)) P_{l,m-1} - sqrt((l-m)(l+m+1)) P_{l,m+1}) / 2,
    # with P_{l,-1} = -P_{l,1}; no division by sin(t), so no cancellation near the poles
    dp = np.zeros_like(p)
    for l in range(1, lmax + 1):
        m = np.arange(0, l + 1)
        up = np.sqrt((l - m) * (l + m + 1.0))
        down = np.sqrt((l + m) * (l - m + 1.0))
        nxt = np.zeros((nt, l + 1))
        nxt[:, :l] = p[:, l, 1 : l + 1]
        prev = np.empty((nt, l + 1))
        prev[:, 0] = -p[:, l, 1]
        prev[:, 1:] = p[:, l, :l]
        dp[:, l, : l + 1] = 0.5 * (down * prev - up * nxt)

    ms = np.arange(lmax + 1)
    pm = p * ms[None, None, :] / sin_t[:, None, None]

    fac = np.full(lmax + 1, math.sqrt(2.0))
    fac[0] = 1.0
    return p * fac, dp * fac, pm * fac


NOISE_LEVEL = 4e-16


class SphereGrid:
    """Gauss-Legendre x uniform-longitude grid for fields of bandlimit ``L``.

    ``n_theta`` defaults to ceil(3L/2) + 1 and ``n_phi`` to 2*n_theta - 1, so
    the grid resolves degree ``lmax`` = n_theta - 1 exactly; ``L`` is the
    degree kept for state fields, ``lmax`` is used for derived quantities.
    Instances are immutable by convention and shared through :func:`get_grid`.
    """

    def __init__(self, bandlimit: int, n_theta: int | None = None, n_phi: int | None = None):
        if bandlimit < 1:
            raise ValueError(f"bandlimit must be >= 1, got {bandlimit}")
        L = int(bandlimit)
        nt_min = math.ceil(1.5 * L) + 1
        n_theta = nt_min if n_theta is None else int(n_theta)
        if n_theta < nt_min:
            raise ValueError(f"n_theta={n_theta} below ceil(3L/2)+1={nt_min}")
        n_phi = max(2 * n_theta - 1, 3 * L + 1) if n_phi is None else int(n_phi)
        if n_phi < 3 * L + 1:
            raise ValueError(f"n_phi={n_phi} below 3L+1={3 * L + 1}")
        self.L = L
        self.n_theta = n_theta
        self.n_phi = n_phi
        self.lmax = min(n_theta - 1, (n_phi - 1) // 2)

        x, w = gauss_legendre(n_theta)
        # colatitude ascending: cos decreasing
        order = np.argsort(-x)
        self.cos_theta = x[order]
        self.theta = np.arccos(self.cos_theta)
        self.sin_theta = np.sqrt(1.0 - self.cos_theta**2)
        self.gl_weights = w[order]
        self.phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
        self.weights = np.outer(self.gl_weights, np.full(n_phi, 2.0 * math.pi / n_phi))

        self._p, self._dp, self._pm = _legendre_tables(self.lmax, self.cos_theta, self.sin_theta)

        st = self.sin_theta[:, None]
        ct = self.cos_theta[:, None]
        cp, sp = np.cos(self.phi)[None, :], np.sin(self.phi)[None, :]
        ones = np.ones((n_theta, n_phi))
        self.x = np.stack([st * cp, st * sp, ct * ones])
        self.e_theta = np.stack([ct * cp, ct * sp, -st * ones])
        self.e_phi = np.stack([-sp * ones, cp * ones, 0.0 * ones])
        # tangential projector P = I - x x^T, the round metric in Cartesian form
        self.proj = np.eye(3)[:, :, None, None] - self.x[:, None] * self.x[None, :]
        for arr in (self.cos_theta, self.theta, self.sin_theta, self.gl_weights, self.phi,
                    self.weights, self._p, self._dp, self._pm, self.x, self.e_theta,
                    self.e_phi, self.proj):
            arr.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    def __repr__(self) -> str:
        return f"SphereGrid(L={self.L}, n_theta={self.n_theta}, n_phi={self.n_phi})"

    # ------------------------------------------------------------------ transforms

    def _check(self, values: np.ndarray) -> None:
        if values.shape[-2:] != self.shape:
            raise ValueError(f"field shape {values.shape[-2:]} does not match grid {self.shape}")

    def analysis(self, values: np.ndarray, lmax: int | None = None) -> np.ndarray:
        """Grid values -> real spherical-harmonic coefficients up to ``lmax`` (default L)."""
        self._check(values)
        lmax = self.L if lmax is None else int(lmax)
        if lmax > self.lmax:
            raise ValueError(f"lmax={lmax} exceeds grid resolution {self.lmax}")
        F = np.fft.rfft(values, axis=-1)[..., : lmax + 1]
        scale = 2.0 * math.pi / self.n_phi
        gc = scale * F.real
        gs = -scale * F.imag
        p = self._p[:, : lmax + 1, : lmax + 1]
        wp = self.gl_weights[:, None, None] * p
        out = np.empty(values.shape[:-2] + (2, lmax + 1, lmax + 1))
        out[..., 0, :, :] = np.einsum("tlm,...tm->...lm", wp, gc)
        out[..., 1, :, :] = np.einsum("tlm,...tm->...lm", wp, gs)
        out[..., 1, :, 0] = 0.0
        return out

    def _synth_from(self, table: np.ndarray, cc: np.ndarray, cs: np.ndarray) -> np.ndarray:
        lmax = cc.shape[-1] - 1
        t = table[:, : lmax + 1, : lmax + 1]
        C = np.einsum("tlm,...lm->...tm", t, cc)
        S = np.einsum("tlm,...lm->...tm", t, cs)
        n = self.n_phi
        X = np.zeros(C.shape[:-1] + (n // 2 + 1,), dtype=complex)
        X[..., : lmax + 1] = 0.5 * n * (C - 1j * S)
        X[..., 0] = n * C[..., 0]
        return np.fft.irfft(X, n=n, axis=-1)

    def synthesis(self, coeffs: np.ndarray) -> np.ndarray:
        """Real spherical-harmonic coefficients -> grid values."""
        lmax = coeffs.shape[-1] - 1
        if lmax > self.lmax:
            raise ValueError(f"coefficients of degree {lmax} exceed grid resolution {self.lmax}")
        return self._synth_from(self._p, coeffs[..., 0, :, :], coeffs[..., 1, :, :])

    def truncate(self, values: np.ndarray, lmax: int | None = None) -> np.ndarray:
        """Project grid values onto degrees <= lmax (default L)."""
        return self.synthesis(self.analysis(values, lmax))

    # ------------------------------------------------------------------ calculus

    def _deriv_coeffs(self, values: np.ndarray, lmax: int | None) -> np.ndarray:
        """Coefficients used for differentiation.

        With the native default, trailing degree shells that sit at the
        quadrature round-off level are zeroed: derivatives would only amplify
        that noise (by ~l per derivative) without adding information.
        """
        if lmax is not None:
            return self.analysis(self._demean(values), lmax)
        c = self.analysis(self._demean(values), self.lmax)
        scale = np.max(np.abs(values), axis=(-2, -1), keepdims=True)[..., None]
        shells = np.sqrt(np.sum(c * c, axis=(-3, -1)))  # (..., lmax+1)
        l = np.arange(self.lmax + 1)
        noise = NOISE_LEVEL * np.sqrt(2 * l + 1) * scale[..., 0, 0]
        above = shells > noise
        # last degree above the noise floor, per batch entry, then the max over the batch
        last = np.where(above.any(axis=-1), self.lmax - np.argmax(above[..., ::-1], axis=-1), 0)
        cut = int(np.max(last)) if np.ndim(last) else int(last)
        if cut < self.lmax:
            c[..., cut + 1 :, :] = 0.0
        return c

    def _demean(self, values: np.ndarray) -> np.ndarray:
        # derivatives ignore constants; removing the mean shrinks quadrature round-off
        mean = self.integrate(values) / (4.0 * math.pi)
        return values - np.asarray(mean)[..., None, None]

    def integrate(self, values: np.ndarray) -> np.ndarray | float:
        """Quadrature of int f dmu_hat over the trailing grid axes."""
        self._check(values)
        return np.einsum("...tp,tp->...", values, self.weights)

    def grad_frame(self, values: np.ndarray, lmax: int | None = None) -> np.ndarray:
        """Gradient components (d_theta f, d_phi f / sin theta) in the orthonormal frame."""
        return self.grad_frame_coeffs(self._deriv_coeffs(values, lmax))

    def grad_frame_coeffs(self, c: np.ndarray) -> np.ndarray:
        cc, cs = c[..., 0, :, :], c[..., 1, :, :]
        ft = self._synth_from(self._dp, cc, cs)
        fp = self._synth_from(self._pm, cs, -cc)
        return np.stack([ft, fp], axis=-3)

    def frame_to_cart(self, comps: np.ndarray) -> np.ndarray:
        """(e_theta, e_phi) components, axis -3 of length 2 -> Cartesian vector."""
        ft = comps[..., 0, :, :]
        fp = comps[..., 1, :, :]
        return ft[..., None, :, :] * self.e_theta + fp[..., None, :, :] * self.e_phi

    def cart_to_frame(self, vec: np.ndarray) -> np.ndarray:
        """Cartesian vector (axis -3 of length 3) -> (e_theta, e_phi) components."""
        return np.stack([np.einsum("...aij,aij->...ij", vec, self.e_theta),
                         np.einsum("...aij,aij->...ij", vec, self.e_phi)], axis=-3)

    def cgrad(self, values: np.ndarray, lmax: int | None = None) -> np.ndarray:
        """Tangential gradient of a scalar field as a Cartesian vector field.

        Leading axes of ``values`` are treated as a batch; the new vector index
        is inserted just before the grid axes.
        """
        return self.frame_to_cart(self.grad_frame(values, lmax))

    def cgrad_coeffs(self, c: np.ndarray) -> np.ndarray:
        return self.frame_to_cart(self.grad_frame_coeffs(c))

    def laplace_coeffs(self, c: np.ndarray) -> np.ndarray:
        l = np.arange(c.shape[-1])
        return c * (-(l * (l + 1)))[:, None]

    def laplace(self, values: np.ndarray, lmax: int | None = None) -> np.ndarray:
        """Round Laplacian via the spectral multiplier -l(l+1)."""
        return self.synthesis(self.laplace_coeffs(self._deriv_coeffs(values, lmax)))

    def project(self, T: np.ndarray, k: int) -> np.ndarray:
        """Apply the tangential projector to each of the first ``k`` indices."""
        for i in range(k):
            T = _contract_index(self.proj, T, i)
        return T

    def covd(self, T: np.ndarray, k: int, lmax: int | None = None) -> np.ndarray:
        """Round covariant derivative of a tangent k-tensor (Cartesian storage).

        Output has the derivative index first: ``(3, 3**k..., nt, np)``.
        ``lmax`` bounds the degree used for the Cartesian components; leave it
        at the native default unless the components are known band-limited.
        """
        D = self.cgrad(T, lmax)  # (..k indices.., 3, nt, np)
        D = np.moveaxis(D, k, 0)
        for i in range(1, k + 1):
            D = _contract_index(self.proj, D, i)
        return D

    def hess(self, values: np.ndarray, lmax: int | None = None) -> np.ndarray:
        """Round covariant Hessian as a Cartesian tangent 2-tensor.

        For a field of degree <= n pass ``lmax=n``; the gradient components
        then have degree <= n + 1 and both stages stay exact.
        """
        inner = None if lmax is None else min(lmax + 1, self.lmax)
        return self.covd(self.cgrad(values, lmax), 1, inner)

    def hess_frame(self, values: np.ndarray, lmax: int | None = None) -> np.ndarray:
        """Round Hessian in the orthonormal frame, shape (2, 2, nt, np)."""
        H = self.hess(values, lmax)
        return tensor_to_frame(self, H, 2)

    # ------------------------------------------------------------------ helpers

    def ylm(self, l: int, m: int) -> np.ndarray:
        """Real orthonormal harmonic Y_lm on the grid (m < 0 selects the sine family)."""
        if abs(m) > l or l > self.lmax:
            raise ValueError(f"invalid harmonic ({l}, {m}) for lmax={self.lmax}")
        c = np.zeros((2, l + 1, l + 1))
        c[0 if m >= 0 else 1, l, abs(m)] = 1.0
        return self.synthesis(c)

    def random_field(self, rng: np.random.Generator, degree: int, amplitude: float = 1.0,
                     decay: float = 0.0) -> np.ndarray:
        """Random band-limited field with coefficients ~ N(0, (1 + l)^-decay)."""
        c = rng.standard_normal((2, degree + 1, degree + 1))
        l = np.arange(degree + 1)
        c *= ((1.0 + l) ** (-decay))[:, None]
        c[:, np.triu_indices(degree + 1, 1)[0], np.triu_indices(degree + 1, 1)[1]] = 0.0
        c[1, :, 0] = 0.0
        return amplitude * self.synthesis(c)

    def evaluate(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate a coefficient array at arbitrary unit vectors ``points`` (3, ...)."""
        lmax = coeffs.shape[-1] - 1
        z = np.clip(points[2], -1.0, 1.0)
        s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = np.arctan2(points[1], points[0])
        flat_z, flat_s, flat_p = z.ravel(), s.ravel(), phi.ravel()
        p, _, _ = _legendre_tables(lmax, flat_z, np.where(flat_s > 0, flat_s, 1.0))
        m = np.arange(lmax + 1)
        cos_m = np.cos(np.outer(flat_p, m))
        sin_m = np.sin(np.outer(flat_p, m))
        vals = (np.einsum("nlm,lm,nm->n", p, coeffs[0], cos_m)
                + np.einsum("nlm,lm,nm->n", p, coeffs[1], sin_m))
        return vals.reshape(z.shape)


@functools.lru_cache(maxsize=16)
def get_grid(bandlimit: int) -> SphereGrid:
    return SphereGrid(bandlimit)


def _contract_index(M: np.ndarray, T: np.ndarray, i: int) -> np.ndarray:
    """Contract pointwise matrix M[A, z] with tensor index ``i`` of T."""
    Ti = np.moveaxis(T, i, 0)
    out = np.einsum("Azij,z...ij->A...ij", M, Ti)
    return np.moveaxis(out, 0, i)


def tensor_to_frame(grid: SphereGrid, T: np.ndarray, k: int) -> np.ndarray:
    """Cartesian tangent k-tensor -> components in the (e_theta, e_phi) frame."""
    E = np.stack([grid.e_theta, grid.e_phi])
    for i in range(k):
        T = _contract_index(E, T, i)
    return T


def frame_to_tensor(grid: SphereGrid, F: np.ndarray, k: int) -> np.ndarray:
    """Components in the (e_theta, e_phi) frame -> Cartesian tangent k-tensor."""
    Et = np.stack([grid.e_theta, grid.e_phi]).swapaxes(0, 1)
    for i in range(k):
        F = _contract_index(Et, F, i)
    return F


# ---------------------------------------------------------------------- snapshots

SNAPSHOT_MAGIC = "# SPHEREFIELD 1"


def write_snapshot(path: str | Path, grid: SphereGrid, values: np.ndarray) -> None:
    """Write a scalar field in the plain-text snapshot format."""
    grid._check(values)
    lines = [
        SNAPSHOT_MAGIC,
        f"# bandlimit: {grid.L}",
        f"# ntheta: {grid.n_theta}",
        f"# nphi: {grid.n_phi}",
        "# ordering: row-major, colatitude outer ascending, longitude inner from 0",
    ]
    lines.extend(f"{v:.17g}" for v in np.asarray(values, dtype=float).ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path: str | Path) -> tuple[SphereGrid, np.ndarray]:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a SPHEREFIELD snapshot")
    header = {}
    body = []
    for line in text[1:]:
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            header[key.strip()] = val.strip()
        elif line.strip():
            body.append(float(line))
    L, nt, nph = int(header["bandlimit"]), int(header["ntheta"]), int(header["nphi"])
    grid = get_grid(L) if (nt, nph) == get_grid(L).shape else SphereGrid(L, nt, nph)
    values = np.array(body)
    if values.size != nt * nph:
        raise ValueError(f"{path}: expected {nt * nph} values, found {values.size}")
    return grid, values.reshape(nt, nph)
