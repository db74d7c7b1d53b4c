"""Spherically symmetric null-cone backgrounds.

The ambient metric along the cone is -h du^2 - 2 du dr + r^2 ghat with
h(r) = 1 - 2m/r + q(r).  The background null frame is ``n`` (the geodesic
generator d_r, written ul_L in the literature) and ``l = -2 d_u + h d_r``
(L_r), normalised so that g(n, l) = 2; sphere directions are coordinate
vectors whose ambient length is r times their round length.

Riemann convention: Rm(X, Y, W, Z) = g(R(X, Y) Z, W), so Rm(X, Y, X, Y) is the
sectional curvature of the X, Y plane times its area squared.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

SPHERE, NULL_N, NULL_L = "S", "n", "l"
_N_ALIASES = {"n", "ul_l", "ull", "ul_L", "ulL", "Lbar"}
_L_ALIASES = {"l", "L", "l_r", "L_r", "Lr"}

# canonical non-zero entries; values are functions of (r, h, h', h'')
_RM_CANON = {
    ("n", "l", "n", "l"): lambda r, h, h1, h2: 2.0 * h2,
    ("S", "n", "S", "l"): lambda r, h, h1, h2: -r * h1,
    ("S", "S", "S", "S"): lambda r, h, h1, h2: r * r * (1.0 - h),
}


def _symmetry_orbit(pattern: tuple[str, ...]) -> list[tuple[tuple[str, ...], int]]:
    """All slot-type patterns related to ``pattern`` by Riemann symmetries, with signs."""
    a, b, c, d = pattern
    return [
        ((a, b, c, d), 1), ((b, a, c, d), -1), ((a, b, d, c), -1), ((b, a, d, c), 1),
        ((c, d, a, b), 1), ((d, c, a, b), -1), ((c, d, b, a), -1), ((d, c, b, a), 1),
    ]


def _build_rm_store():
    store = {}
    for key, fn in _RM_CANON.items():
        for pat, sign in _symmetry_orbit(key):
            store.setdefault(pat, (key, sign))
    return store


_RM_STORE = _build_rm_store()


def _kappa(r, h, h1):
    return 1.0 - h + 0.5 * r * h1


# Derivative entries, keyed by (derivative slot, Rm slots...).  Structures:
#   "ggS": ghat_BD ghat_AC - ghat_AB ghat_CD over letters (A; B, C, D) or (A; B, C, D, .)
#   "g":   ghat between the two sphere letters
# The (S; S n n l) entry uses the value obtained by direct symbolic computation,
# which differs in the sign of r h'' from the printed table (see the decisions ledger).
_DRM_CANON = {
    ("S", "S", "S", "S", "l"): ("ggS", lambda r, h, h1, h2: -r * h * _kappa(r, h, h1)),
    ("S", "S", "S", "S", "n"): ("ggS", lambda r, h, h1, h2: -r * _kappa(r, h, h1)),
    ("S", "S", "n", "n", "l"): ("g", lambda r, h, h1, h2: h1 - r * h2),
    ("n", "S", "S", "S", "S"): ("ggS", lambda r, h, h1, h2: -2.0 * r * _kappa(r, h, h1)),
    ("n", "S", "n", "S", "l"): ("g", lambda r, h, h1, h2: h1 - r * h2),
}

# the same entry as printed in the literature table, kept for comparison reports
PRINTED_DRM_SNNL = lambda r, h, h1, h2: h1 + r * h2  # noqa: E731


def _build_drm_store():
    store = {}
    for key, (struct, fn) in _DRM_CANON.items():
        for pat, sign in _symmetry_orbit(key[1:]):
            store.setdefault((key[0],) + pat, (key, sign))
    return store


_DRM_STORE = _build_drm_store()


def parse_pattern(pattern, length: int) -> tuple[str, ...]:
    """Normalise a slot signature to the alphabet {S, n, l}."""
    if isinstance(pattern, str):
        pattern = pattern.replace(",", " ").split()
    out = []
    for tok in pattern:
        t = str(tok).strip()
        if t in _N_ALIASES:
            out.append(NULL_N)
        elif t in _L_ALIASES:
            out.append(NULL_L)
        elif t == "S" or (len(t) == 1 and t.isalpha() and t.isupper()):
            out.append(SPHERE)
        else:
            raise ValueError(f"malformed slot {tok!r} in pattern {pattern!r}")
    if len(out) != length:
        raise ValueError(f"pattern {pattern!r} must have {length} slots, got {len(out)}")
    return tuple(out)


@dataclass(frozen=True)
class BackgroundModel:
    """Mass ``m`` plus an inverse-square perturbation q(r) = q_coeff / r^2."""

    mass: float = 0.0
    q_coeff: float = 0.0
    kind: str = "schwarzschild"
    r_min: float | None = None
    _r_min: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError(f"mass must be >= 0, got {self.mass}")
        if self.kind not in ("minkowski", "schwarzschild", "generalized"):
            raise ValueError(f"unknown model type {self.kind!r}")
        if self.kind == "minkowski" and (self.mass != 0 or self.q_coeff != 0):
            raise ValueError("minkowski model has mass 0 and no perturbation")
        if self.kind == "schwarzschild" and self.q_coeff != 0:
            raise ValueError("schwarzschild model has no perturbation; use 'generalized'")
        # h > 0 iff r^2 - 2 m r + c > 0
        disc = self.mass**2 - self.q_coeff
        root = self.mass + math.sqrt(disc) if disc >= 0 else 0.0
        default = max(3.0 * self.mass, 1.5 * root, 1e-6)
        r_min = default if self.r_min is None else float(self.r_min)
        if r_min <= 0:
            raise ValueError(f"r_min must be positive, got {r_min}")
        if r_min <= root:
            raise ValueError(f"r_min={r_min} does not keep h positive (h vanishes at r={root})")
        object.__setattr__(self, "_r_min", r_min)

    @classmethod
    def minkowski(cls) -> BackgroundModel:
        return cls(0.0, 0.0, "minkowski")

    @classmethod
    def schwarzschild(cls, mass: float, r_min: float | None = None) -> BackgroundModel:
        return cls(float(mass), 0.0, "schwarzschild", r_min)

    @classmethod
    def generalized(cls, mass: float, q_coeff: float, r_min: float | None = None) -> BackgroundModel:
        return cls(float(mass), float(q_coeff), "generalized", r_min)

    @property
    def rmin(self) -> float:
        return self._r_min

    @property
    def is_flat(self) -> bool:
        return self.mass == 0 and self.q_coeff == 0

    def _check_r(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self._r_min):
            raise ValueError(f"radius {float(np.min(r))} below r_min={self._r_min}")
        return r

    # ------------------------------------------------------------------ profile

    def h_eval(self, r):
        """Return (h, h', h'') at ``r`` (scalar or array)."""
        r = self._check_r(r)
        m, c = self.mass, self.q_coeff
        h = 1.0 - 2.0 * m / r + c / r**2
        h1 = 2.0 * m / r**2 - 2.0 * c / r**3
        h2 = -4.0 * m / r**3 + 6.0 * c / r**4
        if r.ndim == 0:
            return float(h), float(h1), float(h2)
        return h, h1, h2

    def background_quantities(self, r):
        """(ul_theta_r, theta_r, H2_r) of the coordinate sphere of radius r."""
        h, _, _ = self.h_eval(r)
        ult = 2.0 / np.asarray(r, dtype=float)
        th = ult * h
        if np.ndim(r) == 0:
            ult, th = float(ult), float(th)
        return ult, th, ult * th

    # ------------------------------------------------------------------ tables

    def curvature_component(self, pattern, r):
        """Coefficient of the listed tensor structure for the slot signature.

        Structures: four sphere slots -> ghat_13 ghat_24 - ghat_14 ghat_23;
        two sphere slots -> ghat between them; none -> scalar.
        """
        pat = parse_pattern(pattern, 4)
        h, h1, h2 = self.h_eval(r)
        entry = _RM_STORE.get(pat)
        if entry is None:
            return 0.0 * h
        key, sign = entry
        return sign * _RM_CANON[key](np.asarray(r, dtype=float) if np.ndim(r) else float(r), h, h1, h2)

    def deriv_curvature_component(self, pattern, r):
        """Coefficient of a covariant-derivative entry (derivative slot first).

        The returned number multiplies the structure of the canonical entry
        with the sphere letters carried along through the symmetry used.
        """
        pat = parse_pattern(pattern, 5)
        h, h1, h2 = self.h_eval(r)
        entry = _DRM_STORE.get(pat)
        if entry is None:
            return 0.0 * h
        key, sign = entry
        rr = np.asarray(r, dtype=float) if np.ndim(r) else float(r)
        return sign * _DRM_CANON[key][1](rr, h, h1, h2)

    def riemann_tensor(self, r: np.ndarray, proj: np.ndarray) -> np.ndarray:
        """Ambient Riemann tensor in the 5-slot basis (3 Cartesian sphere slots, n, l).

        ``r`` is a radius field, ``proj`` the round tangential projector
        (3, 3, *shape).  Sphere slots act on Cartesian tangent vectors measured
        with the round metric.  Output shape (5, 5, 5, 5, *shape).
        """
        r = np.asarray(r, dtype=float)
        h, h1, h2 = self.h_eval(r)
        shape = r.shape
        R = np.zeros((5, 5, 5, 5) + shape)
        idx = {NULL_N: 3, NULL_L: 4}
        for pat in itertools.product((SPHERE, NULL_N, NULL_L), repeat=4):
            entry = _RM_STORE.get(pat)
            if entry is None:
                continue
            key, sign = entry
            coef = sign * _RM_CANON[key](r, h, h1, h2)
            sphere_slots = [i for i, t in enumerate(pat) if t == SPHERE]
            if len(sphere_slots) == 0:
                R[tuple(idx[t] for t in pat)] += coef
            elif len(sphere_slots) == 2:
                i, j = sphere_slots
                fixed = [k for k in range(4) if k not in sphere_slots]
                for a in range(3):
                    for b in range(3):
                        sl = [None] * 4
                        sl[i], sl[j] = a, b
                        for k in fixed:
                            sl[k] = idx[pat[k]]
                        R[tuple(sl)] += coef * proj[a, b]
            else:
                P = proj
                block = (np.einsum("ac...,bd...->abcd...", P, P)
                         - np.einsum("ad...,bc...->abcd...", P, P))
                R[:3, :3, :3, :3] += coef * block
        return R

    def inverse_metric(self, r: np.ndarray, proj: np.ndarray) -> np.ndarray:
        """Ambient inverse metric in the 5-slot basis (pseudo-inverse on sphere slots)."""
        r = np.asarray(r, dtype=float)
        G = np.zeros((5, 5) + r.shape)
        G[:3, :3] = proj / r**2
        G[3, 4] = G[4, 3] = 0.5
        return G

    def ricci_closed_forms(self, r):
        """In-model closed forms used as oracles: Ric(n, l), Ric(n, n), Rbar, Rm(n, l, n, l)."""
        h, h1, h2 = self.h_eval(r)
        return {
            "RicLL": -2.0 * h1 / r - h2,
            "Ric_ulul": 0.0 * h,
            "Rbar": 2.0 * (1.0 - h) / r**2 - 4.0 * h1 / r - h2,
            "RmLLLL": 2.0 * h2,
        }


def decay_order_estimate(radii, norms) -> float:
    """Least-squares slope of log ||T_r|| against log r."""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(norms, dtype=float)
    if r.size != v.size:
        raise ValueError("radii and norms must have equal length")
    if r.size < 3:
        raise ValueError(f"need at least 3 samples, got {r.size}")
    if np.any(v <= 0) or np.any(r <= 0):
        raise ValueError("radii and norms must be positive")
    slope, _ = np.polyfit(np.log(r), np.log(v), 1)
    return float(slope)


def model_from_dict(block: dict) -> BackgroundModel:
    """Model from a config block with keys type, mass, q_coeff, r_min (all optional)."""
    kind = block.get("type", "schwarzschild")
    mass = block.get("mass")
    mass = (0.0 if kind == "minkowski" else 1.0) if mass is None else float(mass)
    return BackgroundModel(mass, float(block.get("q_coeff", 0.0)), kind, block.get("r_min"))
