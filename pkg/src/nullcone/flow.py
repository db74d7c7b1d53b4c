"""Area-preserving null mean curvature flow d omega/dt = -(omega/4)(H2 - mean H2).

The state is the coefficient array of omega truncated to the grid bandlimit L.
Right-hand sides are evaluated by a dedicated degree-L kernel (four batched
syntheses and one analysis) because the generic CrossSection path works at the
native resolution and is several times slower.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .background import BackgroundModel
from .boost import boost_vector, z_vector
from .geometry import CrossSection
from .sphere import SphereGrid


class FlowError(RuntimeError):
    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class FlowConfig:
    cfl: float = 0.5
    tol: float = 1e-10
    max_steps: int = 100_000
    max_time: float = math.inf
    snapshot_every: int = 0
    record_every: int = 100
    seed: int = 0
    max_halvings: int = 10

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_steps < 0 or self.record_every < 1 or self.snapshot_every < 0:
            raise ValueError("max_steps, record_every and snapshot_every must be non-negative (record_every >= 1)")
        if not self.max_time > 0:
            raise ValueError(f"max_time must be positive, got {self.max_time}")


SERIES_COLUMNS = ("step", "t", "area", "rho", "H2_mean", "l2_dev", "sup_dev",
                  "a_x", "a_y", "a_z", "acirc_s4", "grad_acirc_s5")


@dataclass
class FlowRun:
    rows: list = field(default_factory=list)
    sigma: CrossSection | None = None
    reason: str = ""
    steps: int = 0
    t: float = 0.0
    wall: float = 0.0
    snapshots: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    @property
    def converged(self) -> bool:
        return self.reason == "tolerance"

    def summary(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("rows", "sigma", "snapshots")}
        d["n_rows"] = len(self.rows)
        return d


class _Kernel:
    """H2 and the flow right-hand side on degree-L coefficient arrays."""

    def __init__(self, grid: SphereGrid, model: BackgroundModel):
        self.grid = grid
        self.model = model
        L = grid.L
        self.L = L
        sl = (slice(None), slice(0, L + 1), slice(0, L + 1))
        p, dp, pm = grid._p[sl], grid._dp[sl], grid._pm[sl]
        # batched-matmul layouts: (4, m, nt, l) for synthesis, (m, l, nt) for analysis
        self.tables = np.ascontiguousarray(np.stack([p, p, dp, pm]).transpose(0, 3, 1, 2))
        self.wp = np.ascontiguousarray((grid.gl_weights[:, None, None] * p).transpose(2, 1, 0))
        l = np.arange(L + 1)
        self.lap = (-(l * (l + 1.0)))[:, None]
        self.weights = grid.weights
        self.n = grid.n_phi
        # longitude transforms as dense products: only L+1 modes are needed and n_phi is often prime
        mphi = np.outer(np.arange(L + 1), grid.phi)
        self.cos = np.cos(mphi)
        self.sin = np.sin(mphi)
        self.cosT = np.ascontiguousarray(self.cos.T) * (2.0 * math.pi / self.n)
        self.sinT = np.ascontiguousarray(self.sin.T) * (2.0 * math.pi / self.n)

    def _synth4(self, c: np.ndarray) -> np.ndarray:
        cc, cs = c[0], c[1]
        lc, ls = self.lap * cc, self.lap * cs
        C = np.stack([cc, lc, cc, cs])
        S = np.stack([cs, ls, cs, -cc])
        # contiguous operands keep matmul on the BLAS path
        CS = np.ascontiguousarray(np.stack([C, S], axis=-1).transpose(0, 2, 1, 3))  # (4, m, l, 2)
        R = self.tables @ CS                                                         # (4, m, nt, 2)
        Ct = np.ascontiguousarray(R[..., 0].transpose(0, 2, 1)).reshape(-1, self.L + 1)
        St = np.ascontiguousarray(R[..., 1].transpose(0, 2, 1)).reshape(-1, self.L + 1)
        return (Ct @ self.cos + St @ self.sin).reshape(4, -1, self.n)

    def analysis(self, values: np.ndarray) -> np.ndarray:
        G = np.ascontiguousarray(
            np.stack([values @ self.cosT, values @ self.sinT], axis=-1).transpose(1, 0, 2))  # (m, nt, 2)
        R = self.wp @ G                                                                   # (m, l, 2)
        out = np.ascontiguousarray(R.transpose(2, 1, 0))
        out[1, :, 0] = 0.0
        return out

    def fields(self, c: np.ndarray):
        w, lapw, wt, wp = self._synth4(c)
        h = self.model.h_eval(w)[0] if not self.model.is_flat else 1.0
        H2 = 4.0 * h / w**2 - 4.0 * lapw / w**3 + 4.0 * (wt * wt + wp * wp) / w**4
        return w, H2

    def rhs(self, c: np.ndarray):
        """Returns (rhs coefficients, omega values, H2 values, area-weighted mean)."""
        w, H2 = self.fields(c)
        w2 = w * w
        mean = float(np.sum(H2 * w2 * self.weights) / np.sum(w2 * self.weights))
        return self.analysis(-0.25 * w * (H2 - mean)), w, H2, mean

    def l2_dev(self, w, H2, mean) -> float:
        d = H2 - mean
        return math.sqrt(float(np.sum(d * d * w * w * self.weights)))


def flow_rhs(sigma: CrossSection) -> np.ndarray:
    """-(omega/4)(H2 - mean H2), the mean taken with the area weight omega^2, projected to degree L."""
    g = sigma.grid
    return g.truncate(-0.25 * sigma.omega * (sigma.H2 - sigma.H2_mean), g.L)


def max_stable_dt(grid: SphereGrid, omega: np.ndarray, cfl: float) -> float:
    return cfl * float(np.min(omega)) ** 2 / (grid.L * (grid.L + 1))


def _rk4(kernel: _Kernel, c: np.ndarray, dt: float, k1=None) -> np.ndarray:
    if k1 is None:
        k1 = kernel.rhs(c)[0]
    k2 = kernel.rhs(c + 0.5 * dt * k1)[0]
    k3 = kernel.rhs(c + 0.5 * dt * k2)[0]
    k4 = kernel.rhs(c + dt * k3)[0]
    return c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(sigma: CrossSection, dt: float, cfl: float = 1.0) -> CrossSection:
    """One classical RK4 step of the flow; raises if dt exceeds the diffusive bound or positivity fails."""
    g = sigma.grid
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    if dt == 0:
        return sigma
    bound = max_stable_dt(g, sigma.omega, cfl)
    if dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt:.6g} exceeds the stability bound {bound:.6g}")
    kern = _Kernel(g, sigma.model)
    c = _rk4(kern, g.analysis(sigma.omega, g.L), dt)
    w = g.synthesis(c)
    if not np.all(np.isfinite(w)) or w.min() <= sigma.model.rmin:
        raise FlowError("positivity violated; reduce dt", state=sigma)
    return CrossSection(g, w, sigma.model, degree=g.L)


def monitor_row(sigma: CrossSection, step_no: int, t: float, scale: float) -> dict:
    """Series row with the quantities tracked along the flow; ``scale`` is the sigma used for the A_circ weights."""
    g = sigma.grid
    H2 = sigma.H2
    mean = sigma.H2_mean
    d = H2 - mean
    try:
        a = boost_vector(z_vector(g, sigma.omega))
    except ValueError:
        a = np.full(3, np.nan)
    Ac = sigma.A_circ
    acirc = float(np.max(sigma.norm(Ac, 2)))
    grad_acirc = float(np.max(sigma.norm(sigma.covd(Ac, 2, min(2 * g.L, g.lmax)), 3)))
    return {
        "step": step_no, "t": t, "area": sigma.area, "rho": sigma.rho, "H2_mean": mean,
        "l2_dev": math.sqrt(sigma.integrate(d * d)), "sup_dev": float(np.max(np.abs(d))),
        "a_x": float(a[0]), "a_y": float(a[1]), "a_z": float(a[2]),
        "acirc_s4": scale**4 * acirc, "grad_acirc_s5": scale**5 * grad_acirc,
    }


def run_flow(sigma0: CrossSection, cfg: FlowConfig | None = None, scale: float | None = None,
             on_snapshot=None) -> FlowRun:
    """Integrate the flow until the relative L2 deviation of H2 drops below ``cfg.tol``.

    Termination reasons: ``tolerance``, ``max_steps``, ``max_time`` or
    ``step_failure`` (last valid state kept in ``run.sigma``).  ``on_snapshot``
    receives (index, step, t, omega) every ``cfg.snapshot_every`` steps.
    """
    cfg = cfg or FlowConfig()
    g = sigma0.grid
    model = sigma0.model
    kern = _Kernel(g, model)
    scale = sigma0.rho if scale is None else float(scale)
    c = g.analysis(sigma0.omega, g.L)
    run = FlowRun()
    t0 = time.perf_counter()
    t = 0.0
    n = 0
    n_snap = 0

    def snapshot(w):
        nonlocal n_snap
        run.snapshots.append((n, t))
        if on_snapshot is not None:
            on_snapshot(n_snap, n, t, w)
        n_snap += 1

    def record(cur):
        run.rows.append(monitor_row(CrossSection(g, g.synthesis(cur), model, degree=g.L), n, t, scale))

    record(c)
    if cfg.snapshot_every:
        snapshot(g.synthesis(c))
    while True:
        k1, w, H2, mean = kern.rhs(c)
        rel = kern.l2_dev(w, H2, mean) / abs(mean)
        if rel <= cfg.tol:
            run.reason = "tolerance"
            break
        if n >= cfg.max_steps:
            run.reason = "max_steps"
            break
        if t >= cfg.max_time:
            run.reason = "max_time"
            break
        dt = min(max_stable_dt(g, w, cfg.cfl), cfg.max_time - t)
        for _ in range(cfg.max_halvings + 1):
            trial = _rk4(kern, c, dt, k1)
            wt = g.synthesis(trial)
            if np.all(np.isfinite(wt)) and wt.min() > model.rmin:
                break
            dt *= 0.5
        else:
            run.reason = "step_failure"
            break
        c = trial
        t += dt
        n += 1
        if n % cfg.record_every == 0:
            record(c)
        if cfg.snapshot_every and n % cfg.snapshot_every == 0:
            snapshot(wt)
    if run.rows[-1]["step"] != n:
        record(c)
    run.sigma = CrossSection(g, g.synthesis(c), model, degree=g.L)
    run.steps, run.t = n, t
    run.wall = time.perf_counter() - t0
    return run


def measure_decay(t, y, drop: float = 10.0, floor: float = 0.0, min_samples: int = 10) -> float:
    """Decay rate of a positive series from a least-squares fit of log y against t.

    The window starts once y has dropped by ``drop`` from y[0] and stops at the
    first sample at or below ``floor`` (a round-off plateau).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-d arrays of equal length")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("series must be positive and finite")
    start = int(np.argmax(y <= y[0] / drop)) if np.any(y <= y[0] / drop) else len(y)
    stop = len(y)
    if floor > 0 and np.any(y <= floor):
        stop = int(np.argmax(y <= floor))
    ts, ys = t[start:stop], y[start:stop]
    if ts.size < min_samples:
        raise ValueError(f"only {ts.size} samples in the post-transient window (need {min_samples})")
    slope = np.polyfit(ts, np.log(ys), 1)[0]
    return float(-slope)


def decay_series(run: FlowRun) -> tuple[np.ndarray, np.ndarray]:
    """(t, squared L2 deviation of H2) from a flow run."""
    return run.column("t"), run.column("l2_dev") ** 2
