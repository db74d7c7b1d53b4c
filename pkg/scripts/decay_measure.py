"""Measure exponential decay rates of the flow for single-harmonic perturbations against 2(l(l+1)-2)/s^2 + 12m/s^3."""

from __future__ import annotations

from dataclasses import dataclass

from _args import parse_into
from nullcone.background import BackgroundModel
from nullcone.flow import FlowConfig, decay_series, measure_decay, run_flow
from nullcone.geometry import CrossSection
from nullcone.sphere import get_grid


@dataclass
class Decay:
    mass: float = 1.0
    bandlimit: int = 12
    sigma: float = 20.0
    max_degree: int = 3
    amplitude: float = 0.2
    record_every: int = 20


def main(cfg: Decay) -> None:
    model = BackgroundModel.schwarzschild(cfg.mass)
    g = get_grid(cfg.bandlimit)
    s = cfg.sigma
    print(f"{'l':>2} {'measured':>12} {'linearized':>12} {'rel':>9} {'steps':>7}")
    for l in range(1, cfg.max_degree + 1):
        s0 = CrossSection(g, s + cfg.amplitude * g.ylm(l, 0), model)
        run = run_flow(s0, FlowConfig(record_every=cfg.record_every))
        t, y = decay_series(run)
        rate = measure_decay(t, y, floor=1e-24 * y[0])
        oracle = 2.0 * (l * (l + 1) - 2) / s**2 + 12.0 * cfg.mass / s**3
        print(f"{l:>2} {rate:12.6g} {oracle:12.6g} {abs(rate / oracle - 1):9.2e} {run.steps:>7}")


if __name__ == "__main__":
    main(parse_into(Decay, __doc__))
