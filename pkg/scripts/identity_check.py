"""Evaluate the Gauss, Codazzi and Simon residuals on random surfaces at two bandlimits."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from _args import parse_into
from nullcone.background import BackgroundModel
from nullcone.geometry import CrossSection
from nullcone.identities import (codazzi_residual, gauss_residual, gauss_residual_closed, simon_full_residual,
                                 simon_residual)
from nullcone.sphere import get_grid


@dataclass
class IdentityCheck:
    mass: float = 1.0
    q_coeff: float = 0.0
    low: int = 24
    high: int = 48
    degree: int = 8
    center: float = 20.0
    spread: float = 4.9
    samples: int = 3
    seed: int = 0


def main(cfg: IdentityCheck) -> None:
    model = BackgroundModel.generalized(cfg.mass, cfg.q_coeff) if cfg.q_coeff else BackgroundModel.schwarzschild(cfg.mass)
    rng = np.random.default_rng(cfg.seed)
    print(f"{'sample':>6} {'L':>3} {'gauss':>9} {'gauss_amb':>9} {'codazzi':>9} {'cod_tr':>9} "
          f"{'simon':>9} {'simon_tr':>9} {'printed':>9} {'secs':>5}")
    for k in range(cfg.samples):
        state = rng.bit_generator.state
        for L in (cfg.low, cfg.high):
            rng.bit_generator.state = state
            g = get_grid(L)
            f = g.random_field(rng, cfg.degree, decay=1.0)
            w = cfg.center + cfg.spread * (f - f.mean()) / np.max(np.abs(f - f.mean()))
            t0 = time.perf_counter()
            s = CrossSection(g, w, model)
            cod = codazzi_residual(s)
            vals = [gauss_residual_closed(s), gauss_residual(s), *cod, simon_full_residual(s),
                    simon_residual(s, "contracted"), simon_residual(s, "contracted_printed")]
            print(f"{k:>6} {L:>3} " + " ".join(f"{r.relative:9.2e}" for r in vals)
                  + f" {time.perf_counter() - t0:5.2f}")


if __name__ == "__main__":
    main(parse_into(IdentityCheck, __doc__))
