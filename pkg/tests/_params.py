"""Seeded generator of valid laboratory parameter sets around the experimental point."""
import numpy as np

from optoent.errors import OptoentError
from optoent.model import Channel, both_modes, filter_coefficients, hz, table_one


def random_params(rng: np.random.Generator, max_tries: int = 100):
    for _ in range(max_tries):
        p = table_one(
            m=7.71e-6 * 10 ** rng.uniform(-1, 1),
            Omega=hz(10 ** rng.uniform(-0.5, 1.5)),
            Gamma=hz(10 ** rng.uniform(-8, -4)),
            T=rng.uniform(1.0, 300.0),
            gamma_m=hz(10 ** rng.uniform(-3, -1)),
            kappa_minus=hz(1.64e6 * 10 ** rng.uniform(-0.5, 0.5)),
            zeta=rng.uniform(1.0, 30.0),
            delta_minus=rng.uniform(0.02, 1.0),
            g=hz(2.68e5 * 10 ** rng.uniform(-0.5, 0.5)),
            eta=rng.uniform(0.05, 1.0),
            N_th=0.0 if rng.random() < 0.5 else rng.uniform(0.0, 3.0),
        )
        try:
            for mode in both_modes(p):
                for ch in Channel:
                    filter_coefficients(mode, ch)
        except OptoentError:
            continue
        return p
    raise RuntimeError("could not draw a valid parameter set")


def random_param_sets(n: int, seed: int):
    rng = np.random.default_rng(seed)
    return [random_params(rng) for _ in range(n)]
