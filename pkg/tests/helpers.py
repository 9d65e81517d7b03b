"""Shared builders for randomized circuits and targets."""
from __future__ import annotations

import math

import numpy as np
from scipy.stats import unitary_group

from gsg.circuit import BeamSplitter, CircuitProgram, Displace, MZI, PhaseShift, Squeezer
from gsg.compiler import GaussianTarget


def random_circuit(rng: np.random.Generator, n_modes: int, r_max: float = 0.8,
                   eta_max: float = 0.05, alpha_max: float = 1.0) -> CircuitProgram:
    """Squeezers first, then a shuffled mix of phases, weak couplers and displacements."""
    els = [Squeezer(float(rng.uniform(0, r_max)), float(rng.uniform(0, math.pi)), m) for m in range(n_modes)]
    body = []
    for m in range(n_modes):
        body.append(PhaseShift(float(rng.uniform(-math.pi, math.pi)), m))
        mag, ph = rng.uniform(0, alpha_max), rng.uniform(-math.pi, math.pi)
        body.append(Displace(complex(mag * np.exp(1j * ph)), m))
    for _ in range(n_modes - 1 if n_modes > 1 else 0):
        j = int(rng.integers(0, n_modes - 1))
        eta = float(rng.uniform(0, eta_max))
        if rng.random() < 0.5:
            body.append(BeamSplitter(eta, (j, j + 1)))
        else:
            body.append(MZI(2 * math.asin(math.sqrt(eta)), float(rng.uniform(-math.pi, math.pi)), (j, j + 1)))
    order = rng.permutation(len(body))
    return CircuitProgram(n_modes, tuple(els) + tuple(body[i] for i in order))


def random_target(rng: np.random.Generator, n_modes: int, r_max: float = 1.0,
                  alpha_max: float = 1.0) -> GaussianTarget:
    r = rng.uniform(0, r_max, n_modes)
    zeta = unitary_group.rvs(n_modes, random_state=rng) if n_modes > 1 else np.exp(1j * rng.uniform(0, 2 * np.pi)) * np.eye(1)
    mag = rng.uniform(0, alpha_max, n_modes)
    alpha = mag * np.exp(1j * rng.uniform(-np.pi, np.pi, n_modes))
    return GaussianTarget(alpha, zeta, r)
