"""Seeded synthetic outcome matrices.

Generative model, drawn in this order from ``numpy.random.default_rng(seed)``::

    base_i   ~ N(0, 1)        recipient level
    effect_j ~ N(0, 0.5^2)    treatment main effect
    x_i, z_j ~ N(0, 1)        latent recipient / treatment traits
    e_ij     ~ N(0, 1)        idiosyncratic match quality

    Y_ij = base_i + effect_j + h * (x_i * z_j + e_ij) / sqrt(2)

with ``h`` in [0, 1] the heterogeneity knob: 0 gives purely additive
outcomes, where every recipient ranks treatments identically, and 1 is the
maximum.  Values are rounded to six decimals, the precision written to CSV,
so a generated instance and its file agree.
"""

from __future__ import annotations

import numpy as np

from .model import DEFAULT_COST_SCALE, Allocation, ProblemInstance

DECIMALS = 6
MAX_HETEROGENEITY = 1.0


def generate_outcomes(n1: int, n2: int, heterogeneity: float = 1.0, seed: int = 0) -> np.ndarray:
    if n1 < 1 or n2 < 0:
        raise ValueError("need n1 >= 1 and n2 >= 0")
    if not 0.0 <= heterogeneity <= MAX_HETEROGENEITY:
        raise ValueError(f"heterogeneity must lie in [0, {MAX_HETEROGENEITY}]")
    rng = np.random.default_rng(seed)
    base = rng.normal(0.0, 1.0, n2)
    effect = rng.normal(0.0, 0.5, n1)
    x = rng.normal(0.0, 1.0, n2)
    z = rng.normal(0.0, 1.0, n1)
    e = rng.normal(0.0, 1.0, (n2, n1))
    y = base[:, None] + effect[None, :] + heterogeneity * (np.outer(x, z) + e) / np.sqrt(2.0)
    # round through the decimal text form so file and memory agree bit for bit
    return np.char.mod(f"%.{DECIMALS}f", y).astype(np.float64).reshape(n2, n1)


def generate_instance(n1: int, n2: int, capacity, heterogeneity: float = 1.0, seed: int = 0,
                      cost_scale: int = DEFAULT_COST_SCALE) -> ProblemInstance:
    caps = [capacity] * n1 if np.ndim(capacity) == 0 else list(capacity)
    return ProblemInstance(generate_outcomes(n1, n2, heterogeneity, seed), caps, cost_scale)


def random_allocation(instance: ProblemInstance, seed: int = 0) -> Allocation:
    """Uniformly shuffled capacity slots, one per recipient."""
    slots = np.repeat(np.arange(instance.n_treatments), instance.capacities)
    if len(slots) < instance.n_recipients:
        raise ValueError("instance is infeasible")
    rng = np.random.default_rng(seed)
    return Allocation(rng.permutation(slots)[: instance.n_recipients])
