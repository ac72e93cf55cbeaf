"""Random small instances shared by the engine tests and the acceptance run."""

import numpy as np

from arwlab.lattice import Box


def random_box(rng: np.random.Generator, d: int) -> Box:
    if d == 1:
        return Box((0,), (int(rng.integers(3, 65)),))
    return Box((0, 0), (int(rng.integers(3, 9)), int(rng.integers(3, 9))))


def random_particles(rng: np.random.Generator, box: Box, max_n: int = 12, sleepers: bool = True) -> list:
    """Sites in the box; with ``sleepers`` some lone sites start with a sleeping particle."""
    sites = box.sites()
    n = int(rng.integers(0, max_n + 1))
    out = [sites[int(i)] for i in rng.integers(0, len(sites), n)]
    if sleepers:
        free = [x for x in sites if x not in out]
        for i in rng.permutation(len(free))[: int(rng.integers(0, 3))]:
            out.append((free[int(i)], "s"))
    return out


def random_instance(seed: int, d: int):
    rng = np.random.default_rng(seed)
    box = random_box(rng, d)
    lam = float(rng.choice([0.2, 1.0, 4.0]))
    return box, random_particles(rng, box), lam
