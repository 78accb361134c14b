"""Seeded builders shared across test modules."""

import numpy as np

from sysid import model


def make_rng(seed):
    return np.random.default_rng(seed)


def random_stable_system(d, rho, seed, sigma=1.0):
    """A two-level-spectrum system with isotropic noise, fully seed-determined."""
    a = model.rand_bimod(d, rho, make_rng(seed))
    return model.make_system(a, sigma * np.eye(d))


def rotation_scaled(d, scale, seed):
    """scale * (random rotation): spectral norm == scale, rich orbits."""
    q, r = np.linalg.qr(make_rng(seed).standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return scale * q
