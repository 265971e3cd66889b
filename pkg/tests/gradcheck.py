"""Central finite-difference oracle shared by the model and acceptance tests."""

import numpy as np

from interjection.model import cross_entropy, logits


def numeric_loss(params, x, y):
    return cross_entropy(logits(params, x), y)


def gradient_errors(params, x, y, grads, coords_per_array=20, h=1e-6, seed=0):
    """Relative errors |analytic - numeric| / max(|analytic| + |numeric|, 1e-12)."""
    rng = np.random.default_rng(seed)
    errors = []
    arrays = params.arrays()
    for a, g in zip(arrays, grads):
        for _ in range(coords_per_array):
            idx = tuple(rng.integers(0, s) for s in a.shape)
            old = a[idx]
            a[idx] = old + h
            up = numeric_loss(params, x, y)
            a[idx] = old - h
            down = numeric_loss(params, x, y)
            a[idx] = old
            num = (up - down) / (2 * h)
            errors.append(abs(g[idx] - num) / max(abs(g[idx]) + abs(num), 1e-12))
    return np.array(errors)
