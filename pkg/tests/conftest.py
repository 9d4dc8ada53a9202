import numpy as np
import pytest

from tsa.instances import MNL, Instance, Tabular


@pytest.fixture
def unit_1x1():
    """One customer, one supplier, unit MNL weights: everything equals 1/4."""
    return Instance(1, 1, (MNL((1.0,)),), (MNL((1.0,)),))


def independent_model(probs):
    """Tabular model with phi(j, S) = p_j whenever j in S (independent demand)."""
    n = len(probs)
    assert sum(probs) <= 1.0 + 1e-12
    rows = {}
    for mask in range(1 << n):
        s = frozenset(j for j in range(n) if mask >> j & 1)
        p = {j: probs[j] for j in s if probs[j] > 0}
        rows[s] = (p, 1.0 - sum(p.values()))
    return Tabular(n, rows)


def low_value_instance(n, m, seed, alpha=0.7574):
    """Random MNL instance with every weight strictly below alpha."""
    rng = np.random.default_rng(seed)
    v = rng.random((n, m)) * (alpha * 0.95)
    w = rng.random((m, n)) * (alpha * 0.95)
    return Instance(n, m,
                    tuple(MNL(tuple(v[i])) for i in range(n)),
                    tuple(MNL(tuple(w[j])) for j in range(m)))
