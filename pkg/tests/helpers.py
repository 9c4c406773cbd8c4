"""Shared model generators and oracles for the test suite."""
import numpy as np

from portvar.model import UtilityModel


def random_model(rng, n, d, scale=1.0):
    """Standard-normal cumulants and weights; zero draws are practically impossible."""
    return UtilityModel.from_arrays(scale * rng.standard_normal((n, d)), rng.standard_normal(d))


def match_multisets(a, b):
    """Greedy nearest matching; returns the largest matched max-norm distance or inf on size mismatch."""
    a = [np.asarray(p, dtype=complex) for p in a]
    b = [np.asarray(p, dtype=complex) for p in b]
    if len(a) != len(b):
        return np.inf
    worst, free = 0.0, list(range(len(b)))
    for p in a:
        dists = [np.max(np.abs(p - b[j])) for j in free]
        k = int(np.argmin(dists))
        worst = max(worst, dists[k])
        free.pop(k)
    return worst


def central_jacobian(f, x, h=1e-6):
    """Complex-step-free central differences along each real coordinate direction."""
    x = np.asarray(x, dtype=complex)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.column_stack(cols)


def quadratic_n2_d3(k, w):
    """Hand-expanded ``P_1(x) - P_2(1 - x) = A x^2 + B x + C`` for two assets, order three."""
    a0, a1, a2 = w[0] * k[0, 0], 2 * w[1] * k[0, 1], 3 * w[2] * k[0, 2]
    b0, b1, b2 = w[0] * k[1, 0], 2 * w[1] * k[1, 1], 3 * w[2] * k[1, 2]
    return a2 - b2, a1 + b1 + 2 * b2, a0 - b0 - b1 - b2
