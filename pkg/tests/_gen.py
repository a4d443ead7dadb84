"""Random instance families shared by the test modules."""
from fractions import Fraction

from ordnorm.model import ClusterInstance, LoadBalInstance


def lb_instance(rng, m_max=3, n_max=6, p_max=9, m_min=1, n_min=1):
    m = rng.randint(m_min, m_max)
    n = rng.randint(n_min, n_max)
    return LoadBalInstance([[rng.randint(0, p_max) for _ in range(n)] for _ in range(m)])


def metric_instance(rng, n_max=8, k_max=3, n_min=3, span=20):
    """Shortest-path-free metric: Manhattan distances between random grid points."""
    n = rng.randint(n_min, n_max)
    k = rng.randint(1, min(k_max, n))
    pts = [(rng.randint(0, span), rng.randint(0, span)) for _ in range(n)]
    c = [[abs(a[0] - b[0]) + abs(a[1] - b[1]) for b in pts] for a in pts]
    return ClusterInstance(c, k)


def weights(rng, d, top=5, positive_first=True):
    w = sorted((rng.randint(0, top) for _ in range(d)), reverse=True)
    if positive_first and w[0] == 0:
        w[0] = 1
    return tuple(Fraction(a) for a in w)


def rational_weights(rng, d, top=20, den=5):
    return tuple(sorted((Fraction(rng.randint(0, top), rng.randint(1, den)) for _ in range(d)), reverse=True))


def cost_vector(rng, n, top=20):
    return tuple(Fraction(rng.randint(0, top), rng.randint(1, 3)) for _ in range(n))
