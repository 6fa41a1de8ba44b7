import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nlmarkov.hypermatrix import StochasticHypermatrix, from_entries  # noqa: E402
from nlmarkov.pso import Pso  # noqa: E402


def identity_lift():
    """m=2, l=2 lift of the identity map."""
    return from_entries(2, 2, {"1,1": [1, 0], "1,2": [0.5, 0.5], "2,2": [0, 1]})


def e2_counterexample():
    """m=3 QSO with vertex rows e_i and P_12 = e_3: vertex fixing but not OP."""
    e = np.eye(3)
    return from_entries(3, 2, {"1,1": e[0], "2,2": e[1], "3,3": e[2],
                               "1,2": e[2], "1,3": e[0], "2,3": e[1]})


def swap_operator(a=0.3):
    return from_entries(2, 2, {"1,1": [0, 1], "2,2": [1, 0], "1,2": [a, 1 - a]})


def vertex_row_grid(m, l):
    """Vertex-fixing operators whose other rows are vertices or the barycenter."""
    choices = [tuple(r) for r in np.eye(m)] + [tuple(np.full(m, 1 / m))]
    mus = list(itertools.combinations_with_replacement(range(1, m + 1), l))
    free = [mu for mu in mus if len(set(mu)) > 1]
    for pick in itertools.product(choices, repeat=len(free)):
        rows = dict(zip(free, pick))
        yield Pso(StochasticHypermatrix(m, l, [np.eye(m)[mu[0] - 1] if len(set(mu)) == 1 else rows[mu]
                                               for mu in mus]))


@pytest.fixture
def e1():
    return Pso(identity_lift())


@pytest.fixture
def e2():
    return Pso(e2_counterexample())


@pytest.fixture
def e3():
    return Pso(swap_operator())
