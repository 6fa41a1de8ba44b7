"""Polynomial stochastic operators on the probability simplex.

Exact deciders for absorbing sets, orthogonality preservation and
surjectivity, with a numerical preimage oracle for cross-checking.
"""

from .hypermatrix import (StochasticHypermatrix, from_cso, from_entries, from_qso, lift_order, loads,
                          random_hypermatrix)
from .oracle import m2_polynomial_check, probe_injectivity, sample_surjectivity, solve_preimage
from .pso import Pso, check_bb_factorization, facet_image_check
from .structure import (absorbing_equivalence_check, all_small_subsets_absorbing, decide_surjectivity,
                        facet_preimage_condition, is_absorbing, is_orthogonal_preserving, vertex_map)

__version__ = "0.1.0"
