import numpy as np
import pytest

from conftest import vertex_row_grid
from oracles import brute_force_op
from nlmarkov.hypermatrix import StochasticHypermatrix, from_entries, lift_order, random_hypermatrix
from nlmarkov.pso import Pso
from nlmarkov.simplex import nonempty_subsets
from nlmarkov.structure import (FacetViolation, Inapplicable, PairViolation, Reason, RowViolation,
                                StructureError, VertexViolation, absorbing_equivalence_check,
                                absorbing_sets, all_small_subsets_absorbing, decide_surjectivity,
                                facet_conditions, facet_preimage_condition, is_absorbing,
                                is_orthogonal_preserving, normalize, vertex_map)


def test_is_absorbing_unfolds_definition():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = random_hypermatrix(3, 2, "general", rng)
        rows = p.rows.copy()
        zero = rng.random((rows.shape[0], 3)) < 0.5
        rows[zero] = 0
        rows[rows.sum(axis=1) == 0, 0] = 1
        rows /= rows.sum(axis=1, keepdims=True)
        op = Pso(StochasticHypermatrix(3, 2, rows))
        expected = all(op.P.row(mu)[2] == 0 for mu in [(1, 1), (1, 2), (2, 2)])
        assert is_absorbing(op, {1, 2}) == expected


def test_absorbing_examples(e1, e2):
    assert all(is_absorbing(e1, a) for a in nonempty_subsets(2))
    assert not is_absorbing(e2, {1, 2})
    assert is_absorbing(e2, {1, 2, 3})
    assert is_absorbing(e2, {1, 3}) and is_absorbing(e2, {2, 3})
    assert absorbing_sets(e2) == [frozenset(s) for s in ({1}, {2}, {3}, {1, 3}, {2, 3}, {1, 2, 3})]
    with pytest.raises(StructureError):
        is_absorbing(e2, set())


def test_absorbing_sets_listing(e2):
    found = set(absorbing_sets(e2))
    assert found == {frozenset(a) for a in nonempty_subsets(3) if is_absorbing(e2, a)}
    assert frozenset({1, 2}) not in found


def test_absorbing_equivalence_examples(e1, e2):
    assert all(absorbing_equivalence_check(e1, a, 5, 0) for a in nonempty_subsets(2))
    assert absorbing_equivalence_check(e2, {1, 2}, 5, 0)
    assert not is_absorbing(e2, {1, 2})


@pytest.mark.parametrize("seed", range(10))
def test_absorbing_equivalence_op_structured(seed):
    op = Pso(random_hypermatrix(4, 2 + seed % 2, "op_structured", seed))
    for a in nonempty_subsets(4):
        assert is_absorbing(op, a)
        assert absorbing_equivalence_check(op, a, 3, seed)


def test_all_small_subsets_absorbing(e1, e2):
    assert all_small_subsets_absorbing(e1)
    check = all_small_subsets_absorbing(e2)
    assert not check
    assert check.certificate == RowViolation((1, 2), 3)
    assert check.certificate.replay(e2)


@pytest.mark.parametrize("seed", range(30))
def test_small_subsets_imply_all_absorbing(seed):
    rng = np.random.default_rng(seed)
    m, l = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    op = Pso(random_hypermatrix(m, l, "op_structured", rng))
    assert all_small_subsets_absorbing(op)
    assert all(is_absorbing(op, a) for a in nonempty_subsets(m))


def test_op_examples(e1, e2, e3):
    for method in ("combinatorial", "structural"):
        assert is_orthogonal_preserving(e1, method)
        assert not is_orthogonal_preserving(e2, method)
        assert is_orthogonal_preserving(e3, method)
    cert = is_orthogonal_preserving(e2).certificate
    assert isinstance(cert, PairViolation) and cert.replay(e2)
    # the {1,2} / {3} pair is one of the clashing pairs
    assert e2.image_support({1, 2}) & e2.image_support({3}) == {3}
    assert is_orthogonal_preserving(e3, "structural").permutation == (2, 1)
    with pytest.raises(ValueError):
        is_orthogonal_preserving(e1, "other")


def test_structural_inapplicable_without_permutation():
    p = from_entries(2, 2, {"1,1": [1, 0], "1,2": [1, 0], "2,2": [1, 0]})
    op = Pso(p)
    with pytest.raises(Inapplicable):
        is_orthogonal_preserving(op, "structural")
    assert not is_orthogonal_preserving(op, "combinatorial")
    vmap = vertex_map(op)
    assert vmap.permutation is None
    assert vmap.violation == VertexViolation(2, (1.0, 0.0), collides_with=1)


def test_vertex_map_requires_exact_vertices():
    p = from_entries(2, 1, {"1": [1 - 1e-9, 1e-9], "2": [0, 1]})
    vmap = vertex_map(Pso(p))
    assert vmap.permutation is None and vmap.violation.index == 1
    p = from_entries(2, 1, {"1": [1 - 1e-13, 1e-13], "2": [0, 1]})
    assert vertex_map(Pso(p)).permutation == (1, 2)


@pytest.mark.parametrize("m, l", [(2, 2), (2, 3), (3, 2)])
def test_deciders_agree_on_vertex_grid(m, l):
    for op in vertex_row_grid(m, l):
        comb = is_orthogonal_preserving(op, "combinatorial")
        assert comb.is_op == is_orthogonal_preserving(op, "structural").is_op
        assert comb.is_op == brute_force_op(op.P)


@pytest.mark.parametrize("seed", range(40))
def test_deciders_agree_on_random_operators(seed):
    rng = np.random.default_rng(seed)
    m, l = int(rng.integers(2, 5)), int(rng.integers(1, 4))
    mode = ["general", "vertex_fixing", "op_structured", "permuted_op"][seed % 4]
    op = Pso(random_hypermatrix(m, l, mode, rng))
    comb = is_orthogonal_preserving(op)
    assert comb.is_op == brute_force_op(op.P)
    if vertex_map(op).permutation is not None:
        assert comb.is_op == is_orthogonal_preserving(op, "structural").is_op
    if not comb:
        assert comb.certificate.replay(op)


def test_facet_condition_examples(e1, e2):
    assert facet_preimage_condition(e1, (1, 2), 1)
    assert facet_preimage_condition(e1, (1, 2), 2)
    assert facet_preimage_condition(e2, (1, 2, 3), 1)
    check = facet_preimage_condition(e2, (1, 2, 3), 2)
    assert not check
    assert check.certificate == FacetViolation(frozenset({1, 2}), frozenset({1, 2}),
                                               frozenset({1, 2, 3}))
    # no A' at all maps onto {1, 2}
    assert not any(e2.image_support(a) == {1, 2} for a in nonempty_subsets(3))
    with pytest.raises(StructureError):
        facet_preimage_condition(e2, None, 1)
    with pytest.raises(StructureError):
        facet_preimage_condition(e2, (1, 2, 3), 3)


def test_facet_condition_detects_wrong_image():
    e = np.eye(2)
    p = from_entries(2, 1, {"1": e[0], "2": e[0]})
    check = facet_preimage_condition(Pso(p), (1, 2), 1)
    assert not check and check.certificate.image == {1}


def test_facet_condition_detects_second_preimage():
    # U({1,2}) = {1,2} as required, but U({3}) = {1,2} as well
    p = lift_order(from_entries(3, 1, {"1": [1, 0, 0], "2": [0, 1, 0], "3": [0.5, 0.5, 0]}))
    op = Pso(p)
    assert facet_preimage_condition(op, (1, 2, 3), 1).holds is False
    check = facet_preimage_condition(op, (1, 2, 3), 2)
    assert not check
    cert = check.certificate
    assert cert.a == {1, 2} and cert.a_prime != cert.a and op.image_support(cert.a_prime) == {1, 2}


def test_decide_surjectivity_examples(e1, e2, e3):
    v = decide_surjectivity(e1)
    assert v.surjective and v.reason is Reason.STRUCTURAL_PASS and v.permutation == (1, 2)
    v = decide_surjectivity(e2)
    assert not v.surjective and v.reason is Reason.STRUCTURAL_FAIL
    assert v.certificate == RowViolation((1, 2), 3)
    assert decide_surjectivity(e3).surjective
    for a in (0.0, 0.7, 1.0):
        op = Pso(from_entries(2, 2, {"1,1": [1, 0], "2,2": [0, 1], "1,2": [a, 1 - a]}))
        assert decide_surjectivity(op).surjective


def test_decide_surjectivity_no_vertex_permutation():
    op = Pso(from_entries(2, 2, {"1,1": [0.5, 0.5], "1,2": [1, 0], "2,2": [0, 1]}))
    v = decide_surjectivity(op)
    assert not v and v.reason is Reason.NO_VERTEX_PERMUTATION
    assert v.certificate.index == 1


@pytest.mark.parametrize("seed", range(20))
def test_permuted_certificates_refer_to_original_labels(seed):
    rng = np.random.default_rng(seed)
    perm = tuple(int(i) for i in rng.permutation(3) + 1)
    p = random_hypermatrix(3, 2, "permuted_op", rng, permutation=perm)
    rows = p.rows.copy()
    rows[p.index_of((1, 2))] = np.full(3, 1 / 3)
    op = Pso(StochasticHypermatrix(3, 2, rows))
    v = decide_surjectivity(op)
    assert not v and v.permutation == perm
    assert v.certificate.replay(op, perm)


@pytest.mark.parametrize("seed", range(30))
def test_relabeling_invariance(seed):
    rng = np.random.default_rng(seed)
    m, l = int(rng.integers(2, 5)), int(rng.integers(1, 4))
    mode = ["vertex_fixing", "op_structured", "permuted_op"][seed % 3]
    op = Pso(random_hypermatrix(m, l, mode, rng))
    sigma = tuple(int(i) for i in rng.permutation(m) + 1)
    relabeled = Pso(op.P.relabel_outputs(sigma))
    assert decide_surjectivity(op).surjective == decide_surjectivity(relabeled).surjective
    assert is_orthogonal_preserving(op).is_op == is_orthogonal_preserving(relabeled).is_op


@pytest.mark.parametrize("seed", range(10))
def test_normalize_fixes_vertices(seed):
    p = random_hypermatrix(4, 2, "permuted_op", seed)
    op = Pso(p)
    norm = normalize(op, vertex_map(op).permutation)
    assert vertex_map(norm).permutation == (1, 2, 3, 4)
    assert all_small_subsets_absorbing(norm)


@pytest.mark.parametrize("seed", range(40))
def test_theorem_equivalence_random(seed):
    rng = np.random.default_rng(seed)
    m, l = int(rng.integers(2, 5)), int(rng.integers(2, 4))
    mode = ["vertex_fixing", "op_structured"][seed % 2]
    op = Pso(random_hypermatrix(m, l, mode, rng))
    surj = decide_surjectivity(op).surjective
    assert surj == is_orthogonal_preserving(op).is_op
    assert surj == all(facet_conditions(op, vertex_map(op).permutation))
