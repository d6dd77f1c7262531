import random

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from refposets import reducts as rd
from refposets.errors import ContractError, PreconditionError
from refposets.reducts import OMEGA

U3 = (0, 1, 2, OMEGA)


@pytest.fixture(scope="module")
def M():
    return rd.RefModel.uniform(U3)


@pytest.fixture(scope="module")
def small():
    return rd.RefModel.uniform((0, 1, OMEGA))


def test_model_shape(M):
    assert M.size == 8
    assert M.depth(0) == 0 and M.depth(OMEGA) == 3
    assert M.relation(OMEGA) == frozenset((x, x) for x in range(8))
    assert len(M.relation(0)) == 64
    assert M.relation(2) < M.relation(1) < M.relation(0)


def test_model_round_trip(M):
    assert rd.RefModel.loads(M.dumps()) == M


def test_index_set_needs_both_ends():
    with pytest.raises(ContractError):
        rd.RefModel((1, OMEGA), (2,))


def test_set_round_trip(M):
    D = rd.e_strip(M, 1, 2)
    assert rd.DefinableSet.loads(D.dumps()) == D
    with pytest.raises(ContractError):
        rd.DefinableSet.loads("arity 2\n0 1 2\n")


@pytest.mark.parametrize("v,expected", [((0, 1, OMEGA), True), ((0, OMEGA), False)])
def test_invariance_matches_oracle(small, v, expected):
    D = rd.e_set(small, 1)
    assert rd.is_invariant(D, small, v) is expected
    perms = oracles.ref_automorphisms(small, [j for j in v if 0 < j < OMEGA])
    assert oracles.invariant(D.tuples, perms) is expected


def test_generators_match_oracle_group(small):
    full = rd.ref_automorphisms(small)
    assert sorted(full) == sorted(oracles.ref_automorphisms(small, [1]))


def test_irreflexivity(M):
    assert rd.is_u_irreflexive(rd.e_strip(M, 1, 2), M, (0, 1, 2))
    assert not rd.is_u_irreflexive(rd.e_set(M, 1), M, (0, 1, 2))


def test_theta_and_psi_contain_the_relation_below(M):
    D = rd.e_strip(M, 0, 1)
    ph = rd.phi(D, M, 2)
    assert M.relation(1) <= ph
    assert ph <= rd.theta(D, M) and ph <= rd.psi(D, M, 2)


def test_projections_are_idempotent():
    ps = rd.projections(3)
    assert all(p[p[i]] == p[i] for p in ps for i in range(3))
    # idempotent maps on three points
    assert len(ps) == 10


def test_project_onto_the_diagonal(M):
    D = rd.e_set(M, 1)
    diag = rd.project(D, M, (0, 0), OMEGA)
    assert diag.arity == 1 and len(diag.tuples) == M.size
    off = rd.project(D, M, (0, 1), OMEGA)
    assert off.tuples == D.tuples - M.relation(OMEGA)


def test_decomposition(M):
    assert rd.decomposition_holds(rd.e_strip(M, 1, 2), M)
    assert rd.decomposition_holds(rd.e_set(M, 2), M)


def test_drop_top(M):
    D = rd.e_strip(M, 0, 1)
    assert rd.drop_top(D, M, (0, 1, 2))
    with pytest.raises(PreconditionError):
        rd.drop_top(rd.e_set(M, 1), M, (0, 1, 2))


@pytest.mark.parametrize("build,expected", [
    (lambda M: rd.e_set(M, 1), {1, OMEGA}),
    (lambda M: rd.e_set(M, OMEGA), {OMEGA}),
    (lambda M: rd.e_set(M, 0), {OMEGA}),
    (lambda M: rd.e_strip(M, 1, 2), {1, 2, OMEGA}),
])
def test_classification(M, build, expected):
    log = rd.Transcript()
    F = rd.classify_reduct(build(M), M, log)
    assert F == expected
    assert log.lines[-1] == f"F = {rd.fmt_set(expected)}"
    assert rd.verify_equivalence(build(M), F, M)
    assert rd.is_minimal(build(M), F, M)


def test_wrong_equivalence_is_rejected(M):
    assert not rd.verify_equivalence(rd.e_set(M, 1), {2, OMEGA}, M)
    assert not rd.is_minimal(rd.e_set(M, 1), {1, 2, OMEGA}, M)


def test_non_invariant_sets_are_rejected(M):
    with pytest.raises(ContractError):
        rd.classify_reduct(rd.DefinableSet.of(2, [(0, 1)]), M)


def test_classification_is_stable_across_sizes():
    report = rd.stability_report(lambda M: rd.e_strip(M, 1, 2), U3)
    assert set(report.values()) == {frozenset({1, 2, OMEGA})}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 3))
def test_random_reducts_are_equivalent_and_minimal(seed, arity):
    M = rd.RefModel.uniform(U3)
    group = rd.ref_automorphisms(M)
    D = rd.random_orbit_closed(M, arity, random.Random(seed), group)
    F = rd.classify_reduct(D, M)
    assert OMEGA in F and F <= set(M.u)
    assert rd.verify_equivalence(D, F, M)
    assert rd.is_minimal(D, F, M)
