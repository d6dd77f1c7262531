import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import agree_below, wedge_nodes
from refposets.backforth import random_conditional
from refposets.dynamics import apply
from refposets.errors import CapacityError, ClosureError
from refposets.model_core import (AbstractModel, TruncatedModel, check_phi_forall, eval_E,
                                  extend_embedding, extension_type, full_model, induced_map,
                                  qftp, quotient, restrict, shift2_holds, wedge, wedge_mask)
from refposets.poset_core import finite_poset

CHAIN_2 = finite_poset(["p0", "p1"], [("p0", "p1")], [2, 2])
CHAIN_3 = finite_poset(["p0", "p1", "p2"], [("p0", "p1"), ("p1", "p2")], [2, 2, 2])
ANTI_2 = finite_poset(["a", "b"], [], [2, 2])
V = finite_poset(["a", "b", "r"], [("a", "r"), ("b", "r")], [2, 2, 2])


def test_E_is_reflexive():
    m = full_model(V)
    for f in m.elements:
        assert all(eval_E(m, p, f, f) for p in V.nodes)


def test_E_on_two_chain():
    m = full_model(CHAIN_2)
    assert eval_E(m, "p0", (0, 0), (0, 1))
    assert not eval_E(m, "p1", (0, 0), (0, 1))


def test_E_needs_agreement_on_everything_below():
    m = full_model(V)
    f, g = (0, 0, 1), (0, 1, 1)
    assert not eval_E(m, "r", f, g)
    assert eval_E(m, "r", f, g) == agree_below(V, 2, f, g)


def test_wedges():
    m = full_model(CHAIN_3)
    assert wedge(m, (0, 1, 0), (0, 1, 0)) == frozenset(CHAIN_3.nodes)
    assert wedge(full_model(ANTI_2), (0, 0), (0, 1)) == {"a"}
    assert wedge(m, (0, 1, 0), (0, 1, 1)) == {"p0", "p1"}


def test_types():
    m = full_model(CHAIN_2)
    ones = {qftp(m, [f]) for f in m.elements}
    assert len(ones) == 1
    assert qftp(m, [(0, 0), (0, 0)]).eq == (0, 0)
    assert qftp(m, [(0, 0), (0, 1)]) == qftp(m, [(1, 0), (1, 1)])
    assert qftp(m, [(0, 0), (0, 1)]) != qftp(m, [(0, 0), (1, 1)])


def test_extend_over_empty_set():
    m = full_model(CHAIN_2)
    target = qftp(m, [(1, 1)])
    assert extend_embedding(m, [], target) in m.elements


def test_extend_avoids_a_class():
    P = finite_poset(["a"], [], [3])
    m = full_model(P)
    target = extension_type(m, [(0,)], [0])
    assert extend_embedding(m, [(0,)], target) in {(1,), (2,)}


def test_extend_runs_out_of_room():
    m = full_model(CHAIN_2)
    A = [(0, 0), (0, 1)]
    target = extension_type(m, A, [1, 1])      # E_p0 but not E_p1 with both
    with pytest.raises(CapacityError):
        extend_embedding(m, A, target)


def test_quotients():
    m = full_model(CHAIN_2)
    assert len(quotient(m, CHAIN_2.full_mask)) == len(m)
    assert len(quotient(m, 0)) == 1
    q = quotient(m, ["p0"])
    assert len(q) == 2 and q.poset.nodes == ("p0",)
    with pytest.raises(ClosureError):
        quotient(m, ["p1"])


def test_induced_maps():
    m = full_model(CHAIN_2)
    ident = {f: f for f in m.elements}
    assert induced_map(ident, m, m, ["p0"]) == {(0,): (0,), (1,): (1,)}
    swap = {f: (1 - f[0], f[1]) for f in m.elements}
    assert induced_map(swap, m, m, ["p0"]) == {(0,): (1,), (1,): (0,)}
    assert induced_map(swap, m, m, CHAIN_2.full_mask) == swap


def test_restrict_to_everything():
    assert restrict((1, 0, 1), V, V.full_mask) == (1, 0, 1)


def test_universal_axioms():
    m = full_model(CHAIN_2)
    one_class = TruncatedModel(CHAIN_2, [(0, 0), (0, 1)])
    assert check_phi_forall(one_class, ["p0"])
    assert not check_phi_forall(m, ["p0"])
    # one E_p0 class split into delta(p1) + 1 = 3 classes at p1
    bad = AbstractModel(CHAIN_2, 3, ((0, 0, 0), (0, 1, 2)))
    assert not check_phi_forall(bad, 0)


# ---------------------------------------------------------------- properties


@st.composite
def posets_and_points(draw):
    P = draw(st.sampled_from([CHAIN_2, CHAIN_3, ANTI_2, V,
                              finite_poset(["a", "b", "c"], [("a", "c")], [3, 2, 2])]))
    m = full_model(P)
    pts = draw(st.lists(st.sampled_from(m.elements), min_size=2, max_size=5))
    return P, m, pts


@settings(max_examples=80, deadline=None)
@given(posets_and_points())
def test_wedge_matches_oracle(case):
    P, m, pts = case
    f, g = pts[0], pts[1]
    assert frozenset(P.addrs(wedge_mask(P, f, g))) == wedge_nodes(P, f, g)
    assert P.is_down_closed(wedge_mask(P, f, g))


@settings(max_examples=60, deadline=None)
@given(posets_and_points(), st.integers(0, 10**6))
def test_types_invariant_under_automorphisms(case, seed):
    P, m, pts = case
    sigma = random_conditional(P, random.Random(seed))
    assert qftp(m, pts) == qftp(m, [apply(sigma, f) for f in pts])


@settings(max_examples=80, deadline=None)
@given(posets_and_points())
def test_extension_realizes_type(case):
    P, m, pts = case
    A = list(dict.fromkeys(pts[:-1]))
    f = pts[-1]
    if f in A:
        return
    target = qftp(m, A + [f])
    g = extend_embedding(m, A, target)
    assert qftp(m, A + [g]) == target


@settings(max_examples=60, deadline=None)
@given(posets_and_points())
def test_blockwise_agreement(case):
    P, m, pts = case
    # the antichain split into singletons, and the whole poset as one block
    blocks = [P.full_mask] if P is not ANTI_2 else [1, 2]
    assert shift2_holds(P, blocks, pts[0], pts[1])
