import itertools

import pytest
from hypothesis import given, settings, strategies as st

from cases import (ANTI2, ANTI_GROWING, CHAIN2, FIBERS_FIN, FIBERS_INF, PRODUCT_CHAIN_PAIR,
                   SUM_CHAINS, SUM_OF_CHAINS)
from oracles import longest_chain_through
from refposets.errors import NoChainError, ParseError, PreconditionError
from refposets.poset_core import (BOUNDED, MIN_UNBOUNDED, UNBOUNDED_NOT_MIN, BoundedWitness,
                                  FinitePoset, downward_closure, find_omega_chain, finite_poset,
                                  height_of_node, is_narrow, is_orthogonal, level_sets,
                                  parse_presentation, truncate, validate_witness)


def pp(s):
    return parse_presentation(s)


# ---------------------------------------------------------------- downward closure and height


def test_closure_of_chain_top():
    P = finite_poset(["p0", "p1", "p2"], [("p0", "p1"), ("p1", "p2")])
    assert downward_closure(P, ["p2"]) == {"p0", "p1", "p2"}


def test_closure_in_antichain():
    P = finite_poset(["a", "b", "c"])
    assert downward_closure(P, ["b"]) == {"b"}


def test_closure_of_v_top():
    P = finite_poset(["a", "b", "r"], [("a", "r"), ("b", "r")])
    assert downward_closure(P, ["r"]) == {"a", "b", "r"}


def test_heights_on_chain_and_antichain():
    C = finite_poset(["p0", "p1", "p2"], [("p0", "p1"), ("p1", "p2")])
    assert height_of_node(C, "p2") == 3
    A = truncate(pp(ANTI_GROWING), 5)
    assert all(height_of_node(A, a) == 1 for a in A.nodes)


def test_height_of_product_top():
    two = "(finite :nodes [a b] :covers [(a b)] :delta [2 2])"
    P = truncate(pp(f"(product {two} {two})"), 10)
    top = ("*", "b", "b")
    assert longest_chain_through(P, top) == 3
    assert height_of_node(P, top) == 3


def test_height_on_presentation_directly():
    assert height_of_node(pp(CHAIN2), 4) == 5


# ---------------------------------------------------------------- classification


@pytest.mark.parametrize("src, verdict", [
    (CHAIN2, MIN_UNBOUNDED),
    (PRODUCT_CHAIN_PAIR, UNBOUNDED_NOT_MIN),
    (SUM_OF_CHAINS, UNBOUNDED_NOT_MIN),
    (FIBERS_INF, MIN_UNBOUNDED),
    (ANTI2, BOUNDED),
    (ANTI_GROWING, UNBOUNDED_NOT_MIN),
])
def test_classification_table(src, verdict):
    cls = pp(src).classify()
    assert cls.verdict == verdict
    assert validate_witness(pp(src), cls, 12)


def test_bounded_witness_values():
    w = pp(ANTI2).classify().witness
    assert w == BoundedWitness(height=1, delta=2)


def test_omega_chains():
    assert find_omega_chain(pp(CHAIN2), 4) == [0, 1, 2, 3]
    assert find_omega_chain(pp(FIBERS_INF), 3) == [("p", 0), ("p", 1), ("p", 2)]
    with pytest.raises(NoChainError):
        find_omega_chain(pp(ANTI_GROWING), 2)


def test_orthogonality():
    A = finite_poset(["a", "b"])
    assert is_orthogonal(A, ["a"], ["b"])
    C = finite_poset(["p0", "p1"], [("p0", "p1")])
    assert not is_orthogonal(C, ["p0"], ["p1"])
    T = truncate(pp(PRODUCT_CHAIN_PAIR), 12)
    xs = [a for a in T.nodes if a[2] == "x"]
    ys = [a for a in T.nodes if a[2] == "y"]
    assert is_orthogonal(T, xs, ys)


def test_narrowness():
    assert is_narrow(pp(CHAIN2))[0]
    ok, wit = is_narrow(pp(SUM_CHAINS))
    assert not ok and wit is not None
    T = truncate(pp(SUM_CHAINS), 10)
    left = [a for a in T.nodes if wit.left(a)]
    right = [a for a in T.nodes if wit.right(a)]
    assert {a[1] for a in left} == {0} and {a[1] for a in right} == {1}
    assert is_narrow(pp(FIBERS_FIN))[0]


def test_finite_fibers_have_no_orthogonal_unbounded_pair():
    # every node of height >= 3 lies above p_0 and p_1, so two sets of height >= 3
    # always contain a comparable pair; check on the truncation at depth 20
    T = truncate(pp(FIBERS_FIN), 20)
    tall = [i for i in range(T.n) if T.heights[i] >= 3]
    low = [i for i in range(T.n) if T.heights[i] <= 2]
    for i in tall:
        for j in low:
            if T.heights[j] == 1:
                assert T.leq_i(j, i)


# ---------------------------------------------------------------- level sets and truncation


def test_level_sets_on_chain():
    assert level_sets(pp(CHAIN2), 2, 8).nodes == (0, 1, 2)


def test_level_sets_with_fibers():
    P = pp(FIBERS_INF)
    Q = level_sets(P, 1, 12)
    T = truncate(P, 12)
    p1 = ("p", 1)
    expected = tuple(q for q in T.nodes if not (q != p1 and P.leq(p1, q)))
    assert Q.nodes == expected
    assert ("q", 1, 0) not in Q.nodes and ("q", 0, 0) in Q.nodes


def test_level_sets_exhaust_truncation():
    T = truncate(pp(CHAIN2), 6)
    assert level_sets(pp(CHAIN2), 10, 6).nodes == T.nodes


def test_level_sets_need_minimal_unboundedness():
    with pytest.raises(PreconditionError):
        level_sets(pp(ANTI_GROWING), 1, 5)


def test_truncations():
    C = truncate(pp(CHAIN2), 3)
    assert C.nodes == (0, 1, 2) and C.heights == (1, 2, 3)
    A = truncate(pp(ANTI_GROWING), 4)
    assert A.heights == (1, 1, 1, 1) and A.delta == (2, 3, 4, 5)
    P = truncate(pp(PRODUCT_CHAIN_PAIR), 4)
    assert P.nodes == (("*", 0, "x"), ("*", 0, "y"), ("*", 1, "x"), ("*", 1, "y"))


def test_parse_errors():
    for bad in ["(chain 3)", "(nonsense)", "(finite :nodes [a] :delta [1])", "((", ""]:
        with pytest.raises((ParseError, ValueError)):
            parse_presentation(bad)


@pytest.mark.parametrize("src", [CHAIN2, ANTI_GROWING, PRODUCT_CHAIN_PAIR, SUM_CHAINS,
                                 SUM_OF_CHAINS, FIBERS_INF, FIBERS_FIN])
def test_sexpr_round_trip(src):
    p = pp(src)
    q = pp(p.sexpr())
    assert q.sexpr() == p.sexpr() and q.ast_hash() == p.ast_hash()
    assert truncate(q, 8) == truncate(p, 8)


# ---------------------------------------------------------------- properties on random finite posets


@st.composite
def finite_posets(draw, max_nodes=6):
    n = draw(st.integers(1, max_nodes))
    names = [f"n{i}" for i in range(n)]
    covers = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)
              if draw(st.booleans()) and draw(st.booleans())]
    delta = [draw(st.integers(2, 4)) for _ in range(n)]
    return finite_poset(names, covers, delta)


@settings(max_examples=60, deadline=None)
@given(finite_posets(), st.data())
def test_closure_is_closed_and_idempotent(P, data):
    Q = data.draw(st.sets(st.sampled_from(P.nodes)))
    D = downward_closure(P, Q)
    assert set(Q) <= D
    assert downward_closure(P, D) == D
    assert all(b in D for a in D for b in P.nodes if P.leq(b, a))


@settings(max_examples=40, deadline=None)
@given(finite_posets(5))
def test_heights_match_longest_chains(P):
    for a in P.nodes:
        assert height_of_node(P, a) == longest_chain_through(P, a)


@settings(max_examples=40, deadline=None)
@given(finite_posets())
def test_node_order_is_linear_extension(P):
    for i, j in itertools.product(range(P.n), repeat=2):
        if P.leq_i(i, j):
            assert i <= j


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([CHAIN2, ANTI_GROWING, PRODUCT_CHAIN_PAIR, SUM_CHAINS, FIBERS_INF]),
       st.integers(1, 14))
def test_truncations_are_downward_closed_prefixes(src, n):
    p = pp(src)
    T = truncate(p, n)
    assert T.n == n
    for a in T.nodes:
        assert all(b in T.index for b in p.down(a))
    assert isinstance(T, FinitePoset)
