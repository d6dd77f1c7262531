import random

import pytest
from hypothesis import given, settings, strategies as st

from cases import CHAIN2, FIBERS_FIN, FIBERS_INF
from refposets import backforth as bf
from refposets.dynamics import apply
from refposets.errors import ContractError, PreconditionError
from refposets.model_core import ColoredModel, TruncatedModel, full_model
from refposets.poset_core import parse_presentation


def colored(m, colors=None):
    return ColoredModel(m, tuple(colors or [0] * len(m)))


def leveled(src=CHAIN2, depth=4):
    return bf.leveled(parse_presentation(src), depth)


def auto(P, seed):
    sigma = bf.random_conditional(P, random.Random(seed))
    return sigma


# ---------------------------------------------------------------- embeddings


def test_identity_is_a_one_embedding():
    M = colored(full_model(leveled().poset))
    assert bf.check_one_embedding({x: x for x in M.model.elements}, M, M)


def test_automorphisms_are_one_embeddings():
    P = leveled().poset
    M = colored(full_model(P))
    sigma = auto(P, 3)
    f = {x: apply(sigma, x) for x in M.model.elements}
    v = bf.check_one_embedding(f, M, M)
    assert v and v.holds


def test_missing_class_is_detected():
    P = leveled().poset
    N = colored(full_model(P))
    sub = TruncatedModel(P, [e for e in N.model.elements if e[0] == 0])
    M = colored(sub)
    v = bf.check_one_embedding({x: x for x in sub.elements}, M, N)
    assert not v and "omitted" in v.reason


def test_non_embedding_is_rejected():
    P = leveled().poset
    M = colored(full_model(P))
    els = M.model.elements
    f = {x: els[0] for x in els}
    assert not bf.check_one_embedding(f, M, M)


# ---------------------------------------------------------------- orders and inverses


def test_self_embedding_orders():
    assert bf.self_embedding_order({1: 1, 2: 2}) == 1
    assert bf.self_embedding_order({1: 2, 2: 1}) == 2
    with pytest.raises(ContractError):
        bf.self_embedding_order({1: 2, 2: 2})


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_quotient_orders_divide_the_bound(seed):
    L = leveled("(chain omega :delta (const 2))", 2)
    m = full_model(L.poset)
    sigma = auto(L.poset, seed)
    f = {x: apply(sigma, x) for x in m.elements}
    k = bf.self_embedding_order(bf.quotient_map(L, 1, f))
    assert 4 % k == 0


def test_inverse_of_mutually_inverse_maps():
    L = leveled()
    m = full_model(L.poset)
    sigma = auto(L.poset, 5)
    f = {x: apply(sigma, x) for x in m.elements}
    g = {y: x for x, y in f.items()}
    assert bf.inverse_mod_level(L, f, g, 2) == g


def test_inverse_of_an_involution():
    L = leveled()
    m = full_model(L.poset)
    f = {x: (1 - x[0],) + x[1:] for x in m.elements}
    h = bf.inverse_mod_level(L, f, f, 3)
    assert h == f


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(0, 10**9), st.integers(0, 3))
def test_inverse_for_a_non_inverse_pair(s1, s2, n):
    L = leveled()
    m = full_model(L.poset)
    sigma, tau = auto(L.poset, s1), auto(L.poset, s2)
    f = {x: apply(sigma, x) for x in m.elements}
    g = {y: apply(tau, y) for y in m.elements}
    h = bf.inverse_mod_level(L, f, g, n)
    assert set(h) == set(m.elements)
    for x, y in f.items():
        assert L.key(n, h[y]) == L.key(n, x)


def test_restriction_onto():
    L = leveled(FIBERS_INF, 6)
    m = full_model(L.poset)
    assert bf.restriction_onto_check(L, {x: x for x in m.elements}, m.elements[0], m, m)
    sigma = auto(L.poset, 2)
    f = {x: apply(sigma, x) for x in m.elements}
    assert all(bf.restriction_onto_check(L, f, a, m, m) for a in m.elements[:10])
    # fewer points in the source class than in the target class
    a = m.elements[0]
    small = TruncatedModel(L.poset, [x for x in m.elements if not L.e_r(x, a) or x == a])
    assert not bf.restriction_onto_check(L, {x: x for x in small.elements}, a, small, m)


def test_singleton_classes_are_onto():
    L = leveled(CHAIN2, 4)
    assert L.rmask == L.poset.full_mask
    m = full_model(L.poset)
    f = {x: x for x in m.elements}
    assert all(bf.restriction_onto_check(L, f, a, m, m) for a in m.elements)


def test_leveling_needs_minimal_unboundedness():
    with pytest.raises(PreconditionError):
        bf.leveled(parse_presentation("(antichain omega :delta (affine 1 2))"), 4)


# ---------------------------------------------------------------- the forth step


def _context(src, seed, size=12):
    inst = bf.sb_instance(parse_presentation(src), 6, size, 2, seed)
    return inst, bf.BFContext(inst.L, inst.M, inst.N, [dict(inst.f)], [dict(inst.g)])


def test_first_step_uses_the_first_embedding():
    inst, ctx = _context(FIBERS_INF, 1)
    a = inst.M.model.elements[3]
    b, state, case = bf.bf_extend(ctx, bf.BFState(), a)
    assert case == 1 and b == inst.f[a]
    assert bf.check_state(ctx, state)


def test_second_point_in_same_class():
    for seed in range(20):
        inst, ctx = _context(FIBERS_INF, seed, 20)
        L, els = inst.L, inst.M.model.elements
        pair = next(((x, y) for x in els for y in els if x != y and L.e_r(x, y)), None)
        if pair is None:
            continue
        b0, st0, _ = bf.bf_extend(ctx, bf.BFState(), pair[0])
        b1, st1, case = bf.bf_extend(ctx, st0, pair[1])
        assert case == 2 and L.e_r(b0, b1)
        assert bf.check_state(ctx, st1)
        return
    pytest.fail("no instance with a nontrivial E_R-class")


def test_third_case_applies_the_stored_map():
    for seed in range(20):
        inst, ctx = _context(FIBERS_INF, seed, 20)
        L, els = inst.L, inst.M.model.elements
        pair = next(((x, y) for x in els for y in els if not L.e_r(x, y)), None)
        b0, st0, _ = bf.bf_extend(ctx, bf.BFState(), pair[0])
        b1, st1, case = bf.bf_extend(ctx, st0, pair[1])
        if case == 3:
            assert b1 == st0.pairs[0].f[pair[1]]
            return
    pytest.fail("no third-case step found")


# ---------------------------------------------------------------- the whole construction


def test_identity_maps_give_identity():
    L = leveled()
    m = full_model(L.poset)
    M = colored(m, [x[0] for x in m.elements])
    ident = {x: x for x in m.elements}
    h, _ = bf.sb_isomorphism(M, M, ident, ident, L)
    assert h == ident


def test_two_distinct_isomorphisms():
    L = leveled()
    m = full_model(L.poset)
    M = colored(m, [x[-1] for x in m.elements])
    autos = bf.color_automorphisms(M)
    f, g = autos[1], autos[2]
    h, _ = bf.sb_isomorphism(M, M, f, g, L)
    assert bf.is_colored_isomorphism(h, M, M)


def test_chain_instances_with_non_inverse_maps():
    seen = 0
    for seed in range(10):
        inst = bf.sb_instance(parse_presentation(CHAIN2), 4, 16, 2, seed)
        if all(inst.g[inst.f[x]] == x for x in inst.M.model.elements):
            continue
        seen += 1
        h, log = bf.sb_isomorphism(inst.M, inst.N, inst.f, inst.g, inst.L)
        assert bf.is_colored_isomorphism(h, inst.M, inst.N)
    assert seen > 0


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([CHAIN2, FIBERS_INF, FIBERS_FIN]), st.integers(0, 10**9))
def test_back_and_forth_yields_isomorphisms(src, seed):
    inst = bf.sb_instance(parse_presentation(src), 6, 12, 2, seed)
    assert bf.is_colored_embedding(inst.f, inst.M, inst.N)
    assert bf.is_colored_embedding(inst.g, inst.N, inst.M)
    h, log = bf.sb_isomorphism(inst.M, inst.N, inst.f, inst.g, inst.L)
    assert bf.is_colored_isomorphism(h, inst.M, inst.N)
    assert set(log) <= {1, 2, 3, 4}
