import itertools
import random

import pytest
from hypothesis import example, given, settings, strategies as st

from cases import ANTI_GROWING, SUM_CHAINS
from oracles import bipartite_iso
from refposets import indiscernibles as ind
from refposets import reductions as rd
from refposets.dynamics import apply
from refposets.errors import ContractError, DepthError, FormatError
from refposets.model_core import ColoredModel, TruncatedModel, full_model
from refposets.poset_core import finite_poset, parse_presentation, truncate

G = rd.BipartiteGraph.of


def witness(src=SUM_CHAINS, depth=12, n0=2, n1=2):
    return ind.saturate(ind.build_cross_cutting(parse_presentation(src), depth, n0, n1, 1, 0))


def grid_cells(w, rows, cols):
    row = {e for D in w.classes[0][:rows] for e in D}
    col = {e for D in w.classes[1][:cols] for e in D}
    return row & col


# ---------------------------------------------------------------- bipartite graphs


def test_reducedness():
    assert rd.is_reduced(G(1, 1, []))
    assert not rd.is_reduced(G(2, 2, [(0, 0), (1, 0)]))
    assert all(rd.is_reduced(G(n, n, [(i, i) for i in range(n)])) for n in range(1, 5))


def test_graph_isomorphism_examples():
    R = G(2, 2, [(0, 1)])
    assert rd.graph_iso(R, R)[0]
    assert not rd.graph_iso(G(1, 2, []), G(2, 1, []))[0]
    ok, (s0, s1) = rd.graph_iso(R, G(2, 2, [(1, 0)]))
    assert ok and s0 == (1, 0) and s1 == (1, 0)


def test_reduced_graph_census():
    # frozen from brute-force enumeration of all 0/1 matrices up to 3 x 3
    graphs = rd.all_reduced_graphs(3, 3)
    assert len(graphs) == 328
    brute = 0
    for bits in itertools.product((0, 1), repeat=4):
        rows = [bits[0:2], bits[2:4]]
        cols = [bits[0::2], bits[1::2]]
        brute += rows[0] != rows[1] and cols[0] != cols[1]
    assert sum(1 for g in graphs if (g.rows, g.cols) == (2, 2)) == brute == 10


def test_graph_text_round_trip():
    R = G(3, 2, [(0, 0), (2, 1)])
    assert rd.BipartiteGraph.loads(R.dumps()) == R


def test_encoding_of_empty_graph():
    w = witness()
    cm = rd.encode_bipartite(w, G(1, 1, []))
    cells = grid_cells(w, 1, 1)
    for e, c in zip(cm.model.elements, cm.colors):
        assert c == (2 if e in cells else 0)


def test_grid_points():
    w = witness(n0=3, n1=3)
    cm = rd.encode_bipartite(w, G(2, 2, [(0, 0), (1, 1)]))
    cells = grid_cells(w, 2, 2)
    for e, c in zip(cm.model.elements, cm.colors):
        assert (c != 0) == (e in cells)
    assert cm.colors.count(1) == cm.colors.count(2) == 2


def test_single_cell():
    w = witness()
    cm = rd.encode_bipartite(w, G(1, 1, [(0, 0)]))
    cells = grid_cells(w, 1, 1)
    assert len(cells) == 1
    assert [c for e, c in zip(cm.model.elements, cm.colors) if e in cells] == [1]


def test_unreduced_full_graph_rejected():
    # the full 2 x 2 graph has two equal rows, so it is not reduced
    with pytest.raises(ContractError):
        rd.encode_bipartite(witness(), G(2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)]))


def test_colors_outside_alphabet():
    w = witness()
    cm = ColoredModel(w.model, tuple(3 for _ in w.model.elements))
    with pytest.raises(FormatError):
        rd.decode_bipartite(cm, w)


def test_all_two_coloring_decodes_to_empty_graph():
    w = witness()
    cm = ColoredModel(w.model, tuple(2 for _ in w.model.elements))
    assert rd.decode_bipartite(cm, w).edges == frozenset()


def test_unreduced_graph_rejected():
    with pytest.raises(ContractError):
        rd.encode_bipartite(witness(), G(2, 2, [(0, 0), (1, 0)]))


def test_decoding_is_invariant_under_patched_automorphisms():
    w = witness(ANTI_GROWING, 10, 3, 3)
    R = G(3, 3, [(0, 0), (0, 1), (1, 1), (2, 2)])
    cm = rd.encode_bipartite(w, R)
    for s0, s1 in [((1, 2, 0), (0, 2, 1)), ((2, 0, 1), (1, 0, 2))]:
        tau = ind.patched_automorphism(w, s0, s1)
        image = {apply(tau, e): c for e, c in zip(cm.model.elements, cm.colors)}
        moved = ColoredModel(cm.model, tuple(image[e] for e in cm.model.elements))
        back = rd.decode_bipartite(moved, w)
        assert bipartite_iso(back, R)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_bipartite_round_trip(seed):
    R = rd.random_reduced_graph(random.Random(seed), 3, 3)
    w = witness(ANTI_GROWING, 16, R.rows, R.cols)
    back = rd.decode_bipartite(rd.encode_bipartite(w, R), w.closures)
    assert bipartite_iso(back, R)


def test_isomorphism_is_reflected_on_small_graphs():
    w = witness(ANTI_GROWING, 16, 2, 3)
    graphs = [g for g in rd.all_reduced_graphs(2, 3) if (g.rows, g.cols) == (2, 3)]
    enc = {g: rd.encode_bipartite(w, g) for g in graphs}
    for a, b in itertools.combinations(graphs, 2):
        assert (rd.colored_iso(enc[a], enc[b]) is not None) == bipartite_iso(a, b)


# ---------------------------------------------------------------- blow-up of colorings


def test_all_ones_blow_up_is_a_copy():
    P = finite_poset(["a"], [], [3])
    cm = ColoredModel(full_model(P), (1, 1, 1))
    m = rd.color_to_model(cm)
    assert len(m) == 3
    back = rd.model_to_color(m)
    assert back.model.elements == cm.model.elements and back.colors == cm.colors


def test_block_sizes():
    P = finite_poset(["a"], [], [2])
    m = rd.color_to_model(ColoredModel(full_model(P), (2, 3)))
    assert len(m) == 5
    sizes = sorted(sum(1 for e in m.elements if e[0] == v) for v in range(2))
    assert sizes == [2, 3]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_blow_up_reflects_isomorphism(seed):
    rng = random.Random(seed)
    P = finite_poset(["a", "b"], [("a", "b")], [2, 2])
    m = full_model(P)
    a = ColoredModel(m, tuple(rng.randrange(3) for _ in m.elements))
    b = ColoredModel(m, tuple(rng.choice([a.colors, tuple(rng.randrange(3) for _ in m.elements)])))
    same = rd.colored_iso(a, b) is not None
    assert (rd.blowup_iso(rd.color_to_model(a), rd.color_to_model(b)) is not None) == same
    back = rd.model_to_color(rd.color_to_model(a))
    assert back.model.elements == m.elements and back.colors == a.colors


# ---------------------------------------------------------------- tame relations


Q3 = finite_poset(["a", "b"], [("a", "b")], [3, 2])
M3 = full_model(Q3)


def test_tameness():
    P = Q3
    E = frozenset((x, y) for x in M3.elements for y in M3.elements if x[0] == y[0])
    assert rd.check_tame(M3, rd.TameRelation("E", 2, 0, E))
    box = frozenset((x, y) for x in M3.elements for y in M3.elements if x[0] == 0 and y[0] == 1)
    assert rd.check_tame(M3, rd.TameRelation("box", 2, 0, box))
    e = M3.elements[0]
    bad = frozenset((e, y) for y in M3.elements)
    assert not rd.check_tame(M3, rd.TameRelation("bad", 2, 0, bad))
    assert P.n == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 3))
def test_irreflexive_pieces_reassemble(seed, arity):
    rng = random.Random(seed)
    keys = sorted({rd.class_key(Q3, 0, a) for a in M3.elements})
    chosen = {tuple(rng.choice(keys) for _ in range(arity)) for _ in range(rng.randint(0, 4))}
    tuples = frozenset(t for t in itertools.product(M3.elements, repeat=arity)
                       if tuple(rd.class_key(Q3, 0, a) for a in t) in chosen)
    S = rd.TameRelation("S", arity, 0, tuples)
    assert rd.check_tame(M3, S)
    pieces = rd.make_irreflexive(M3, S)
    assert all(rd.is_irreflexive(M3, p) and rd.check_tame(M3, p) for p in pieces)
    assert rd.reassemble(M3, pieces, arity) == tuples


# ---------------------------------------------------------------- two-level encoder


def two_level(qsrc, relations, colors, seed=0):
    """Q from ``qsrc`` next to an omega-chain; ``relations(MQ)`` gives the relations."""
    from refposets.poset_core import truncate as tr
    Q = tr(parse_presentation(qsrc), 10**3)
    MQ = full_model(Q)
    rels = tuple(relations(MQ))
    J = len(rd.build_codebook(rd.TameExpansion(MQ, rels), seed).J)
    pres = parse_presentation(f"(sum {qsrc} (chain omega :delta (const {max(2, J)})))")
    depth = Q.n + 4
    while True:
        T = tr(pres, depth)
        qmask = sum(1 << i for i, a in enumerate(T.nodes) if a[1] == 0)
        try:
            fam = ind.build_family_on(T.sub(T.full_mask & ~qmask), ind.HEIGHT, J, 1, seed, depth)
            break
        except DepthError:
            depth += 4
    mplus = rd.TameExpansion(TruncatedModel(T.sub(qmask), MQ.elements), rels)
    return rd.TwoLevelInstance("", T, qmask, mplus, tuple(colors), fam, seed)


def test_no_relations():
    inst = two_level("(finite :nodes [a] :delta [3])", lambda m: [], (0, 2, 1))
    cm, enc = rd.encode_twolevel(inst.poset, inst.qmask, inst.expansion, inst.colors, inst.family)
    assert enc.codebook.J == (("*",),)
    book = enc.codebook
    for e, c in zip(cm.model.elements, cm.colors):
        a, _ = enc.split(e)
        assert c == book.s(inst.colors[inst.expansion.model.elements.index(a)])
    assert rd.recover_relations(cm, enc) == []
    assert rd.recover_coloring(cm, enc) == dict(zip(inst.expansion.model.elements, inst.colors))


def test_single_unary_relation():
    def rel(m):
        return [rd.TameRelation("S0", 1, 0, frozenset([(m.elements[1],)]))]
    inst = two_level("(finite :nodes [a] :delta [3])", rel, (1, 0, 1))
    cm, enc = rd.encode_twolevel(inst.poset, inst.qmask, inst.expansion, inst.colors, inst.family)
    assert len(enc.codebook.J) == 2 and len(enc.codebook.Y[0]) == 2
    assert rd.recover_relations(cm, enc) == [inst.expansion.relations[0].tuples]
    ok_rec, ok_tau, _ = rd.check_twolevel_instance(inst)
    assert ok_rec and ok_tau


def test_binary_irreflexive_relation():
    def rel(m):
        return [rd.TameRelation("S1", 2, 0, frozenset(
            (x, y) for x in m.elements for y in m.elements if (x[0], y[0]) in {(0, 1), (1, 2), (2, 0)}))]
    inst = two_level("(finite :nodes [a] :delta [3])", rel, (0, 0, 1))
    cm, enc = rd.encode_twolevel(inst.poset, inst.qmask, inst.expansion, inst.colors, inst.family)
    assert rd.recover_relations(cm, enc) == [inst.expansion.relations[0].tuples]
    key = rd.RecoveryKey.loads(inst.poset, enc.key().dumps())
    assert key == enc.key()
    assert rd.recover_relations(cm, key) == [inst.expansion.relations[0].tuples]
    ok_rec, ok_tau, note = rd.check_twolevel_instance(inst)
    assert ok_rec and ok_tau and note != "identity h"


def test_reflexive_relation_rejected():
    def rel(m):
        return [rd.TameRelation("E", 2, 0, frozenset(
            (x, y) for x in m.elements for y in m.elements if x[0] == y[0]))]
    with pytest.raises(ContractError):
        inst = two_level("(finite :nodes [a] :delta [2])", rel, (0, 1))
        rd.encode_twolevel(inst.poset, inst.qmask, inst.expansion, inst.colors, inst.family)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
@example(45254982)
def test_seeded_two_level_instances(seed):
    inst = rd.twolevel_instance(seed)
    ok_rec, ok_tau, _ = rd.check_twolevel_instance(inst)
    assert ok_rec and ok_tau


def test_sum_truncation_shape():
    T = truncate(parse_presentation("(sum (finite :nodes [a] :delta [3]) (chain omega))"), 4)
    assert [a[1] for a in T.nodes].count(0) == 1
