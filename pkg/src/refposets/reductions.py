"""Finite-scale versions of three reductions between classes of structures.

* bipartite graphs into colorings of a cross-cutting model, and back;
* colorings into plain models by blowing each point up into a block;
* tame expansions on ``Q`` into colorings of a two-level model on ``Q + R``.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .dynamics import ConditionalAutomorphism, apply, lift, patch
from .errors import CapacityError, ContractError, DecodeError, DepthError, FormatError
from .indiscernibles import CrossCuttingWitness, IndiscernibleFamily, family_lift
from .model_core import ColoredModel, Element, TruncatedModel, wedge_mask
from .poset_core import FinitePoset, bits, format_address
from .search import find_isomorphism, iter_isomorphisms


# ---------------------------------------------------------------- bipartite graphs


@dataclass(frozen=True)
class BipartiteGraph:
    rows: int
    cols: int
    edges: frozenset

    def __post_init__(self):
        for u, v in self.edges:
            if not (0 <= u < self.rows and 0 <= v < self.cols):
                raise ContractError(f"edge ({u} {v}) out of range")

    @classmethod
    def of(cls, rows: int, cols: int, edges: Iterable[tuple[int, int]]) -> "BipartiteGraph":
        return cls(rows, cols, frozenset((int(u), int(v)) for u, v in edges))

    def row(self, u: int) -> frozenset:
        return frozenset(v for a, v in self.edges if a == u)

    def col(self, v: int) -> frozenset:
        return frozenset(u for u, b in self.edges if b == v)

    def dumps(self) -> str:
        lines = [f"{self.rows} {self.cols}"] + [f"{u} {v}" for u, v in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "BipartiteGraph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        try:
            n, m = int(rows[0][0]), int(rows[0][1])
            return cls.of(n, m, [(int(a), int(b)) for a, b in rows[1:]])
        except (IndexError, ValueError) as exc:
            raise DecodeError("malformed bipartite graph") from exc


def is_reduced(R: BipartiteGraph) -> bool:
    rows = [R.row(u) for u in range(R.rows)]
    cols = [R.col(v) for v in range(R.cols)]
    return len(set(rows)) == len(rows) and len(set(cols)) == len(cols)


def graph_iso(R: BipartiteGraph, S: BipartiteGraph) -> tuple[bool, tuple | None]:
    """Brute force over row and column permutations."""
    if (R.rows, R.cols, len(R.edges)) != (S.rows, S.cols, len(S.edges)):
        return False, None
    for s0 in itertools.permutations(range(R.rows)):
        # the column permutation is forced up to columns with equal images
        for s1 in itertools.permutations(range(R.cols)):
            if all((s0[u], s1[v]) in S.edges for u, v in R.edges):
                return True, (s0, s1)
    return False, None


def all_reduced_graphs(max_rows: int, max_cols: int) -> list[BipartiteGraph]:
    out = []
    for n in range(1, max_rows + 1):
        for m in range(1, max_cols + 1):
            cells = [(u, v) for u in range(n) for v in range(m)]
            for mask in range(1 << len(cells)):
                g = BipartiteGraph.of(n, m, [c for k, c in enumerate(cells) if mask >> k & 1])
                if is_reduced(g):
                    out.append(g)
    return out


def random_reduced_graph(rng: random.Random, max_rows: int, max_cols: int) -> BipartiteGraph:
    while True:
        n, m = rng.randint(1, max_rows), rng.randint(1, max_cols)
        g = BipartiteGraph.of(n, m, [(u, v) for u in range(n) for v in range(m) if rng.random() < 0.5])
        if is_reduced(g):
            return g


def permute_graph(R: BipartiteGraph, s0: Sequence[int], s1: Sequence[int]) -> BipartiteGraph:
    return BipartiteGraph.of(R.rows, R.cols, [(s0[u], s1[v]) for u, v in R.edges])


def _agree(a: Element, b: Element, mask: int) -> bool:
    return all(a[i] == b[i] for i in bits(mask))


def encode_bipartite(w: CrossCuttingWitness, R: BipartiteGraph) -> ColoredModel:
    """Color 0 off the grid, 1 on grid cells in ``R``, 2 on the other grid cells.

    Rows use the first ``R.rows`` classes of side 0, columns the first
    ``R.cols`` classes of side 1.
    """
    if not is_reduced(R):
        raise ContractError("graph is not reduced")
    if R.rows > len(w.classes[0]) or R.cols > len(w.classes[1]):
        raise CapacityError("witness has too few classes for the graph")
    row = {e: n for n, D in enumerate(w.classes[0][: R.rows]) for e in D}
    col = {e: m for m, D in enumerate(w.classes[1][: R.cols]) for e in D}
    colors = []
    for e in w.model.elements:
        if e in row and e in col:
            colors.append(1 if (row[e], col[e]) in R.edges else 2)
        else:
            colors.append(0)
    return ColoredModel(w.model, tuple(colors))


def decode_bipartite(cm: ColoredModel, w) -> BipartiteGraph:
    """Rebuild the graph from colors and the two equivalence relations only.

    ``w`` is a witness or just the pair of node masks defining ``E^0`` and ``E^1``.
    """
    if any(c not in (0, 1, 2) for c in cm.colors):
        raise FormatError("colors must lie in {0, 1, 2}")
    els = cm.model.elements
    e0, e1 = w.closures if hasattr(w, "closures") else w
    grid = [i for i, c in enumerate(cm.colors) if c]
    side0 = [i for i in range(len(els)) if any(_agree(els[i], els[g], e0) for g in grid)]
    side1 = [i for i in range(len(els)) if any(_agree(els[i], els[g], e1) for g in grid)]

    def key(i: int, mask: int) -> tuple:
        return tuple(els[i][q] for q in bits(mask))

    cls1 = sorted({key(i, e1) for i in side1})
    cls0 = sorted({key(i, e0) for i in side0})

    def profile(i: int, mine: int, other: int, other_classes) -> tuple:
        k = key(i, mine)
        out = []
        for oc in other_classes:
            out.append(frozenset(cm.colors[j] for j in range(len(els))
                                 if key(j, mine) == k and key(j, other) == oc))
        return tuple(out)

    def classes(side, mine, other, other_classes) -> list[list[int]]:
        groups: list[tuple[tuple, list[int]]] = []
        for i in side:
            p = profile(i, mine, other, other_classes)
            for gp, members in groups:
                if all(len(a | b) <= 1 for a, b in zip(gp, p)):
                    members.append(i)
                    break
            else:
                groups.append((p, [i]))
        return [members for _, members in groups]

    rows = classes(side0, e0, e1, cls1)
    cols = classes(side1, e1, e0, cls0)
    row_of = {i: n for n, mem in enumerate(rows) for i in mem}
    col_of = {i: m for m, mem in enumerate(cols) for i in mem}
    edges = {(row_of[i], col_of[i]) for i in grid if cm.colors[i] == 1}
    return BipartiteGraph.of(len(rows), len(cols), edges)


def colored_iso(a: ColoredModel, b: ColoredModel, node_cap: int | None = None) -> list[int] | None:
    """Color-preserving wedge isomorphism between two colored models (or None)."""
    if a.model.poset != b.model.poset or len(a.model) != len(b.model):
        return None
    return find_isomorphism(a.model.wedge_matrix(), list(a.colors),
                            b.model.wedge_matrix(), list(b.colors), node_cap)


# ---------------------------------------------------------------- blow-up of colorings

INFINITE_BLOCK = 1


def color_to_model(cm: ColoredModel, infinite_block: int = INFINITE_BLOCK) -> TruncatedModel:
    """Replace each point by a block of ``c(a)`` copies in one ``E_P``-class.

    Two tag coordinates are appended: copy index and a flag that marks the
    blocks standing for color 0 (an infinite class).
    """
    P = cm.model.poset
    out = []
    for e, c in zip(cm.model.elements, cm.colors):
        core = e[: P.n]
        if c == 0:
            out.extend(core + (k, 1) for k in range(infinite_block))
        else:
            out.extend(core + (k, 0) for k in range(c))
    return TruncatedModel(P, out, tags=2)


def model_to_color(m: TruncatedModel) -> ColoredModel:
    """Inverse of ``color_to_model``: block sizes, flagged blocks give 0."""
    P = m.poset
    size: dict = {}
    flag: dict = {}
    for e in m.elements:
        core = e[: P.n]
        size[core] = size.get(core, 0) + 1
        flag[core] = e[P.n + 1] if m.tags >= 2 else 0
    cores = sorted(size)
    colors = tuple(0 if flag[c] else size[c] for c in cores)
    return ColoredModel(TruncatedModel(P, cores), colors)


def blowup_iso(a: TruncatedModel, b: TruncatedModel, node_cap: int | None = None) -> list[int] | None:
    """Isomorphism of blown-up models: wedges, equality and the flag predicate."""
    if a.poset != b.poset or len(a) != len(b):
        return None
    fa = [e[-1] for e in a.elements]
    fb = [e[-1] for e in b.elements]
    return find_isomorphism(a.wedge_matrix(), fa, b.wedge_matrix(), fb, node_cap)


# ---------------------------------------------------------------- tame relations


@dataclass(frozen=True)
class TameRelation:
    name: str
    arity: int
    node: int                       # index of the invariance node in the model's poset
    tuples: frozenset
    pattern: tuple[int, ...] | None = None   # set on irreflexive pieces

    def holds(self, tup: Sequence[Element]) -> bool:
        return tuple(map(tuple, tup)) in self.tuples


def class_key(P: FinitePoset, q: int, a: Element) -> tuple:
    return tuple(a[i] for i in bits(P.below[q]))


def check_tame(m: TruncatedModel, S: TameRelation) -> bool:
    """Exhaustive ``E_q``-invariance check."""
    P = m.poset
    verdict: dict = {}
    for tup in itertools.product(m.elements, repeat=S.arity):
        k = tuple(class_key(P, S.node, a) for a in tup)
        v = tup in S.tuples
        if verdict.setdefault(k, v) != v:
            return False
    return True


def eq_pattern(P: FinitePoset, q: int, tup: Sequence[Element]) -> tuple[int, ...]:
    labels: dict = {}
    return tuple(labels.setdefault(class_key(P, q, a), len(labels)) for a in tup)


def make_irreflexive(m: TruncatedModel, S: TameRelation) -> list[TameRelation]:
    """Split ``S`` by the ``E_q``-equality pattern of its tuples.

    Each piece keeps one coordinate per block of the pattern, so its tuples
    have pairwise ``E_q``-inequivalent entries.
    """
    P = m.poset
    groups: dict[tuple, set] = {}
    for tup in S.tuples:
        pat = eq_pattern(P, S.node, tup)
        firsts = [pat.index(k) for k in range(max(pat) + 1)]
        groups.setdefault(pat, set()).add(tuple(tup[j] for j in firsts))
    return [TameRelation(f"{S.name}#{''.join(map(str, pat))}", max(pat) + 1, S.node,
                         frozenset(ts), pat)
            for pat, ts in sorted(groups.items())]


def reassemble(m: TruncatedModel, pieces: Sequence[TameRelation], arity: int) -> frozenset:
    """The boolean combination that the pieces of ``make_irreflexive`` came from."""
    P = m.poset
    out = set()
    for tup in itertools.product(m.elements, repeat=arity):
        for S in pieces:
            pat = eq_pattern(P, S.node, tup)
            if pat == S.pattern:
                firsts = [pat.index(k) for k in range(max(pat) + 1)]
                if tuple(tup[j] for j in firsts) in S.tuples:
                    out.add(tup)
    return frozenset(out)


def is_irreflexive(m: TruncatedModel, S: TameRelation) -> bool:
    P = m.poset
    return all(len(set(eq_pattern(P, S.node, t))) == S.arity for t in S.tuples)


# ---------------------------------------------------------------- two-level encoder


@dataclass(frozen=True)
class TameExpansion:
    model: TruncatedModel                   # over the Q poset
    relations: tuple[TameRelation, ...]

    def preserved_by(self, h: Mapping[Element, Element]) -> bool:
        return all(tuple(h[a] for a in t) in S.tuples
                   for S in self.relations for t in S.tuples)


@dataclass(frozen=True)
class Codebook:
    reps: tuple[tuple[Element, ...], ...]     # per Q node, one representative per class
    pos: tuple[tuple[tuple[Element, ...], ...], ...]
    J: tuple
    Y: tuple[tuple[int, ...], ...]
    x_skip: frozenset                         # Y as a set; X is its complement
    seed: int

    def s(self, k: int) -> int:
        """The ``k``-th element of ``X`` (a bijection from the naturals onto ``X``)."""
        v = -1
        for _ in range(k + 1):
            v += 1
            while v in self.x_skip:
                v += 1
        return v


@dataclass(frozen=True)
class TwoLevelEncoding:
    poset: FinitePoset
    qmask: int
    rmask: int
    expansion: TameExpansion
    family: IndiscernibleFamily
    codebook: Codebook
    model: TruncatedModel = field(compare=False)

    def split(self, f: Element) -> tuple[Element, Element]:
        return (tuple(f[i] for i in bits(self.qmask)), tuple(f[i] for i in bits(self.rmask)))

    def glue(self, a: Element, b: Element) -> Element:
        e = [0] * self.poset.n
        for i, v in zip(bits(self.qmask), a):
            e[i] = v
        for i, v in zip(bits(self.rmask), b):
            e[i] = v
        return tuple(e)

    def jclass(self) -> dict[Element, int]:
        return self.family.class_of()

    def key(self) -> RecoveryKey:
        return RecoveryKey(self.poset, self.qmask,
                           tuple((S.node, S.arity) for S in self.expansion.relations),
                           self.codebook.Y, self.codebook.x_skip)


def build_codebook(mplus: TameExpansion, seed: int = 0, max_color: int = 64) -> Codebook:
    P = mplus.model.poset
    rng = random.Random(seed)
    reps = []
    for q in range(P.n):
        classes: dict = {}
        for a in mplus.model.elements:
            classes.setdefault(class_key(P, q, a), []).append(a)
        reps.append(tuple(rng.choice(v) for _, v in sorted(classes.items())))
    pos = []
    for S in mplus.relations:
        R = reps[S.node]
        pos.append(tuple(t for t in itertools.product(R, repeat=S.arity) if t in S.tuples))
    J = (("*",),) + tuple((i, k) for i, ps in enumerate(pos) for k in range(len(ps)))
    need = sum(S.arity + 1 for S in mplus.relations)
    pool = rng.sample(range(max(max_color, 2 * need + 2)), need)
    Y, k = [], 0
    for S in mplus.relations:
        Y.append(tuple(pool[k: k + S.arity + 1]))
        k += S.arity + 1
    return Codebook(tuple(reps), tuple(pos), J, tuple(Y), frozenset(pool), seed)


def encode_twolevel(P: FinitePoset, qmask: int, mplus: TameExpansion, colors: Sequence[int],
                    fam: IndiscernibleFamily, seed: int = 0
                    ) -> tuple[ColoredModel, TwoLevelEncoding]:
    """Color the two-level model so that both the coloring and the relations are coded.

    On a point ``(a, b)``: if ``b`` lies in the distinguished class the color
    is ``s(c(a))``; if ``b`` lies in the class of ``(i, r)`` the color is
    ``m_{i,k}`` when ``a`` is ``E_{q_i}``-equivalent to ``r_k`` and
    ``m_{i,n_i}`` otherwise.
    """
    rmask = P.full_mask & ~qmask
    if not P.is_down_closed(rmask):
        raise ContractError("R must be downward closed")
    Q = P.sub(qmask)
    if Q != mplus.model.poset:
        raise ContractError("expansion is not over the Q part of the poset")
    qidx = list(bits(qmask))
    for S in mplus.relations:
        if P.below[qidx[S.node]] & rmask:
            raise ContractError("an R node lies below an invariance node")
        if not is_irreflexive(mplus.model, S):
            raise ContractError(f"relation {S.name} is not irreflexive")
    book = build_codebook(mplus, seed)
    if len(fam.classes) < len(book.J):
        raise CapacityError(f"family has {len(fam.classes)} classes, need {len(book.J)}")
    enc = TwoLevelEncoding(P, qmask, rmask, mplus, fam, book, None)
    color_of = dict(zip(mplus.model.elements, colors))
    jc = enc.jclass()
    els, cols = [], []
    for a in mplus.model.elements:
        for D in fam.classes[: len(book.J)]:
            for b in D:
                els.append(enc.glue(a, b))
                cols.append(_color(enc, a, b, color_of, jc))
    model = TruncatedModel(P, els)
    enc = TwoLevelEncoding(P, qmask, rmask, mplus, fam, book, model)
    return ColoredModel(model, tuple(cols)), enc


def _color(enc: TwoLevelEncoding, a: Element, b: Element, color_of, jc) -> int:
    book = enc.codebook
    j = book.J[jc[b]]
    if j == ("*",):
        return book.s(color_of[a])
    i, k = j
    S = enc.expansion.relations[i]
    Qp = enc.expansion.model.poset
    r = book.pos[i][k]
    hits = [t for t in range(S.arity) if class_key(Qp, S.node, a) == class_key(Qp, S.node, r[t])]
    if len(hits) > 1:
        raise ContractError("two codebook colors for one point")
    return book.Y[i][hits[0]] if hits else book.Y[i][S.arity]


@dataclass(frozen=True)
class RecoveryKey:
    """What a reader needs besides the colored model: the split, relation shapes and ``Y``."""

    poset: FinitePoset
    qmask: int
    shapes: tuple[tuple[int, int], ...]       # (invariance node in Q, arity) per relation
    Y: tuple[tuple[int, ...], ...]
    x_skip: frozenset

    @property
    def qposet(self) -> FinitePoset:
        return self.poset.sub(self.qmask)

    def split(self, f: Element) -> tuple[Element, Element]:
        rmask = self.poset.full_mask & ~self.qmask
        return (tuple(f[i] for i in bits(self.qmask)), tuple(f[i] for i in bits(rmask)))

    def s_inverse(self, c: int) -> int:
        if c in self.x_skip:
            raise DecodeError(f"color {c} is not in X")
        return c - sum(1 for y in self.x_skip if y < c)

    def dumps(self) -> str:
        P = self.poset
        lines = ["[codebook]", "q-nodes " + " ".join(format_address(P.nodes[i]) for i in bits(self.qmask))]
        for (node, arity), ys in zip(self.shapes, self.Y):
            lines.append(f"relation {format_address(self.qposet.nodes[node])} {arity} Y " + " ".join(map(str, ys)))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, P: FinitePoset, text: str) -> "RecoveryKey":
        qmask, shapes, Y = 0, [], []
        names = {format_address(a): i for i, a in enumerate(P.nodes)}
        try:
            for ln in text.splitlines():
                parts = ln.split()
                if not parts:
                    continue
                if parts[0] == "q-nodes":
                    for t in parts[1:]:
                        qmask |= 1 << names[t]
                elif parts[0] == "relation":
                    Q = P.sub(qmask)
                    qnames = {format_address(a): i for i, a in enumerate(Q.nodes)}
                    shapes.append((qnames[parts[1]], int(parts[2])))
                    Y.append(tuple(int(t) for t in parts[4:]))
        except (KeyError, ValueError, IndexError) as exc:
            raise DecodeError("malformed codebook section") from exc
        if not qmask:
            raise DecodeError("codebook names no Q nodes")
        return cls(P, qmask, tuple(shapes), tuple(Y), frozenset(y for ys in Y for y in ys))


def _key(enc) -> RecoveryKey:
    return enc if isinstance(enc, RecoveryKey) else enc.key()


def _by_r_class(cm: ColoredModel, key: RecoveryKey) -> dict:
    by_b: dict = {}
    for e, c in zip(cm.model.elements, cm.colors):
        a, b = key.split(e)
        by_b.setdefault(b, []).append((a, c))
    return by_b


def _star(by_b: dict, key: RecoveryKey):
    for b, pts in sorted(by_b.items()):
        if all(c not in key.x_skip for _, c in pts):
            return b
    raise DecodeError("no class carries only X colors")


def recover_relations(cm: ColoredModel, enc) -> list[frozenset]:
    """Read each relation back off the colored model.

    A tuple ``(a_j)`` of ``Q``-parts over a point ``b*`` of the distinguished
    class is in relation ``i`` iff some single ``E_R``-class holds points
    ``g_j`` with ``E_{q_i}(a_j, g_j)`` and color ``m_{i,j}``.
    """
    key = _key(enc)
    by_b = _by_r_class(cm, key)
    Qp = key.qposet
    A = [a for a, _ in by_b[_star(by_b, key)]]
    out = []
    for (node, arity), ys in zip(key.shapes, key.Y):
        witness = []
        for b, pts in by_b.items():
            slots = [set() for _ in range(arity)]
            for a, c in pts:
                if c in ys[:arity]:
                    slots[ys.index(c)].add(class_key(Qp, node, a))
            witness.append(slots)
        rel = set()
        for tup in itertools.product(A, repeat=arity):
            keys = [class_key(Qp, node, a) for a in tup]
            if any(all(keys[j] in slots[j] for j in range(arity)) for slots in witness):
                rel.add(tup)
        out.append(frozenset(rel))
    return out


def recover_coloring(cm: ColoredModel, enc) -> dict[Element, int]:
    key = _key(enc)
    by_b = _by_r_class(cm, key)
    return {a: key.s_inverse(c) for a, c in by_b[_star(by_b, key)]}


def twolevel_tau(enc: TwoLevelEncoding, h: Mapping[Element, Element],
                 node_cap: int | None = 200_000) -> ConditionalAutomorphism:
    """The automorphism ``h`` on ``Q`` combined with a class permutation on ``R``."""
    book = enc.codebook
    Qp = enc.expansion.model.poset
    pi = list(range(len(enc.family.classes)))
    for i, S in enumerate(enc.expansion.relations):
        keys = {tuple(class_key(Qp, S.node, a) for a in r): k for k, r in enumerate(book.pos[i])}
        for k, r in enumerate(book.pos[i]):
            image = tuple(class_key(Qp, S.node, h[a]) for a in r)
            if image not in keys:
                raise ContractError("h does not preserve the relation")
            pi[book.J.index((i, k))] = book.J.index((i, keys[image]))
    sigma = family_lift(enc.family, pi, node_cap)
    hq = lift(enc.expansion.model, dict(h))
    return patch(enc.poset, [enc.qmask, enc.rmask], [hq, sigma])


def is_colored_automorphism(tau: ConditionalAutomorphism, a: ColoredModel, b: ColoredModel) -> bool:
    """Does ``tau`` map ``a`` onto ``b`` preserving wedges and colors?"""
    m = a.model
    img = {e: apply(tau, e) for e in m.elements}
    if set(img.values()) != set(b.model.elements):
        return False
    P = m.poset
    for x, y in itertools.combinations(m.elements, 2):
        if wedge_mask(P, img[x], img[y]) != m.wedge(x, y):
            return False
    return all(a.color(e) == b.color(img[e]) for e in m.elements)


def expansion_automorphisms(mplus: TameExpansion, limit: int = 64,
                            node_cap: int | None = 200_000) -> list[dict]:
    """Up to ``limit`` wedge automorphisms of the model that preserve every relation."""
    m = mplus.model
    els = m.elements
    # unary and binary relations prune the search; longer ones are filtered afterwards
    small = [S for S in mplus.relations if S.arity <= 2]
    c = [tuple((x,) in S.tuples for S in small if S.arity == 1) for x in els]
    W = [[(w, tuple((x, y) in S.tuples for S in small if S.arity == 2)) for y, w in zip(els, row)]
         for x, row in zip(els, m.wedge_matrix())]
    out = []
    for img in iter_isomorphisms(W, c, W, c, node_cap):
        h = {m.elements[i]: m.elements[img[i]] for i in range(len(m))}
        if mplus.preserved_by(h):
            out.append(h)
            if len(out) >= limit:
                break
    return out


# ---------------------------------------------------------------- seeded two-level instances


@dataclass(frozen=True)
class TwoLevelInstance:
    source: str                          # presentation text of Q + R
    poset: FinitePoset
    qmask: int
    expansion: TameExpansion
    colors: tuple[int, ...]
    family: IndiscernibleFamily
    seed: int


def random_tame_relation(m: TruncatedModel, q: int, arity: int, boxes: int,
                         rng: random.Random, name: str = "S") -> TameRelation:
    """A union of ``boxes`` products of pairwise distinct ``E_q``-classes."""
    P = m.poset
    keys = sorted({class_key(P, q, a) for a in m.elements})
    chosen = set()
    for _ in range(boxes):
        if len(keys) >= arity:
            chosen.add(tuple(rng.sample(keys, arity)))
    tuples = frozenset(t for t in itertools.product(m.elements, repeat=arity)
                       if tuple(class_key(P, q, a) for a in t) in chosen)
    return TameRelation(name, arity, q, tuples)


def random_finite_source(rng: random.Random, max_nodes: int = 3, max_delta: int = 3) -> str:
    k = rng.randint(1, max_nodes)
    names = "abcdefgh"[:k]
    covers = [(names[i], names[j]) for i in range(k) for j in range(i + 1, k) if rng.random() < 0.4]
    deltas = [rng.randint(2, max_delta) for _ in range(k)]
    cov = " ".join(f"({a} {b})" for a, b in covers)
    return f"(finite :nodes [{' '.join(names)}] :covers [{cov}] :delta [{' '.join(map(str, deltas))}])"


def twolevel_instance(seed: int, max_relations: int = 2, max_arity: int = 2, max_delta: int = 3,
                      n_colors: int = 3) -> TwoLevelInstance:
    from .indiscernibles import HEIGHT, build_family_on
    from .model_core import full_model
    from .poset_core import parse_presentation, truncate

    rng = random.Random(seed)
    qsrc = random_finite_source(rng, 3, max_delta)
    Q = truncate(parse_presentation(qsrc), 10**3)
    MQ = full_model(Q)
    rels = []
    for i in range(rng.randint(1, max_relations)):
        arity = rng.randint(1, max_arity)
        rels.append(random_tame_relation(MQ, rng.randrange(Q.n), arity, rng.randint(0, 3), rng, f"S{i}"))
    mplus = TameExpansion(MQ, tuple(rels))
    J = len(build_codebook(mplus, seed).J)
    src = f"(sum {qsrc} (chain omega :delta (const {max(2, J)})))"
    pres = parse_presentation(src)
    depth = Q.n + 4
    while True:
        T = truncate(pres, depth)
        qmask = sum(1 << i for i, a in enumerate(T.nodes) if a[1] == 0)
        rmask = T.full_mask & ~qmask
        try:
            fam = build_family_on(T.sub(rmask), HEIGHT, J, 1, seed, depth)
            break
        except DepthError:
            depth += 4
    # the Q part of T must be the poset the expansion lives on
    if T.sub(qmask).nodes != tuple(("+", 0, a) for a in Q.nodes):
        raise ContractError("unexpected node order in the sum")
    Qt = T.sub(qmask)
    relabel = TruncatedModel(Qt, MQ.elements)
    mplus = TameExpansion(relabel, tuple(rels))
    colors = tuple(rng.randrange(n_colors) for _ in MQ.elements)
    return TwoLevelInstance(src, T, qmask, mplus, colors, fam, seed)


def check_twolevel_instance(inst: TwoLevelInstance, rng: random.Random | None = None
                            ) -> tuple[bool, bool, str]:
    """(relations and coloring recovered, tau maps the encoding of c onto that of c o h^-1, note)."""
    rng = rng or random.Random(inst.seed)
    m = inst.expansion.model
    cm, enc = encode_twolevel(inst.poset, inst.qmask, inst.expansion, inst.colors, inst.family, inst.seed)
    rec = recover_relations(cm, enc)
    ok_rec = all(r == S.tuples for r, S in zip(rec, inst.expansion.relations))
    ok_rec = ok_rec and recover_coloring(cm, enc) == dict(zip(m.elements, inst.colors))
    hs = expansion_automorphisms(inst.expansion, 64)
    moving = [h for h in hs if any(k != v for k, v in h.items())]
    h = rng.choice(moving or hs)
    image = {h[a]: c for a, c in zip(m.elements, inst.colors)}
    cm2, _ = encode_twolevel(inst.poset, inst.qmask, inst.expansion,
                             [image[a] for a in m.elements], inst.family, inst.seed)
    tau = twolevel_tau(enc, h)
    ok_tau = is_colored_automorphism(tau, cm, cm2)
    note = "identity h" if not moving else f"{len(moving)} moving h"
    return ok_rec, ok_tau, note
