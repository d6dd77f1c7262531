"""Finite fragments of the canonical structure over a finite poset.

Elements are coordinate tuples in the poset's node order.  A model may carry
trailing *tag* coordinates that no relation looks at; they let several
distinct elements sit in one ``E_P``-class (used by the blow-up reduction).
Unmaterialized coordinates are implicitly 0.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import CapacityError, ClosureError, ContractError
from .poset_core import Address, FinitePoset, bits

Element = tuple


class TruncatedModel:
    def __init__(self, poset: FinitePoset, elements: Iterable[Element],
                 full: bool = False, tags: int = 0):
        self.poset = poset
        self.tags = tags
        self.elements = tuple(tuple(e) for e in elements)
        self.full = full
        self.index = {e: i for i, e in enumerate(self.elements)}
        if len(self.index) != len(self.elements):
            raise ContractError("duplicate elements")
        width = poset.n + tags
        for e in self.elements:
            if len(e) != width:
                raise ContractError(f"element {e} has {len(e)} coordinates, expected {width}")
            for i in range(poset.n):
                if not 0 <= e[i] < poset.delta[i]:
                    raise ContractError(f"element {e} out of range at node {i}")
        self._wedges: list[list[int]] | None = None

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, f) -> bool:
        return tuple(f) in self.index

    def __repr__(self) -> str:
        return f"TruncatedModel({len(self.elements)} elements over {self.poset.n} nodes)"

    def check(self, f: Element) -> None:
        if tuple(f) not in self.index:
            raise ContractError(f"{f} is not an element of the model")

    def wedge(self, f: Element, g: Element) -> int:
        return wedge_mask(self.poset, f, g)

    def wedge_matrix(self) -> list[list[int]]:
        """All pairwise wedge masks, cached."""
        if self._wedges is None:
            P, els = self.poset, self.elements
            self._wedges = [[wedge_mask(P, a, b) for b in els] for a in els]
        return self._wedges

    def core(self, f: Element) -> Element:
        return tuple(f[: self.poset.n])


def wedge_mask(P: FinitePoset, f: Sequence[int], g: Sequence[int]) -> int:
    """Bitmask of the nodes ``q`` with ``E_q(f, g)``."""
    diff = 0
    for i in range(P.n):
        if f[i] != g[i]:
            diff |= 1 << i
    if not diff:
        return P.full_mask
    out = 0
    for q in range(P.n):
        if not P.below[q] & diff:
            out |= 1 << q
    return out


def full_model(P: FinitePoset, cap: int = 250_000) -> TruncatedModel:
    """The whole product of the deltas, in lexicographic order."""
    size = P.size_of_product()
    if size > cap:
        raise CapacityError(f"full model has {size} elements, cap is {cap}")
    return TruncatedModel(P, itertools.product(*(range(d) for d in P.delta)), full=True)


def eval_E(m: TruncatedModel, p: Address, f: Element, g: Element) -> bool:
    q = m.poset.idx(p)
    m.check(f)
    m.check(g)
    return all(f[i] == g[i] for i in bits(m.poset.below[q]))


def wedge(m: TruncatedModel, f: Element, g: Element) -> frozenset:
    m.check(f)
    m.check(g)
    return frozenset(m.poset.addrs(m.wedge(f, g)))


@dataclass(frozen=True)
class QfType:
    """Pairwise wedge sets (as their maximal nodes) and the equality pattern.

    ``pairs`` lists, for ``i < j`` in lexicographic order, the sorted node
    indices of the maximal elements of ``wedge(x_i, x_j)``.
    """

    arity: int
    pairs: tuple[tuple[int, ...], ...]
    eq: tuple[int, ...]

    def pair(self, i: int, j: int) -> tuple[int, ...]:
        if i > j:
            i, j = j, i
        n = self.arity
        k = i * n - i * (i + 1) // 2 + (j - i - 1)
        return self.pairs[k]

    def pair_mask(self, P: FinitePoset, i: int, j: int) -> int:
        return P.dc_mask(sum(1 << q for q in self.pair(i, j)))


def _eq_pattern(tup: Sequence) -> tuple[int, ...]:
    labels: dict = {}
    return tuple(labels.setdefault(t, len(labels)) for t in tup)


def type_from_masks(P: FinitePoset, masks: Mapping[tuple[int, int], int],
                    eq: Sequence[int]) -> QfType:
    n = len(eq)
    pairs = tuple(tuple(P.maxima(masks[i, j])) for i in range(n) for j in range(i + 1, n))
    return QfType(n, pairs, tuple(eq))


def qftp(m: TruncatedModel, tup: Sequence[Element]) -> QfType:
    for f in tup:
        m.check(f)
    P = m.poset
    masks = {(i, j): m.wedge(tup[i], tup[j])
             for i in range(len(tup)) for j in range(i + 1, len(tup))}
    return type_from_masks(P, masks, _eq_pattern(tuple(map(tuple, tup))))


def extension_type(m: TruncatedModel, A: Sequence[Element], wedges: Sequence[int]) -> QfType:
    """The type of ``A`` plus a new point ``x`` (distinct from ``A``) with
    ``wedge(x, A[i]) = wedges[i]`` (masks, closed downward here)."""
    P = m.poset
    n = len(A)
    masks = {(i, j): m.wedge(A[i], A[j]) for i in range(n) for j in range(i + 1, n)}
    for i, w in enumerate(wedges):
        masks[i, n] = P.dc_mask(w)
    eq = list(_eq_pattern(tuple(map(tuple, A))))
    return type_from_masks(P, masks, eq + [max(eq, default=-1) + 1])


def extend_embedding(m: TruncatedModel, A: Sequence[Element], target: QfType) -> Element:
    """Realize ``target`` over ``A`` by a new coordinate vector.

    Follows the classical extension argument: copy the values forced by the
    target wedges, then at each minimal node outside them pick a value
    avoiding every element of ``A`` that the new point must split from there.
    """
    P = m.poset
    A = [tuple(a) for a in A]
    n = len(A)
    if target.arity != n + 1:
        raise ContractError("target type must have one more variable than A")
    base = qftp(m, A) if A else QfType(0, (), ())
    sub_pairs = tuple(target.pair(i, j) for i in range(n) for j in range(i + 1, n))
    if sub_pairs != base.pairs or _eq_pattern(target.eq[:n]) != base.eq:
        raise ContractError("target type disagrees with the type of A")
    for i in range(n):
        if target.eq[i] == target.eq[n]:
            return A[i]
    W = [target.pair_mask(P, i, n) for i in range(n)]
    for i in range(n):
        for j in range(n):
            # an ultrametric-style consistency requirement on wedges
            if W[j] & m.wedge(A[i], A[j]) & ~W[i]:
                raise ContractError("target type is inconsistent")
    Q = 0
    for w in W:
        Q |= w
    f = [0] * (P.n + m.tags)
    for q in bits(Q):
        src = next(a for a, w in zip(A, W) if (w >> q) & 1)
        f[q] = src[q]
    for r in P.minima(P.full_mask & ~Q):
        lower = P.strict_below(r)
        taken = {a[r] for a, w in zip(A, W) if lower & ~w == 0}
        if len(taken) >= P.delta[r]:
            raise CapacityError(
                f"node {P.names()[r]}: all {P.delta[r]} values are taken by the elements to avoid")
        f[r] = min(v for v in range(P.delta[r]) if v not in taken)
    f = tuple(f)
    got = [wedge_mask(P, f, a) for a in A]
    if got != W or f in A:
        raise ContractError("constructed element does not realize the target type")
    return f


def quotient(m: TruncatedModel, R: Iterable[Address] | int) -> TruncatedModel:
    """The model of ``E_R``-classes, realized as restrictions to ``R``."""
    P = m.poset
    mask = R if isinstance(R, int) else P.mask(R)
    if not P.is_down_closed(mask):
        raise ClosureError("quotient needs a downward-closed node set")
    keep = list(bits(mask))
    sub = P.sub(mask)
    seen: dict = {}
    for f in m.elements:
        seen.setdefault(tuple(f[i] for i in keep), None)
    return TruncatedModel(sub, seen, full=m.full)


def restrict(f: Element, P: FinitePoset, Q: Iterable[Address] | int) -> Element:
    mask = Q if isinstance(Q, int) else P.mask(Q)
    return tuple(f[i] for i in bits(mask))


def is_embedding(m: TruncatedModel, n: TruncatedModel, fmap: Mapping[Element, Element]) -> bool:
    """Injective and wedge-preserving in both directions (same poset)."""
    if m.poset != n.poset:
        return False
    items = list(fmap.items())
    if len({v for _, v in items}) != len(items):
        return False
    for a, fa in items:
        if a not in m or fa not in n:
            return False
    for (a, fa), (b, fb) in itertools.combinations(items, 2):
        if m.wedge(a, b) != n.wedge(fa, fb):
            return False
    return True


def induced_map(fmap: Mapping[Element, Element], m: TruncatedModel, n: TruncatedModel,
                R: Iterable[Address] | int) -> dict:
    """The map on ``E_R``-classes induced by an embedding."""
    if not is_embedding(m, n, fmap):
        raise ContractError("map is not an embedding")
    P = m.poset
    mask = R if isinstance(R, int) else P.mask(R)
    if not P.is_down_closed(mask):
        raise ClosureError("induced map needs a downward-closed node set")
    out: dict = {}
    for a, fa in fmap.items():
        ka, kb = restrict(a, P, mask), restrict(fa, P, mask)
        if out.setdefault(ka, kb) != kb:
            raise ContractError("map is not well defined on classes")
    return out


def shift2_holds(P: FinitePoset, blocks: Sequence[int], f: Element, g: Element) -> bool:
    """Compare ``E_p(f, g)`` with the blockwise criterion for every node ``p``.

    ``blocks`` is a partition of the node set as bitmasks.  Returns True when
    the two sides agree at every ``p``.
    """
    subs = [P.sub(b) for b in blocks]
    rest = [(restrict(f, P, b), restrict(g, P, b)) for b in blocks]
    for p in range(P.n):
        lhs = all(f[i] == g[i] for i in bits(P.below[p]))
        rhs = True
        for b, S, (fb, gb) in zip(blocks, subs, rest):
            for q in bits(b & P.below[p]):
                k = S.idx(P.nodes[q])
                if any(fb[i] != gb[i] for i in bits(S.below[k])):
                    rhs = False
        if lhs != rhs:
            return False
    return True


@dataclass(frozen=True)
class AbstractModel:
    """A structure given by class labels: ``labels[q][e]`` names the
    ``E_q``-class of element ``e``.  Used for hand-built inputs that need not
    come from coordinates."""

    poset: FinitePoset
    size: int
    labels: tuple[tuple, ...]

    @classmethod
    def of(cls, m: TruncatedModel) -> "AbstractModel":
        P = m.poset
        labels = tuple(tuple(tuple(f[i] for i in bits(P.below[q])) for f in m.elements)
                       for q in range(P.n))
        return cls(P, len(m.elements), labels)


def check_phi_forall(model: TruncatedModel | AbstractModel, R: Iterable[Address] | int) -> bool:
    """The universal axioms relative to a downward-closed ``R``: each ``E_q``
    refines the ``E_q'`` below it and splits ``E_{<q}``-classes into at most
    ``delta(q)`` parts, everything is ``E_R``-related, and ``E_P`` is equality."""
    A = model if isinstance(model, AbstractModel) else AbstractModel.of(model)
    P = A.poset
    mask = R if isinstance(R, int) else P.mask(R)
    if not P.is_down_closed(mask):
        raise ClosureError("R must be downward closed")
    n, L = A.size, A.labels
    for q in range(P.n):
        lower = list(bits(P.strict_below(q)))
        for x, y in itertools.combinations(range(n), 2):
            if L[q][x] == L[q][y] and any(L[r][x] != L[r][y] for r in lower):
                return False
        split: dict = {}
        for x in range(n):
            split.setdefault(tuple(L[r][x] for r in lower), set()).add(L[q][x])
        if any(len(s) > P.delta[q] for s in split.values()):
            return False
    for q in bits(mask):
        if len(set(L[q])) > 1:
            return False
    total = {tuple(L[q][x] for q in range(P.n)) for x in range(n)}
    return len(total) == n


@dataclass(frozen=True)
class ColoredModel:
    model: TruncatedModel
    colors: tuple[int, ...]

    def __post_init__(self):
        if len(self.colors) != len(self.model.elements):
            raise ContractError("coloring must be total")

    def color(self, f: Element) -> int:
        return self.colors[self.model.index[tuple(f)]]
