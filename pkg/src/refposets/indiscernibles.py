"""Dense-suitable classes, indiscernible families and cross-cutting witnesses.

Two classes of finite sets are used, depending on why the poset is
unbounded:

* ``DELTA`` (delta unbounded): ``A`` is in the class when delta stays
  below the bound on the union of pairwise wedges of ``A``;
* ``HEIGHT`` (height unbounded): the union of pairwise wedges has height
  at most the bound.

Wedges are taken over the materialized nodes of a truncation, whose deltas
and heights agree with the presentation because truncations are downward
closed.  Every construction returns the threshold ``n`` it chose.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .dynamics import ConditionalAutomorphism, apply, lift, patch
from .errors import CapExceeded, ContractError, DepthError, UnsupportedError
from .model_core import Element, TruncatedModel, wedge_mask
from .poset_core import (Address, FinitePoset, OrthogonalWitness, Presentation, SplitWitness,
                         bits, is_orthogonal, truncate, witness_mask)
from .search import iter_isomorphisms

DELTA = "DeltaBounded"
HEIGHT = "HeightBounded"


@dataclass(frozen=True)
class SuitableClassSpec:
    case: str
    bound: int
    poset: FinitePoset = field(compare=False)

    @classmethod
    def for_presentation(cls, pres: Presentation, depth: int, bound: int) -> "SuitableClassSpec":
        if pres.delta_bound() is None:
            return cls(DELTA, bound, truncate(pres, depth))
        if pres.height_bound() is None:
            return cls(HEIGHT, bound, truncate(pres, depth))
        raise UnsupportedError("bounded presentations have no dense-suitable class")

    def with_bound(self, bound: int) -> "SuitableClassSpec":
        return SuitableClassSpec(self.case, bound, self.poset)


@dataclass(frozen=True)
class Step:
    """Result of a construction: the new element and the threshold used."""

    element: Element
    threshold: int


def wedge_union(P: FinitePoset, A: Sequence[Element]) -> int:
    out = 0
    for a, b in itertools.combinations(A, 2):
        out |= wedge_mask(P, a, b)
    return out


def _height(P: FinitePoset, mask: int) -> int:
    return max((P.heights[q] for q in bits(mask)), default=0)


def _max_delta(P: FinitePoset, mask: int) -> int:
    return max((P.delta[q] for q in bits(mask)), default=0)


def measure(spec: SuitableClassSpec, A: Sequence[Element]) -> int:
    """The quantity the class bounds: max delta, or height, of the wedge union."""
    W = wedge_union(spec.poset, A)
    return _max_delta(spec.poset, W) if spec.case == DELTA else _height(spec.poset, W)


def k_member(spec: SuitableClassSpec, A: Sequence[Element]) -> bool:
    return measure(spec, list(A)) <= spec.bound


def _free_value(d: int, avoid: set[int], prefer: int) -> int:
    if prefer not in avoid:
        return prefer
    for v in range(d):
        if v not in avoid:
            return v
    raise DepthError("no free value at a node")


def extend_in_K(spec: SuitableClassSpec, A: Sequence[Element], Q: Sequence[Address],
                f: Element) -> Step:
    """An ``h`` agreeing with ``f`` on ``Q``, outside ``A``, keeping the class."""
    P = spec.poset
    A = [tuple(a) for a in A]
    f = tuple(f)
    qmask = P.mask(Q)
    W = wedge_union(P, A)
    h = list(f)
    if spec.case == DELTA:
        n = max(_max_delta(P, qmask | W), len(A)) + 1
        fresh = [p for p in range(P.n) if P.delta[p] >= n]
        if A and not fresh:
            raise DepthError(f"no materialized node has delta >= {n}")
        for p in fresh:
            h[p] = _free_value(P.delta[p], {a[p] for a in A}, f[p])
    else:
        n = max(_height(P, qmask), _height(P, W)) + 1
        for i, a in enumerate(A):
            level = [p for p in range(P.n) if P.heights[p] == n + i + 1]
            if not level:
                raise DepthError(f"no materialized node of height {n + i + 1}")
            for p in level:
                h[p] = _free_value(P.delta[p], {a[p]}, f[p])
    return Step(tuple(h), n)


def disjoint_amalgamate(spec: SuitableClassSpec, A: Sequence[Element], f: Element,
                        h: Element) -> Step:
    """An ``f'`` with the same wedges to ``A`` as ``f`` and ``f' != h``."""
    P = spec.poset
    A = [tuple(a) for a in A]
    f, h = tuple(f), tuple(h)
    B, C = A + [f], A + [h]
    WB, WC = wedge_union(P, B), wedge_union(P, C)
    out = list(f)
    if spec.case == DELTA:
        n = max(_max_delta(P, WB | WC), len(C))
        fresh = [p for p in range(P.n) if P.delta[p] > n]
        if not fresh:
            raise DepthError(f"no materialized node has delta > {n}")
        for p in fresh:
            out[p] = _free_value(P.delta[p], {c[p] for c in C}, f[p])
    else:
        n = max(_height(P, WB), _height(P, WC)) + 1
        fresh = [p for p in range(P.n) if P.heights[p] > n]
        if not fresh:
            raise DepthError(f"no materialized node of height > {n}")
        for p in fresh:
            out[p] = _free_value(P.delta[p], {h[p]}, f[p])
    return Step(tuple(out), n)


def random_amalgamation_instance(spec: SuitableClassSpec, rng: random.Random, max_A: int = 3,
                                 tries: int = 1000) -> tuple[list[Element], Element, Element]:
    """Seeded ``A, f, h`` with ``A + f`` and ``A + h`` inside the class.

    Points are perturbations of one base point so that wedges are not all empty.
    """
    P = spec.poset
    size = P.delta if spec.case == DELTA else P.heights
    high = [x > spec.bound for x in size]
    for _ in range(tries):
        base = [rng.randrange(d) for d in P.delta]

        pools = [rng.sample(range(d), d) for d in P.delta]

        def near() -> Element:
            # above the bound, coordinates come from a shuffled pool so they rarely repeat
            return tuple((pools[i].pop() if pools[i] else rng.randrange(P.delta[i])) if high[i]
                         else (v if rng.random() < 0.5 else rng.randrange(P.delta[i]))
                         for i, v in enumerate(base))

        A = list(dict.fromkeys(near() for _ in range(rng.randint(0, max_A))))
        f, h = near(), near()
        if f in A or h in A:
            continue
        if k_member(spec, A + [f]) and k_member(spec, A + [h]):
            return A, f, h
    raise DepthError("could not sample an instance inside the class")


def check_amalgamation(spec: SuitableClassSpec, A: Sequence[Element], f: Element, h: Element,
                       step: Step) -> bool:
    """Exact postconditions: same wedges to ``A`` as ``f``, differs from ``h``, bounded by the threshold."""
    P = spec.poset
    g = step.element
    if g == tuple(h):
        return False
    if any(wedge_mask(P, g, a) != wedge_mask(P, f, a) for a in A):
        return False
    return k_member(spec.with_bound(step.threshold), list(A) + [tuple(h), g])


# ---------------------------------------------------------------- families


@dataclass(frozen=True)
class IndiscernibleFamily:
    model: TruncatedModel
    classes: tuple[tuple[Element, ...], ...]
    depth: int
    case: str
    threshold: int

    def __post_init__(self):
        seen: set = set()
        for D in self.classes:
            if not D:
                raise ContractError("family classes must be nonempty")
            for e in D:
                if e in seen:
                    raise ContractError("family classes must be disjoint")
                seen.add(e)

    def class_of(self) -> dict[Element, int]:
        return {e: i for i, D in enumerate(self.classes) for e in D}


def _case_for(pres: Presentation) -> str:
    if pres.delta_bound() is None:
        return DELTA
    if pres.height_bound() is None:
        return HEIGHT
    raise UnsupportedError("bounded presentations admit no indiscernible families")


def build_family(pres: Presentation, N: int, size: int, depth: int, seed: int = 0
                 ) -> IndiscernibleFamily:
    """``N`` disjoint classes of ``size`` elements in the truncation at ``depth``."""
    case = _case_for(pres)
    return build_family_on(truncate(pres, depth), case, N, size, seed, depth)


def build_family_on(P: FinitePoset, case: str, N: int, size: int, seed: int = 0,
                    depth: int | None = None) -> IndiscernibleFamily:
    """Family construction on a finite poset for a given class case.

    A base class ``D_0`` is grown by ``extend_in_K`` from seeded random
    points.  Every class is then a copy of ``D_0`` that keeps the base
    coordinates below a common threshold ``n`` and is separated from the
    other copies above it.  Case ``DELTA``: coordinates with delta > n get
    pairwise distinct values.  Case ``HEIGHT``: nodes of height n+1 carry the
    class index (spread over several heights when delta is too small).
    """
    rng = random.Random(seed)
    spec = SuitableClassSpec(case, 0, P)
    base: list[Element] = []
    for _ in range(size):
        f = tuple(rng.randrange(d) for d in P.delta)
        base.append(extend_in_K(spec, base, [], f).element)
    W = wedge_union(P, base)
    classes: list[list[Element]] = [[] for _ in range(N)]
    if case == DELTA:
        n = max(_max_delta(P, W), N * size - 1)
        fresh = [p for p in range(P.n) if P.delta[p] > n]
        if not fresh:
            raise DepthError(f"no materialized node has delta > {n}")
        for c in range(N):
            for j, b in enumerate(base):
                e = list(b)
                for p in fresh:
                    e[p] = c * size + j
                classes[c].append(tuple(e))
    else:
        n = _height(P, W) + 1
        digits = _class_digits(P, n, N)
        for c in range(N):
            for j, b in enumerate(base):
                e = list(b)
                for p in range(P.n):
                    if P.heights[p] > n:
                        e[p] = digits(c, p)
                classes[c].append(tuple(e))
    model = TruncatedModel(P, sorted({e for D in classes for e in D}))
    return IndiscernibleFamily(model, tuple(tuple(D) for D in classes),
                               P.n if depth is None else depth, case, n)


def _class_digits(P: FinitePoset, n: int, N: int) -> Callable[[int, int], int]:
    # encode the class index on the nodes above height n, one digit per height
    radix: list[int] = []
    cap = 1
    h = n + 1
    while cap < N:
        level = [p for p in range(P.n) if P.heights[p] == h]
        if not level:
            raise DepthError(f"not enough heights above {n} to separate {N} classes")
        r = min(P.delta[p] for p in level)
        radix.append(r)
        cap *= r
        h += 1

    def digit(c: int, p: int) -> int:
        t = P.heights[p] - n - 1
        if t >= len(radix):
            return 0
        for r in radix[:t]:
            c //= r
        return c % radix[t]

    return digit


def _all_perms(N: int) -> list[tuple[int, ...]]:
    return list(itertools.permutations(range(N)))


def find_class_automorphism(m: TruncatedModel, classes: Sequence[Sequence[Element]],
                            sigma: Sequence[int], node_cap: int | None = 200_000
                            ) -> dict[Element, Element] | None:
    """A wedge-preserving bijection of ``m`` sending class ``i`` onto class ``sigma[i]``."""
    cls = {e: i for i, D in enumerate(classes) for e in D}
    inv = {v: i for i, v in enumerate(sigma)}
    els = m.elements
    c1 = [cls.get(e, -1) for e in els]
    c2 = [inv[cls[e]] if e in cls else -1 for e in els]
    W = m.wedge_matrix()
    for img in iter_isomorphisms(W, c1, W, c2, node_cap):
        return {els[i]: els[img[i]] for i in range(len(els))}
    return None


def verify_family(m: TruncatedModel, fam: IndiscernibleFamily, perms="all",
                  node_cap: int | None = 200_000) -> bool:
    """Does every permutation of the class indices lift to an automorphism of ``m``?

    Raises ``CapExceeded`` when the search is inconclusive.
    """
    N = len(fam.classes)
    if any(len(D) != len(fam.classes[0]) for D in fam.classes):
        if perms == "all" or any(tuple(p) != tuple(range(N)) for p in perms):
            return False
    for sigma in (_all_perms(N) if perms == "all" else perms):
        h = find_class_automorphism(m, fam.classes, sigma, node_cap)
        if h is None:
            return False
        tau = lift(m, h)
        for i, D in enumerate(fam.classes):
            if {apply(tau, e) for e in D} != set(fam.classes[sigma[i]]):
                return False
    return True


def family_lift(fam: IndiscernibleFamily, sigma: Sequence[int],
                node_cap: int | None = 200_000) -> ConditionalAutomorphism:
    """A conditional automorphism realizing ``sigma`` on the classes."""
    h = find_class_automorphism(fam.model, fam.classes, sigma, node_cap)
    if h is None:
        raise ContractError("permutation does not lift")
    return lift(fam.model, h)


# ---------------------------------------------------------------- cross-cutting


@dataclass(frozen=True)
class CrossCuttingWitness:
    model: TruncatedModel
    sides: tuple[int, int]          # node masks Q_0, Q_1
    closures: tuple[int, int]       # dc(Q_0), dc(Q_1): E^i = E_{dc(Q_i)}
    rest: int
    families: tuple[IndiscernibleFamily, IndiscernibleFamily]
    classes: tuple[tuple[tuple[Element, ...], ...], tuple[tuple[Element, ...], ...]]


def _orthogonal_sides(pres: Presentation, T: FinitePoset) -> tuple[int, int]:
    ok, wit = pres.narrow()
    if not ok and isinstance(wit, OrthogonalWitness):
        return witness_mask(T, wit.left), witness_mask(T, wit.right)
    w = pres.classify().witness
    if isinstance(w, SplitWitness):
        q = witness_mask(T, w.member)
        rest = T.full_mask & ~q
        if is_orthogonal(T, T.addrs(q), T.addrs(rest)):
            return q, rest
    raise UnsupportedError("no orthogonal unbounded pair is available")


def build_cross_cutting(pres: Presentation, depth: int, N0: int = 3, N1: int = 3,
                        size: int = 1, seed: int = 0,
                        sides: tuple[int, int] | None = None,
                        cases: tuple[str, str] | None = None) -> CrossCuttingWitness:
    """Families on two orthogonal pieces, glued as in the product construction.

    The model is every ``f`` whose restriction to ``Q_i`` lies in the
    ``i``-th family and which is 0 on the remaining nodes.
    """
    T = truncate(pres, depth)
    q0, q1 = sides if sides is not None else _orthogonal_sides(pres, T)
    if q0 & q1 or not is_orthogonal(T, T.addrs(q0), T.addrs(q1)):
        raise UnsupportedError("sides are not orthogonal")
    if cases is None:
        c = _case_for(pres)
        cases = (c, c)
    fams = (build_family_on(T.sub(q0), cases[0], N0, size, seed, depth),
            build_family_on(T.sub(q1), cases[1], N1, size, seed + 1, depth))
    idx0, idx1 = list(bits(q0)), list(bits(q1))

    def glue(x: Element, y: Element) -> Element:
        e = [0] * T.n
        for i, v in zip(idx0, x):
            e[i] = v
        for i, v in zip(idx1, y):
            e[i] = v
        return tuple(e)

    X = [e for D in fams[0].classes for e in D]
    Y = [e for D in fams[1].classes for e in D]
    model = TruncatedModel(T, sorted(glue(x, y) for x in X for y in Y))
    cls0 = tuple(tuple(glue(x, y) for x in D for y in Y) for D in fams[0].classes)
    cls1 = tuple(tuple(glue(x, y) for x in X for y in D) for D in fams[1].classes)
    rest = T.full_mask & ~(q0 | q1)
    return CrossCuttingWitness(model, (q0, q1), (T.dc_mask(q0), T.dc_mask(q1)), rest,
                               fams, (cls0, cls1))


def _E(P: FinitePoset, mask: int, a: Element, b: Element) -> bool:
    return all(a[i] == b[i] for i in bits(mask))


def saturate(w: CrossCuttingWitness) -> CrossCuttingWitness:
    """Replace each class by its ``E^i``-saturation inside the model."""
    P = w.model.poset
    out = []
    for i in range(2):
        cl = []
        for D in w.classes[i]:
            sat = {e for e in w.model.elements if any(_E(P, w.closures[i], e, d) for d in D)}
            cl.append(tuple(sorted(sat)))
        out.append(tuple(cl))
    return CrossCuttingWitness(w.model, w.sides, w.closures, w.rest, w.families, tuple(out))


def check_clause1(w: CrossCuttingWitness) -> bool:
    P, els = w.model.poset, w.model.elements
    A = {e for D in w.classes[0] for e in D}
    B = {e for D in w.classes[1] for e in D}
    return all(any(_E(P, w.closures[0], c, a) and _E(P, w.closures[1], c, b) for c in els)
               for a in A for b in B)


def check_clause2(w: CrossCuttingWitness) -> bool:
    P = w.model.poset
    for i in range(2):
        for n, n2 in itertools.combinations(range(len(w.classes[i])), 2):
            for a in w.classes[i][n]:
                for b in w.classes[i][n2]:
                    if _E(P, w.closures[i], a, b):
                        return False
    return True


def patched_automorphism(w: CrossCuttingWitness, s0: Sequence[int], s1: Sequence[int],
                         node_cap: int | None = 200_000) -> ConditionalAutomorphism:
    P = w.model.poset
    t0 = family_lift(w.families[0], s0, node_cap)
    t1 = family_lift(w.families[1], s1, node_cap)
    blocks = [w.sides[0], w.sides[1]]
    sigmas = [t0, t1]
    if w.rest:
        blocks.append(w.rest)
        sigmas.append(ConditionalAutomorphism.identity(P.sub(w.rest)))
    return patch(P, blocks, sigmas)


def check_clause3(w: CrossCuttingWitness, s0: Sequence[int], s1: Sequence[int],
                  node_cap: int | None = 200_000) -> bool:
    try:
        tau = patched_automorphism(w, s0, s1, node_cap)
    except ContractError:
        return False
    m = w.model
    img = {e: apply(tau, e) for e in m.elements}
    if set(img.values()) != set(m.elements):
        return False
    P = m.poset
    for a, b in itertools.combinations(m.elements, 2):
        if wedge_mask(P, img[a], img[b]) != m.wedge(a, b):
            return False
    for i, s in ((0, s0), (1, s1)):
        for n, D in enumerate(w.classes[i]):
            if {img[e] for e in D} != set(w.classes[i][s[n]]):
                return False
    return True


def verify_cross_cutting(w: CrossCuttingWitness, perm_pairs="all",
                         node_cap: int | None = 200_000) -> bool:
    if not (check_clause1(w) and check_clause2(w)):
        return False
    if perm_pairs == "all":
        perm_pairs = list(itertools.product(_all_perms(len(w.classes[0])),
                                            _all_perms(len(w.classes[1]))))
    return all(check_clause3(w, s0, s1, node_cap) for s0, s1 in perm_pairs)


__all__ = [
    "DELTA", "HEIGHT", "SuitableClassSpec", "Step", "k_member", "measure", "wedge_union",
    "extend_in_K", "disjoint_amalgamate", "random_amalgamation_instance", "check_amalgamation", "IndiscernibleFamily", "build_family",
    "build_family_on", "verify_family", "family_lift", "find_class_automorphism",
    "CrossCuttingWitness", "build_cross_cutting", "verify_cross_cutting", "saturate",
    "check_clause1", "check_clause2", "check_clause3", "CapExceeded",
]
