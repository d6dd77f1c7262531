"""Back-and-forth between colored models along the level sets of an omega-chain.

Maps between models are plain dicts from elements to elements.  A ``Pair``
holds a 1-embedding in one direction together with its partial inverse.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .dynamics import ConditionalAutomorphism, apply
from .errors import CapExceeded, ContractError, PoolExhausted, PreconditionError
from .model_core import ColoredModel, Element, TruncatedModel, wedge_mask
from .poset_core import MIN_UNBOUNDED, FinitePoset, Presentation, bits, truncate
from .search import iter_isomorphisms

Map = dict


# ---------------------------------------------------------------- 1-embeddings


@dataclass(frozen=True)
class EmbeddingVerdict:
    holds: bool
    cap: int
    complete: bool          # the cap covered every tuple length that matters
    reason: str = ""

    def __bool__(self) -> bool:
        return self.holds


def is_colored_embedding(f: Mapping, M: ColoredModel, N: ColoredModel) -> bool:
    if set(f) != set(M.model.elements):
        return False
    if len(set(f.values())) != len(f) or not all(y in N.model.index for y in f.values()):
        return False
    P = M.model.poset
    for x in M.model.elements:
        if M.color(x) != N.color(f[x]):
            return False
    for x, y in itertools.combinations(M.model.elements, 2):
        if wedge_mask(P, x, y) != wedge_mask(P, f[x], f[y]):
            return False
    return True


def _signature(P: FinitePoset, color, tup: Sequence[Element], b: Element) -> tuple:
    return tuple(wedge_mask(P, a, b) for a in tup) + (color(b),)


def check_one_embedding(f: Mapping, M: ColoredModel, N: ColoredModel, cap: int = 3
                        ) -> EmbeddingVerdict:
    """Embedding check plus relative qf-saturation of ``f(M)`` in ``N``.

    For each tuple ``a`` from the image (length at most ``cap``) and each
    ``b`` in ``N`` some ``a*`` in the image realizes the type of ``b`` over
    ``a``.  Types are pairwise wedges plus colors, so order and repetitions
    inside ``a`` do not matter.
    """
    if not is_colored_embedding(f, M, N):
        return EmbeddingVerdict(False, cap, True, "not an embedding")
    P = M.model.poset
    image = sorted(set(f.values()))
    top = min(cap, len(image))
    for r in range(top + 1):
        for tup in itertools.combinations(image, r):
            have = {_signature(P, N.color, tup, a) for a in image}
            for b in N.model.elements:
                if _signature(P, N.color, tup, b) not in have:
                    return EmbeddingVerdict(False, cap, True, f"type over {r}-tuple omitted")
    return EmbeddingVerdict(True, cap, cap >= len(image))


# ---------------------------------------------------------------- levels


@dataclass(frozen=True)
class Leveled:
    """A truncation with a chosen chain ``p_0 < p_1 < ...`` and its level sets."""

    poset: FinitePoset
    chain: tuple[int, ...]
    levels: tuple[int, ...]        # node masks Q_n
    rmask: int                     # downward closure of the chain

    def agree_chain(self, a: Element, b: Element, n: int) -> bool:
        """``E_{p_m}(a, b)`` for every ``m < n``."""
        return all(a[i] == b[i] for m in range(n) for i in bits(self.poset.below[self.chain[m]]))

    def e_r(self, a: Element, b: Element) -> bool:
        return all(a[i] == b[i] for i in bits(self.rmask))

    def key(self, n: int, a: Element) -> tuple:
        return tuple(a[i] for i in bits(self.levels[n]))


def leveled(pres: Presentation, depth: int) -> Leveled:
    if pres.classify().verdict != MIN_UNBOUNDED:
        raise PreconditionError("back-and-forth needs a minimally unbounded presentation")
    T = truncate(pres, depth)
    chain = []
    for p in pres.omega_chain(depth):
        if p not in T.index:
            break
        chain.append(T.index[p])
    if not chain:
        raise PreconditionError("truncation contains no chain node")
    levels = []
    for p in chain:
        levels.append(T.full_mask & ~(T.above[p] & ~(1 << p)))
    r = 0
    for p in chain:
        r |= T.below[p]
    return Leveled(T, tuple(chain), tuple(levels), r)


def quotient_map(L: Leveled, n: int, f: Mapping) -> dict:
    """``[f]_{Q_n}`` as a map between ``E_{Q_n}``-class keys."""
    out: dict = {}
    for x, y in f.items():
        k, v = L.key(n, x), L.key(n, y)
        if out.setdefault(k, v) != v:
            raise ContractError("map does not respect E_Q")
    return out


def self_embedding_order(f: Mapping, limit: int = 10**6) -> int:
    """Least ``k > 0`` with ``f^k = id`` for an injective self-map of a finite set."""
    if len(set(f.values())) != len(f) or set(f.values()) != set(f):
        raise ContractError("self-map is not injective on a finite set")
    k = 1
    for x in f:
        n, y = 1, f[x]
        while y != x:
            y = f[y]
            n += 1
        k = math.lcm(k, n)
        if k > limit:
            raise CapExceeded("order exceeds limit")
    return k


def compose(f: Mapping, g: Mapping) -> dict:
    """``f`` after ``g`` on the part of ``dom g`` that ``f`` can take."""
    return {x: f[y] for x, y in g.items() if y in f}


def inverse_mod_level(L: Leveled, f: Mapping, g: Mapping, n: int) -> dict:
    """``h = (g f)^(k-1) g`` with ``[h]_{Q_n}`` inverse to ``[f]_{Q_n}``.

    ``f`` goes one way and ``g`` the other; both must be total.
    """
    gf = quotient_map(L, n, compose(g, f))
    k = self_embedding_order(gf)
    if self_embedding_order(quotient_map(L, n, compose(f, g))) != k:
        raise ContractError("quotient orders disagree")
    h = dict(g)
    for _ in range(k - 1):
        h = compose(compose(g, f), h)
    if any(v != x for x, v in quotient_map(L, n, compose(h, f)).items()):
        raise ContractError("h is not a quotient inverse of f")
    return h


def restriction_onto_check(L: Leveled, f: Mapping, a: Element, M: TruncatedModel,
                           N: TruncatedModel) -> bool:
    """Does ``f`` map ``[a]_{E_R}`` onto ``[f(a)]_{E_R}``?"""
    src = {f[x] for x in M.elements if L.e_r(x, a) and x in f}
    dst = {y for y in N.elements if L.e_r(y, f[a])}
    return src == dst


# ---------------------------------------------------------------- the system


@dataclass(frozen=True)
class Pair:
    f: Mapping                       # left -> right
    g: Mapping                       # right -> left
    total_left: bool                 # f is the 1-embedding, g its inverse

    def swap(self) -> "Pair":
        return Pair(self.g, self.f, not self.total_left)

    @staticmethod
    def forward(f: Mapping) -> "Pair":
        return Pair(dict(f), {y: x for x, y in f.items()}, True)


@dataclass(frozen=True)
class BFState:
    a: tuple = ()
    b: tuple = ()
    pairs: tuple = ()

    def swap(self) -> "BFState":
        return BFState(self.b, self.a, tuple(p.swap() for p in self.pairs))

    def mapping(self) -> dict:
        return dict(zip(self.a, self.b))


@dataclass
class BFContext:
    L: Leveled
    M: ColoredModel
    N: ColoredModel
    pool_f: list                      # total maps M -> N
    pool_g: list                      # total maps N -> M
    log: list = field(default_factory=list)
    _qcache: dict = field(default_factory=dict)

    def swap(self) -> "BFContext":
        return BFContext(self.L, self.N, self.M, self.pool_g, self.pool_f, self.log, {})

    def qmap(self, p: Pair, n: int) -> dict:
        """``[f]_{Q_n}`` of the left-to-right part of ``p``."""
        k = (id(p.f), id(p.g), n)
        if k not in self._qcache:
            if p.total_left:
                q = quotient_map(self.L, n, p.f)
            else:
                q = {v: u for u, v in quotient_map(self.L, n, p.g).items()}
            self._qcache[k] = q
        return self._qcache[k]


def check_state(ctx: BFContext, st: BFState) -> bool:
    """Clauses (1)-(4) of the system, plus equality of qf-and-color types."""
    L, M, N = ctx.L, ctx.M, ctx.N
    for a, b, p in zip(st.a, st.b, st.pairs):
        total, other = (p.f, M) if p.total_left else (p.g, N)
        if set(total) != set(other.model.elements):
            return False
        if p.f.get(a) != b or p.g.get(b) != a:
            return False
    rev = ctx.swap()
    for i, j in itertools.combinations(range(len(st.a)), 2):
        for n in range(len(L.levels)):
            if L.agree_chain(st.a[i], st.a[j], n) and ctx.qmap(st.pairs[i], n) != ctx.qmap(st.pairs[j], n):
                return False
            if L.agree_chain(st.b[i], st.b[j], n) and rev.qmap(st.pairs[i].swap(), n) != rev.qmap(st.pairs[j].swap(), n):
                return False
    P = L.poset
    for i, j in itertools.combinations(range(len(st.a)), 2):
        if wedge_mask(P, st.a[i], st.a[j]) != wedge_mask(P, st.b[i], st.b[j]):
            return False
    return all(M.color(a) == N.color(b) for a, b in zip(st.a, st.b))


def bf_extend(ctx: BFContext, st: BFState, a_new: Element, check: bool = True
              ) -> tuple[Element, BFState, int]:
    """Forth step: match ``a_new``.  Returns the image, the new state and the case used."""
    L = ctx.L
    if not ctx.pool_f:
        raise PoolExhausted("no 1-embedding registered")
    if not st.a:
        pair, case = Pair.forward(ctx.pool_f[0]), 1
        b = pair.f[a_new]
    else:
        hit = next((i for i, a in enumerate(st.a) if L.e_r(a_new, a)), None)
        if hit is not None:
            pair, case = st.pairs[hit], 2
            if a_new in pair.f:
                b = pair.f[a_new]
            else:
                cands = [y for y in ctx.N.model.elements
                         if L.e_r(y, st.b[hit]) and pair.g.get(y) == a_new]
                if not cands:
                    raise PoolExhausted("restriction to the E_R class is not onto")
                b = cands[0]
        else:
            n = max(n for n in range(len(L.chain) + 1)
                    for a in st.a if L.agree_chain(a_new, a, n))
            i = next(i for i, a in enumerate(st.a) if L.agree_chain(a_new, a, n))
            pair = st.pairs[i]
            if a_new in pair.f:
                case, b = 3, pair.f[a_new]
            else:
                case = 4
                if pair.total_left:
                    raise ContractError("total map misses a point")
                h = None
                for f in ctx.pool_f:
                    try:
                        h = inverse_mod_level(L, pair.g, f, n)
                        break
                    except ContractError:
                        continue
                if h is None:
                    raise PoolExhausted("no quotient inverse found in the pool")
                ctx.pool_f.append(h)
                pair = Pair.forward(h)
                b = h[a_new]
    new = BFState(st.a + (a_new,), st.b + (b,), st.pairs + (pair,))
    if check and not check_state(ctx, new):
        raise ContractError(f"case {case} produced an invalid state")
    ctx.log.append(case)
    return b, new, case


def sb_isomorphism(M: ColoredModel, N: ColoredModel, f: Mapping, g: Mapping, L: Leveled,
                   check: bool = True) -> tuple[dict, list[int]]:
    """Alternate forth and back steps until both models are exhausted."""
    ctx = BFContext(L, M, N, [dict(f)], [dict(g)])
    st = BFState()
    left, right = list(M.model.elements), list(N.model.elements)
    while len(st.a) < len(left) or len(st.b) < len(right):
        a = next((x for x in left if x not in st.a), None)
        if a is not None:
            _, st, _ = bf_extend(ctx, st, a, check)
        b = next((y for y in right if y not in st.b), None)
        if b is not None:
            rctx = ctx.swap()
            _, rst, _ = bf_extend(rctx, st.swap(), b, check)
            st = rst.swap()
    h = st.mapping()
    if len(set(h.values())) != len(h):
        raise ContractError("back-and-forth produced a non-injective map")
    return h, ctx.log


def is_colored_isomorphism(h: Mapping, M: ColoredModel, N: ColoredModel) -> bool:
    """Independent check: bijection, wedges and colors preserved."""
    if set(h.values()) != set(N.model.elements):
        return False
    return is_colored_embedding(h, M, N)


# ---------------------------------------------------------------- instances


def random_conditional(P: FinitePoset, rng: random.Random, cap: int = 4096) -> ConditionalAutomorphism:
    """A uniformly random conditional permutation with full lower support."""
    rules = {}
    for q in range(P.n):
        lower = P.strict_below(q)
        keys = list(itertools.product(*[range(P.delta[r]) for r in bits(lower)]))
        if len(keys) > cap:
            raise CapExceeded("too many lower assignments")
        table = {}
        for k in keys:
            perm = list(range(P.delta[q]))
            rng.shuffle(perm)
            table[k] = tuple(perm)
        rules[q] = (lower, table)
    return ConditionalAutomorphism.build(P, rules)


def color_automorphisms(M: ColoredModel, limit: int = 32, node_cap: int | None = 100_000
                        ) -> list[dict]:
    m = M.model
    W = m.wedge_matrix()
    c = list(M.colors)
    out = []
    for img in iter_isomorphisms(W, c, W, c, node_cap):
        out.append({m.elements[i]: m.elements[img[i]] for i in range(len(m))})
        if len(out) >= limit:
            break
    return out


@dataclass(frozen=True)
class SBInstance:
    L: Leveled
    M: ColoredModel
    N: ColoredModel
    f: dict
    g: dict


def sb_instance(pres: Presentation, depth: int, size: int, colors: int, seed: int) -> SBInstance:
    """``N`` is a conditional-automorphism image of ``M``; ``f``, ``g`` are twisted by automorphisms."""
    rng = random.Random(seed)
    L = leveled(pres, depth)
    P = L.poset
    universe = list(itertools.product(*[range(d) for d in P.delta]))
    els = sorted(rng.sample(universe, min(size, len(universe))))
    cs = tuple(rng.randrange(colors) for _ in els)
    M = ColoredModel(TruncatedModel(P, els), cs)
    sigma = random_conditional(P, rng)
    img = {e: tuple(apply(sigma, e)) for e in els}
    N = ColoredModel(TruncatedModel(P, sorted(img.values())),
                     tuple(M.color(x) for x in sorted(els, key=lambda e: img[e])))
    autM = color_automorphisms(M)
    alpha, beta = rng.choice(autM), rng.choice(autM)
    f = {x: img[alpha[x]] for x in els}
    inv = {y: x for x, y in img.items()}
    g = {y: beta[inv[y]] for y in N.model.elements}
    return SBInstance(L, M, N, f, g)
