"""Automorphisms as conditional permutations, bounded exponents, nested sequences.

A ``ConditionalAutomorphism`` stores, for each node ``q``, a support mask
inside ``P_{<q}`` and a table sending value tuples on the support to a
permutation of ``range(delta(q))``.  Missing table entries mean identity.
Applying it reads the *old* values below ``q``, so every such map preserves
each ``E_p``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import CapacityError, ContractError, PartitionError, PreconditionError
from .model_core import Element, TruncatedModel, qftp, wedge_mask
from .poset_core import FinitePoset, bits, format_address, popcount
from .search import iter_isomorphisms

Perm = tuple[int, ...]

ENUM_BUDGET = 1 << 18


def _is_id(p: Perm) -> bool:
    return all(i == v for i, v in enumerate(p))


def _pmul(a: Perm, b: Perm) -> Perm:
    """``a`` after ``b``."""
    return tuple(a[v] for v in b)


def _pinv(a: Perm) -> Perm:
    out = [0] * len(a)
    for i, v in enumerate(a):
        out[v] = i
    return tuple(out)


@dataclass(frozen=True)
class ConditionalAutomorphism:
    poset: FinitePoset
    support: tuple[int, ...]
    tables: tuple[tuple[tuple[tuple[int, ...], Perm], ...], ...]

    def __post_init__(self):
        P = self.poset
        if len(self.support) != P.n or len(self.tables) != P.n:
            raise ContractError("one support and one table per node")
        for q in range(P.n):
            if self.support[q] & ~P.strict_below(q):
                raise ContractError(f"support of node {q} is not below it")
            k = popcount(self.support[q])
            for key, perm in self.tables[q]:
                if len(key) != k or sorted(perm) != list(range(P.delta[q])):
                    raise ContractError(f"bad table entry at node {q}")

    @classmethod
    def identity(cls, P: FinitePoset) -> "ConditionalAutomorphism":
        return cls(P, (0,) * P.n, ((),) * P.n)

    @classmethod
    def build(cls, P: FinitePoset, rules: Mapping[int, tuple[int, Mapping[tuple, Perm]]]
              ) -> "ConditionalAutomorphism":
        """From ``{node index: (support mask, {key: perm})}``; identity entries dropped."""
        support = [0] * P.n
        tables: list = [()] * P.n
        for q, (s, table) in rules.items():
            support[q] = s
            tables[q] = tuple(sorted((tuple(k), tuple(p)) for k, p in table.items()
                                     if not _is_id(tuple(p))))
        return cls(P, tuple(support), tuple(tables))

    @classmethod
    def local(cls, P: FinitePoset, q: int, perm: Perm,
              when: Mapping[int, int] | None = None) -> "ConditionalAutomorphism":
        """Permute the values at node ``q``, only where the listed lower
        nodes carry the listed values."""
        when = dict(when or {})
        s = sum(1 << i for i in when)
        key = tuple(when[i] for i in bits(s))
        return cls.build(P, {q: (s, {key: tuple(perm)})})

    def table(self, q: int) -> dict:
        return dict(self.tables[q])

    def local_perm(self, q: int, f: Sequence[int]) -> Perm | None:
        key = tuple(f[i] for i in bits(self.support[q]))
        for k, p in self.tables[q]:
            if k == key:
                return p
        return None

    def __call__(self, f: Element) -> Element:
        return apply(self, f)


def apply(sigma: ConditionalAutomorphism, f: Element) -> Element:
    out = list(f)
    lookups = [dict(t) for t in sigma.tables]
    for q in range(sigma.poset.n):
        if not lookups[q]:
            continue
        key = tuple(f[i] for i in bits(sigma.support[q]))
        p = lookups[q].get(key)
        if p is not None:
            out[q] = p[f[q]]
    return tuple(out)


def _closure(sigma: ConditionalAutomorphism, mask: int) -> int:
    # smallest superset of mask closed under "depends on"
    out, todo = mask, mask
    while todo:
        new = 0
        for r in bits(todo):
            new |= sigma.support[r]
        todo = new & ~out
        out |= new
    return out


def _partial_apply(sigma, x: dict[int, int], inverse: bool = False) -> dict[int, int]:
    # x is an assignment on a dependency-closed node set
    lookups = [dict(t) for t in sigma.tables]
    out: dict[int, int] = {}
    for r in sorted(x):
        src = out if inverse else x
        key = tuple(src[i] for i in bits(sigma.support[r]))
        p = lookups[r].get(key)
        if p is None:
            out[r] = x[r]
        else:
            out[r] = _pinv(p)[x[r]] if inverse else p[x[r]]
    return out


def _assignments(P: FinitePoset, mask: int):
    idx = list(bits(mask))
    total = math.prod(P.delta[i] for i in idx)
    if total > ENUM_BUDGET:
        raise CapacityError(f"{total} lower assignments exceed the enumeration budget")
    for vals in itertools.product(*(range(P.delta[i]) for i in idx)):
        yield dict(zip(idx, vals))


def compose(sigma: ConditionalAutomorphism, tau: ConditionalAutomorphism) -> ConditionalAutomorphism:
    """``sigma`` after ``tau``."""
    P = tau.poset
    if sigma.poset != P:
        raise ContractError("automorphisms over different posets")
    rules = {}
    for q in range(P.n):
        if not sigma.tables[q] and not tau.tables[q]:
            continue
        if not tau.tables[q] and not any(tau.tables[r] for r in bits(_closure(tau, sigma.support[q]))):
            rules[q] = (sigma.support[q], dict(sigma.tables[q]))
            continue
        S = tau.support[q] | _closure(tau, sigma.support[q])
        ts, ss = tau.table(q), sigma.table(q)
        ident = tuple(range(P.delta[q]))
        table = {}
        for x in _assignments(P, S):
            y = _partial_apply(tau, x)
            a = ts.get(tuple(x[i] for i in bits(tau.support[q])), ident)
            b = ss.get(tuple(y[i] for i in bits(sigma.support[q])), ident)
            table[tuple(x[i] for i in bits(S))] = _pmul(b, a)
        rules[q] = (S, table)
    return ConditionalAutomorphism.build(P, rules)


def inverse(sigma: ConditionalAutomorphism) -> ConditionalAutomorphism:
    P = sigma.poset
    rules = {}
    for q in range(P.n):
        if not sigma.tables[q]:
            continue
        S = _closure(sigma, sigma.support[q])
        if S == sigma.support[q] and not any(sigma.tables[r] for r in bits(S)):
            rules[q] = (S, {k: _pinv(p) for k, p in sigma.tables[q]})
            continue
        ts = sigma.table(q)
        table = {}
        for y in _assignments(P, S):
            x = _partial_apply(sigma, y, inverse=True)
            p = ts.get(tuple(x[i] for i in bits(sigma.support[q])))
            if p is not None:
                table[tuple(y[i] for i in bits(S))] = _pinv(p)
        rules[q] = (S, table)
    return ConditionalAutomorphism.build(P, rules)


def power(sigma: ConditionalAutomorphism, k: int) -> ConditionalAutomorphism:
    if k < 0:
        return power(inverse(sigma), -k)
    result = ConditionalAutomorphism.identity(sigma.poset)
    base = sigma
    while k:
        if k & 1:
            result = compose(base, result)
        k >>= 1
        if k:
            base = compose(base, base)
    return result


def same_action(sigma, tau, elements: Iterable[Element]) -> bool:
    return all(apply(sigma, f) == apply(tau, f) for f in elements)


def preserves_E(sigma: ConditionalAutomorphism, m: TruncatedModel) -> bool:
    """Exhaustive check: a bijection of ``m`` preserving every wedge."""
    img = [apply(sigma, f) for f in m.elements]
    if set(img) != set(m.elements):
        return False
    P = m.poset
    for i, j in itertools.combinations(range(len(img)), 2):
        if wedge_mask(P, img[i], img[j]) != m.wedge(m.elements[i], m.elements[j]):
            return False
    return True


def orbit_length(sigma: ConditionalAutomorphism, f: Element, limit: int = 10**7) -> int:
    g, n = apply(sigma, f), 1
    while g != tuple(f):
        g, n = apply(sigma, g), n + 1
        if n > limit:
            raise CapacityError("orbit longer than the limit")
    return n


def exponent_bound(m_bound: int, k: int) -> int:
    return math.factorial(m_bound) ** k


def _check_bounds(P: FinitePoset, m_bound: int, k: int, mask: int | None = None) -> None:
    mask = P.full_mask if mask is None else mask
    if any(P.heights[q] > k for q in bits(mask)):
        raise PreconditionError(f"height exceeds {k}")
    if any(P.delta[q] > m_bound for q in bits(mask)):
        raise PreconditionError(f"delta exceeds {m_bound}")


def verify_exponent(m: TruncatedModel, sigma: ConditionalAutomorphism, m_bound: int, k: int) -> bool:
    """Does ``sigma`` raised to ``(m_bound!)^k`` fix every element of ``m``?"""
    _check_bounds(m.poset, m_bound, k)
    N = exponent_bound(m_bound, k)
    return all(N % orbit_length(sigma, f) == 0 for f in m.elements)


def perm_order(perm: Sequence[int]) -> int:
    """Order of a permutation of ``range(n)`` given as an image list."""
    seen = [False] * len(perm)
    out = 1
    for s in range(len(perm)):
        if seen[s]:
            continue
        n, x = 0, s
        while not seen[x]:
            seen[x] = True
            x = perm[x]
            n += 1
        out = math.lcm(out, n)
    return out


def orbit_lengths(P: FinitePoset) -> set[int]:
    """Every orbit length an automorphism of the full model can produce.

    At node ``q`` the element's restriction below and at ``q`` cycles with
    length ``lcm(L_r : r < q) * c_q`` where ``c_q`` is the length of the
    cycle through the current value, free in ``1..delta(q)``; the orbit of the
    element is the lcm over all nodes.
    """
    out = set()
    for cs in itertools.product(*(range(1, d + 1) for d in P.delta)):
        L = [0] * P.n
        for q in range(P.n):
            below = 1
            for r in bits(P.strict_below(q)):
                below = math.lcm(below, L[r])
            L[q] = below * cs[q]
        total = 1
        for v in L:
            total = math.lcm(total, v)
        out.add(total)
    return out


def group_exponent(P: FinitePoset) -> int:
    e = 1
    for v in orbit_lengths(P):
        e = math.lcm(e, v)
    return e


def conditional_group_order(P: FinitePoset) -> int:
    """Order of the conditional permutation group acting on the full model."""
    out = 1
    for q in range(P.n):
        lower = math.prod(P.delta[r] for r in bits(P.strict_below(q)))
        out *= math.factorial(P.delta[q]) ** lower
    return out


def patch(P: FinitePoset, blocks: Sequence[int], sigmas: Sequence[ConditionalAutomorphism]
          ) -> ConditionalAutomorphism:
    """Act by ``sigmas[i]`` on the coordinates of block ``i``."""
    if len(blocks) != len(sigmas):
        raise PartitionError("one automorphism per block")
    seen = 0
    for b in blocks:
        if b & seen:
            raise PartitionError("blocks overlap")
        seen |= b
    if seen != P.full_mask:
        raise PartitionError("blocks do not cover the poset")
    rules = {}
    for b, s in zip(blocks, sigmas):
        keep = list(bits(b))
        if s.poset.nodes != tuple(P.nodes[i] for i in keep):
            raise PartitionError("automorphism is not over the block's subposet")
        for k, q in enumerate(keep):
            if s.tables[k]:
                sup = sum(1 << keep[j] for j in bits(s.support[k]))
                rules[q] = (sup, dict(s.tables[k]))
    return ConditionalAutomorphism.build(P, rules)


def lift(m: TruncatedModel, mapping: Mapping[Element, Element]) -> ConditionalAutomorphism:
    """A conditional automorphism agreeing with a wedge-preserving bijection of ``m``."""
    P = m.poset
    rules = {}
    for q in range(P.n):
        lower = P.strict_below(q)
        partial: dict[tuple, dict[int, int]] = {}
        for f, g in mapping.items():
            key = tuple(f[i] for i in bits(lower))
            d = partial.setdefault(key, {})
            if d.setdefault(f[q], g[q]) != g[q]:
                raise ContractError("map does not preserve the equivalence relations")
        table = {}
        for key, d in partial.items():
            if len(set(d.values())) != len(d):
                raise ContractError("map is not injective on a class")
            free = [v for v in range(P.delta[q]) if v not in d.values()]
            perm = []
            for v in range(P.delta[q]):
                perm.append(d[v] if v in d else free.pop(0))
            table[key] = tuple(perm)
        rules[q] = (lower, table)
    sigma = ConditionalAutomorphism.build(P, rules)
    for f, g in mapping.items():
        if apply(sigma, f)[: P.n] != tuple(g)[: P.n]:
            raise ContractError("lift does not reproduce the map")
    return sigma


def enumerate_automorphisms(m: TruncatedModel, cap: int = 24, node_cap: int | None = None
                            ) -> list[tuple[int, ...]]:
    """All wedge-preserving bijections of ``m`` as index permutations."""
    if len(m.elements) > cap:
        raise CapacityError(f"model has {len(m.elements)} elements, cap is {cap}")
    W = m.wedge_matrix()
    c = [0] * len(m.elements)
    return [tuple(h) for h in iter_isomorphisms(W, c, W, c, node_cap)]


def is_nested(seq: Sequence[Element], m: TruncatedModel) -> bool:
    seq = [tuple(a) for a in seq]
    for n in range(len(seq) - 1):
        if qftp(m, seq[:n] + [seq[n]]) != qftp(m, seq[:n] + [seq[n + 1]]):
            return False
    return True


def nested_stabilization(seq: Sequence[Element], q: int, m_bound: int, k: int,
                         m: TruncatedModel, assume_nested: bool = False) -> bool:
    """Check ``E_q(f_n, f_n')`` for all ``n, n' >= m_bound * k``."""
    P = m.poset
    if not assume_nested and not is_nested(seq, m):
        raise PreconditionError("sequence is not nested")
    _check_bounds(P, m_bound, k, P.below[q])
    start = m_bound * k
    tail = [tuple(f) for f in seq[start:]]
    low = list(bits(P.below[q]))
    return all(all(a[i] == tail[0][i] for i in low) for a in tail)


def nested_sequences(m: TruncatedModel, length: int) -> Iterable[list[Element]]:
    """Every nested sequence of exactly ``length`` elements, by backtracking."""
    els = m.elements
    W = m.wedge_matrix()

    # qf types are determined by pairwise wedges, so compare wedge rows
    def rec(seq):
        if len(seq) == length:
            yield [els[i] for i in seq]
            return
        n = len(seq) - 1
        for f in range(len(els)):
            if n >= 0 and any(W[f][seq[j]] != W[seq[n]][seq[j]] for j in range(n)):
                continue
            seq.append(f)
            yield from rec(seq)
            seq.pop()

    if length == 0:
        yield []
        return
    yield from rec([])


# ---------------------------------------------------------------- text format


def dumps_automorphism(sigma: ConditionalAutomorphism) -> str:
    P = sigma.poset
    names = P.names()
    lines = []
    for q in range(P.n):
        sup = list(bits(sigma.support[q]))
        for key, perm in sigma.tables[q]:
            lhs = ",".join(f"{names[i]}={v}" for i, v in zip(sup, key)) or "*"
            lines.append(f"node {names[q]} | {lhs} -> [{' '.join(map(str, perm))}]")
    return "\n".join(lines) + ("\n" if lines else "")


def loads_automorphism(P: FinitePoset, text: str) -> ConditionalAutomorphism:
    names = {n: i for i, n in enumerate(P.names())}
    rules: dict[int, tuple[int, dict]] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            head, rest = line.split("|", 1)
            lhs, rhs = rest.split("->", 1)
            q = names[head.split()[1]]
            assign = {}
            if lhs.strip() != "*":
                for part in lhs.split(","):
                    k, v = part.split("=")
                    assign[names[k.strip()]] = int(v)
            perm = tuple(int(v) for v in rhs.strip().strip("[]").split())
        except (ValueError, KeyError, IndexError) as exc:
            raise ContractError(f"bad automorphism line: {raw!r}") from exc
        s = sum(1 << i for i in assign)
        old = rules.setdefault(q, (s, {}))
        if old[0] != s:
            raise ContractError(f"node {format_address(P.nodes[q])} mixes supports")
        old[1][tuple(assign[i] for i in bits(s))] = perm
    return ConditionalAutomorphism.build(P, rules)
