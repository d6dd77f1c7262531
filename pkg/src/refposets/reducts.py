"""Reducts of models of refining equivalence relations, decided on finite models.

A ``RefModel`` over an index set ``u`` (always containing 0 and ``OMEGA``) has
one coordinate per finite positive index plus a multiplicity coordinate.
``E_0`` is everything, ``E_OMEGA`` is equality and a finite ``E_j`` is
agreement on the coordinates of indices ``<= j``.  Definability is decided
by invariance under automorphisms.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import CapacityError, ContractError, PreconditionError

OMEGA = math.inf
Perm = tuple[int, ...]


def fmt_index(j) -> str:
    return "ω" if j == OMEGA else str(j)


def fmt_set(F: Iterable) -> str:
    return "{" + ", ".join(fmt_index(j) for j in sorted(F)) + "}"


def parse_index(tok: str):
    return OMEGA if tok in ("w", "ω", "omega", "inf") else int(tok)


@dataclass(frozen=True)
class RefModel:
    u: tuple                       # sorted, contains 0 and OMEGA
    delta: tuple[int, ...]         # one entry per finite positive index in u
    s: int = 2
    elements: tuple = field(init=False, compare=False)

    def __post_init__(self):
        u = tuple(sorted(set(self.u)))
        if 0 not in u or OMEGA not in u:
            raise ContractError("index set must contain 0 and omega")
        object.__setattr__(self, "u", u)
        if len(self.delta) != len(self.finite):
            raise ContractError("one delta value per finite positive index")
        if any(d < 2 for d in self.delta) or self.s < 2:
            raise ContractError("delta values and multiplicity must be >= 2")
        els = tuple(itertools.product(*[range(d) for d in self.delta], range(self.s)))
        object.__setattr__(self, "elements", els)

    @classmethod
    def uniform(cls, u: Iterable, delta: int = 2, s: int = 2) -> "RefModel":
        u = tuple(sorted(set(u)))
        return cls(u, tuple(delta for j in u if 0 < j < OMEGA), s)

    @property
    def finite(self) -> tuple:
        return tuple(j for j in self.u if 0 < j < OMEGA)

    @property
    def size(self) -> int:
        return len(self.elements)

    def depth(self, j) -> int:
        """Number of coordinates that ``E_j`` compares."""
        if j == OMEGA:
            return len(self.finite) + 1
        return sum(1 for i in self.finite if i <= j)

    def E(self, j, x: int, y: int) -> bool:
        d = self.depth(j)
        return self.elements[x][:d] == self.elements[y][:d]

    def relation(self, j) -> frozenset:
        n = self.size
        return frozenset((x, y) for x in range(n) for y in range(n) if self.E(j, x, y))

    def meet(self, x: int, y: int):
        """Largest ``j`` in ``u`` with ``E_j(x, y)``."""
        return max(j for j in self.u if self.E(j, x, y))

    def dumps(self) -> str:
        lines = [f"refmodel u {' '.join(fmt_index(j) for j in self.u)}",
                 f"delta {' '.join(map(str, self.delta))}", f"s {self.s}"]
        lines += [" ".join(map(str, e)) for e in self.elements]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RefModel":
        head = {}
        for ln in text.splitlines():
            parts = ln.split()
            if parts and parts[0] in ("refmodel", "delta", "s"):
                head[parts[0]] = parts[1:]
        try:
            u = [parse_index(t) for t in head["refmodel"][1:]]
            return cls(tuple(u), tuple(int(t) for t in head.get("delta", [])), int(head["s"][0]))
        except (KeyError, ValueError, IndexError) as exc:
            raise ContractError("malformed model file") from exc


@dataclass(frozen=True)
class DefinableSet:
    arity: int
    tuples: frozenset
    declared: tuple | None = None

    @classmethod
    def of(cls, arity: int, tuples: Iterable, declared=None) -> "DefinableSet":
        return cls(arity, frozenset(tuple(t) for t in tuples), declared)

    def __contains__(self, t) -> bool:
        return tuple(t) in self.tuples

    def dumps(self) -> str:
        return f"arity {self.arity}\n" + "".join(" ".join(map(str, t)) + "\n" for t in sorted(self.tuples))

    @classmethod
    def loads(cls, text: str) -> "DefinableSet":
        lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or lines[0][0] != "arity":
            raise ContractError("set file must start with 'arity n'")
        n = int(lines[0][1])
        tuples = [tuple(map(int, ln)) for ln in lines[1:]]
        if any(len(t) != n for t in tuples):
            raise ContractError("tuple length differs from the arity")
        return cls.of(n, tuples)


def relation_set(M: RefModel, j) -> DefinableSet:
    return DefinableSet.of(2, M.relation(j))


# ---------------------------------------------------------------- automorphisms


def tree_generators(M: RefModel, v: Iterable) -> list[Perm]:
    """Sibling swaps generating the automorphism group of ``(M; E_j : j in v)``.

    The group is the iterated wreath product along the finite part of ``v``;
    swapping two adjacent sibling subtrees by the coordinate-wise map at every
    internal node generates it.
    """
    levels = sorted({M.depth(j) for j in v if 0 < j < OMEGA})
    cuts = [0] + levels + [len(M.finite) + 1]
    index = {e: i for i, e in enumerate(M.elements)}
    gens = []
    for lo, hi in zip(cuts, cuts[1:]):
        if lo == hi:
            continue
        prefixes = sorted({e[:lo] for e in M.elements})
        blocks = sorted({e[lo:hi] for e in M.elements})
        for pre in prefixes:
            for b1, b2 in zip(blocks, blocks[1:]):
                perm = list(range(M.size))
                for i, e in enumerate(M.elements):
                    if e[:lo] != pre:
                        continue
                    if e[lo:hi] == b1:
                        perm[i] = index[pre + b2 + e[hi:]]
                    elif e[lo:hi] == b2:
                        perm[i] = index[pre + b1 + e[hi:]]
                gens.append(tuple(perm))
    return gens


def _preserves(perm: Perm, D: DefinableSet) -> bool:
    return all(tuple(perm[x] for x in t) in D.tuples for t in D.tuples)


def is_invariant(D: DefinableSet, M: RefModel, v: Iterable) -> bool:
    """Is ``D`` fixed setwise by every automorphism of ``M_v``?"""
    if not set(v) <= set(M.u):
        raise ContractError("v must be a subset of u")
    return all(_preserves(g, D) for g in tree_generators(M, v))


def _search(n: int, rels: Sequence[DefinableSet], fixed: dict[int, int], first: bool,
            cap: int | None = None):
    """Backtracking over bijections preserving every relation both ways."""
    order = sorted(fixed) + [x for x in range(n) if x not in fixed]
    img = [-1] * n
    used = [False] * n
    budget = [cap]
    by_new: list[list[tuple[DefinableSet, tuple]]] = [[] for _ in range(n)]
    pos = {x: i for i, x in enumerate(order)}
    for D in rels:
        for t in itertools.product(range(n), repeat=D.arity):
            last = max(pos[x] for x in t)
            by_new[last].append((D, t))

    def ok(k: int) -> bool:
        for D, t in by_new[k]:
            if (t in D.tuples) != (tuple(img[x] for x in t) in D.tuples):
                return False
        return True

    def rec(k: int):
        if budget[0] is not None:
            budget[0] -= 1
            if budget[0] < 0:
                raise CapacityError("automorphism search exceeded its cap")
        if k == n:
            yield tuple(img)
            return
        x = order[k]
        cands = [fixed[x]] if x in fixed else [y for y in range(n) if not used[y]]
        for y in cands:
            if used[y]:
                continue
            img[x], used[y] = y, True
            if ok(k):
                yield from rec(k + 1)
                if first:
                    img[x], used[y] = -1, False
                    return
            img[x], used[y] = -1, False

    yield from rec(0)


def all_automorphisms(n: int, rels: Sequence[DefinableSet], cap: int | None = 10**6) -> list[Perm]:
    return list(_search(n, rels, {}, False, cap))


def automorphism_generators(n: int, rels: Sequence[DefinableSet]) -> list[Perm]:
    """Coset representatives along the point-stabilizer chain; they generate the group."""
    gens: list[Perm] = []
    for i in range(n):
        fixed = {x: x for x in range(i)}
        for y in range(i + 1, n):
            found = next(_search(n, rels, {**fixed, i: y}, True), None)
            if found is not None:
                gens.append(found)
    return gens


def ref_automorphisms(M: RefModel, v: Iterable | None = None) -> list[Perm]:
    """Brute-force automorphism group of ``(M; E_j : j in v)``."""
    v = M.u if v is None else v
    rels = [relation_set(M, j) for j in v if 0 < j < OMEGA]
    return all_automorphisms(M.size, rels)


def orbit_closure(tuples: Iterable, group: Sequence[Perm]) -> frozenset:
    out = set()
    for t in tuples:
        for g in group:
            out.add(tuple(g[x] for x in t))
    return frozenset(out)


def tuple_orbits(M: RefModel, arity: int, group: Sequence[Perm]) -> list[frozenset]:
    seen, out = set(), []
    for t in itertools.product(range(M.size), repeat=arity):
        if t not in seen:
            orb = orbit_closure([t], group)
            seen |= orb
            out.append(orb)
    return out


# ---------------------------------------------------------------- the formulas


def is_u_irreflexive(D: DefinableSet, M: RefModel, u: Iterable) -> bool:
    k = max(u)
    return all(not M.E(k, t[i], t[j]) for t in D.tuples
               for i, j in itertools.combinations(range(D.arity), 2))


def _edist(M: RefModel, k, tup: Sequence[int]) -> bool:
    return all(not M.E(k, a, b) for a, b in itertools.combinations(tup, 2))


def _permuted(D: DefinableSet) -> list[frozenset]:
    """``D^rho`` for every rho, as tuple sets: ``t in D^rho`` iff ``(t[rho 0], ...) in D``."""
    out = []
    for rho in itertools.permutations(range(D.arity)):
        inv = [0] * D.arity
        for i, r in enumerate(rho):
            inv[r] = i
        out.append(frozenset(tuple(t[inv[i]] for i in range(D.arity)) for t in D.tuples))
    return out


def theta(D: DefinableSet, M: RefModel, cap: int = 5_000_000) -> frozenset:
    n, N = D.arity, M.size
    if n < 2:
        return frozenset(itertools.product(range(N), repeat=2))
    if N ** n * math.factorial(n) > cap:
        raise CapacityError("theta evaluation exceeds the cap")
    perms = _permuted(D)
    rest = list(itertools.product(range(N), repeat=n - 2))
    out = set()
    for a, b in itertools.product(range(N), repeat=2):
        if all(((a, b) + z in Dr) == ((b, a) + z in Dr) for Dr in perms for z in rest):
            out.add((a, b))
    return frozenset(out)


def psi(D: DefinableSet, M: RefModel, k=None, cap: int = 5_000_000) -> frozenset:
    n, N = D.arity, M.size
    k = max(M.u) if k is None else k
    if N ** (n + 1) * math.factorial(n) > cap:
        raise CapacityError("psi evaluation exceeds the cap")
    perms = _permuted(D)
    rest = list(itertools.product(range(N), repeat=n - 1))
    out = set()
    for a, b in itertools.product(range(N), repeat=2):
        good = True
        for z in rest:
            if not (_edist(M, k, (a,) + z) and _edist(M, k, (b,) + z)):
                continue
            if any(((a,) + z in Dr) != ((b,) + z in Dr) for Dr in perms):
                good = False
                break
        if good:
            out.add((a, b))
    return frozenset(out)


def phi(D: DefinableSet, M: RefModel, k=None) -> frozenset:
    return theta(D, M) & psi(D, M, k)


def projections(n: int) -> list[tuple[int, ...]]:
    """Maps ``pi: n -> n`` with ``pi(r) = r`` on the image."""
    return [p for p in itertools.product(range(n), repeat=n) if all(p[p[i]] == p[i] for i in range(n))]


def project(D: DefinableSet, M: RefModel, pi: Sequence[int], k) -> DefinableSet:
    """``D^pi_k`` on the coordinates of the image of ``pi`` (in increasing order)."""
    n = D.arity
    R = sorted(set(pi))
    out = set()
    for t in D.tuples:
        if all(M.E(k, t[i], t[j]) == (pi[i] == pi[j]) for i in range(n) for j in range(i + 1, n)):
            out.add(tuple(t[r] for r in R))
    return DefinableSet.of(len(R), out)


def decomposition_holds(D: DefinableSet, M: RefModel) -> bool:
    """``D`` agrees with the disjunction of its omega-projections on each equality pattern."""
    n = D.arity
    for t in itertools.product(range(M.size), repeat=n):
        pi = []
        for i in range(n):
            pi.append(next(j for j in range(i + 1) if t[j] == t[i]))
        R = sorted(set(pi))
        if (t in D.tuples) != (tuple(t[r] for r in R) in project(D, M, pi, OMEGA).tuples):
            return False
    return True


def drop_top(D: DefinableSet, M: RefModel, u: Sequence) -> bool:
    """Check that a ``w``-irreflexive ``D`` is ``L_w``-definable, ``w = u - {max u}``."""
    w = sorted(u)[:-1]
    if not is_u_irreflexive(D, M, w):
        raise PreconditionError("set is not irreflexive for the index set without its top")
    return is_invariant(D, M, w)


# ---------------------------------------------------------------- classification


@dataclass
class Transcript:
    lines: list = field(default_factory=list)

    def add(self, depth: int, text: str) -> None:
        self.lines.append("  " * depth + text)


def _claim(D: DefinableSet, M: RefModel, u: list, log: Transcript, depth: int) -> set:
    """``F`` with ``{D, E_k}`` and ``{E_j : j in F}`` equivalent (``D`` u-irreflexive)."""
    k = u[-1]
    if len(u) <= 2 or not D.tuples:
        log.add(depth, f"u={fmt_set(u)} arity {D.arity}: base, F={fmt_set([k])}")
        return {k}
    ell = u[-2]
    ph = phi(D, M, k)
    E_ell = M.relation(ell)
    if not E_ell <= ph:
        raise ContractError("phi does not contain E_ell")
    if ph != E_ell:
        v = [j for j in u if j != ell]
        log.add(depth, f"u={fmt_set(u)} arity {D.arity}: phi != E_{fmt_index(ell)}, drop {fmt_index(ell)}")
        if not is_invariant(D, M, v):
            raise ContractError("set is not definable without the dropped index")
        return _claim(D, M, v, log, depth + 1)
    log.add(depth, f"u={fmt_set(u)} arity {D.arity}: phi = E_{fmt_index(ell)}, split by projections")
    w = u[:-1]
    F = {ell, k}
    for pi in projections(D.arity):
        Dp = project(D, M, pi, ell)
        if not Dp.tuples:
            continue
        if not drop_top(Dp, M, u):
            raise ContractError("projection is not definable without the top index")
        F |= _claim(Dp, M, w, log, depth + 1)
    return F


def normalize(F: Iterable) -> frozenset:
    """Drop the indiscrete index 0 and include equality, which is always given."""
    return frozenset(j for j in F if j != 0) | {OMEGA}


def classify_reduct(D: DefinableSet, M: RefModel, log: Transcript | None = None) -> frozenset:
    if log is None:
        log = Transcript()
    if not is_invariant(D, M, M.u):
        raise ContractError("set is not invariant under the automorphisms of the model")
    F: set = set()
    for pi in projections(D.arity):
        Dp = project(D, M, pi, OMEGA)
        if Dp.tuples:
            log.add(0, f"projection {''.join(map(str, pi))}: {len(Dp.tuples)} tuples")
            F |= _claim(Dp, M, list(M.u), log, 1)
    F = normalize(F)
    log.add(0, f"F = {fmt_set(F)}")
    return F


def verify_equivalence(D: DefinableSet, F: Iterable, M: RefModel) -> bool:
    """Two-way invariance check between ``{D, =}`` and ``{E_j : j in F}``."""
    F = set(F)
    if not F <= set(M.u):
        raise ContractError("F must be a subset of u")
    if not is_invariant(D, M, F | {0}):
        return False
    gens = automorphism_generators(M.size, [D])
    return all(_preserves(g, relation_set(M, j)) for j in F if 0 < j < OMEGA for g in gens)


def is_minimal(D: DefinableSet, F: Iterable, M: RefModel) -> bool:
    """No finite index can be removed from ``F`` without breaking equivalence."""
    F = set(F)
    return all(not verify_equivalence(D, F - {j}, M) for j in F if 0 < j < OMEGA)


# ---------------------------------------------------------------- worked examples and suites


def e_set(M: RefModel, j) -> DefinableSet:
    return relation_set(M, j)


def e_strip(M: RefModel, lo, hi) -> DefinableSet:
    """``E_lo and not E_hi and x != y``."""
    n = M.size
    return DefinableSet.of(2, [(x, y) for x in range(n) for y in range(n)
                               if x != y and M.E(lo, x, y) and not M.E(hi, x, y)])


def random_orbit_closed(M: RefModel, arity: int, rng: random.Random, group: Sequence[Perm],
                        seeds: int | None = None) -> DefinableSet:
    n = M.size
    count = rng.randint(0, 4) if seeds is None else seeds
    picks = [tuple(rng.randrange(n) for _ in range(arity)) for _ in range(count)]
    return DefinableSet.of(arity, orbit_closure(picks, group))


def stability_report(builder, u: Sequence, variants: Sequence[tuple[int, int]] = ((2, 2), (2, 3), (3, 2))
                     ) -> dict[tuple[int, int], frozenset]:
    """``classify_reduct`` of the same formula on models with different (delta, s)."""
    out = {}
    for delta, s in variants:
        M = RefModel.uniform(u, delta, s)
        out[(delta, s)] = classify_reduct(builder(M), M)
    return out
