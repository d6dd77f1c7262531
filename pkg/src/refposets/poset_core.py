"""Down-finite posets with a splitting function, presented as combinator trees.

A presentation is a small AST.  Every node kind knows how to enumerate its
points along a linear extension, compare two addresses, list the finite
down-set of an address and report the splitting value ``delta``.  Structural
questions (boundedness, narrowness, omega-chains) are answered from the AST
alone, each answer carrying a witness that can be checked on truncations.

Addresses are plain hashable values:

* finite poset node: its name (``str``)
* omega-chain / omega-antichain: ``int``
* product: ``("*", a, b)``
* disjoint sum: ``("+", i, a)``
* omega-sum: ``("s", n, x)`` with ``x`` an address inside fiber ``n``
* chain with fibers: ``("p", n)`` on the spine, ``("q", n, x)`` in fiber ``n``
"""
from __future__ import annotations

import hashlib
import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Iterable, Iterator, Sequence

from .errors import AddressError, NoChainError, ParseError, PreconditionError, UnsupportedError

Address = Hashable

BOUNDED = "Bounded"
MIN_UNBOUNDED = "MinimallyUnbounded"
UNBOUNDED_NOT_MIN = "UnboundedNotMinimal"


# ---------------------------------------------------------------- delta rules


@dataclass(frozen=True)
class Const:
    c: int

    @property
    def least(self) -> int:
        return self.c

    def __call__(self, n: int) -> int:
        return self.c

    @property
    def bound(self) -> int | None:
        return self.c

    def sexpr(self) -> str:
        return f"(const {self.c})"


@dataclass(frozen=True)
class Table:
    values: tuple[int, ...]
    default: int

    @property
    def least(self) -> int:
        return min(self.values + (self.default,))

    def __call__(self, n: int) -> int:
        return self.values[n] if n < len(self.values) else self.default

    @property
    def bound(self) -> int | None:
        return max(self.values + (self.default,))

    def sexpr(self) -> str:
        vals = " ".join(map(str, self.values))
        return f"(table [{vals}] :default {self.default})"


@dataclass(frozen=True)
class Affine:
    a: int
    b: int

    def __post_init__(self):
        if self.a < 0:
            raise ParseError("affine rule needs a >= 0")

    @property
    def least(self) -> int:
        return self.b

    def __call__(self, n: int) -> int:
        return self.a * n + self.b

    @property
    def bound(self) -> int | None:
        return self.b if self.a == 0 else None

    def sexpr(self) -> str:
        return f"(affine {self.a} {self.b})"


Rule = Const | Table | Affine


def _need(rule: Rule, least: int = 2) -> Rule:
    if rule.least < least:
        raise ParseError(f"rule {rule.sexpr()} takes values below {least}")
    return rule


# ---------------------------------------------------------------- witnesses


@dataclass(frozen=True)
class BoundedWitness:
    height: int
    delta: int


@dataclass(frozen=True)
class ChainWitness:
    """An omega-chain, produced on demand by ``nodes(k)``."""

    generator: Callable[[int], list] = field(compare=False)

    def nodes(self, k: int) -> list:
        return self.generator(k)


@dataclass(frozen=True)
class SplitWitness:
    """A downward-closed ``Q`` such that both ``Q`` and its complement are unbounded."""

    description: str
    member: Callable[[Address], bool] = field(compare=False)


@dataclass(frozen=True)
class OrthogonalWitness:
    """Two pairwise-incomparable sets, both of unbounded height."""

    description: str
    left: Callable[[Address], bool] = field(compare=False)
    right: Callable[[Address], bool] = field(compare=False)


@dataclass(frozen=True)
class Classification:
    verdict: str
    witness: object = field(compare=False)


# ---------------------------------------------------------------- helpers


class _Stream:
    """Random access into a (possibly infinite) iterator, buffered."""

    def __init__(self, it: Iterable):
        self._it = iter(it)
        self._buf: list = []
        self._done = False

    def get(self, i: int):
        while len(self._buf) <= i and not self._done:
            try:
                self._buf.append(next(self._it))
            except StopIteration:
                self._done = True
        return self._buf[i] if i < len(self._buf) else None


def _even(n: int) -> bool:
    return n % 2 == 0


# ---------------------------------------------------------------- AST nodes


class Presentation:
    """Common interface of all AST node kinds."""

    def nodes(self) -> Iterator[Address]:
        raise NotImplementedError

    def size(self) -> int | None:
        return None

    def contains(self, a: Address) -> bool:
        raise NotImplementedError

    def leq(self, a: Address, b: Address) -> bool:
        raise NotImplementedError

    def down(self, a: Address) -> list:
        raise NotImplementedError

    def delta(self, a: Address) -> int:
        raise NotImplementedError

    def height_bound(self) -> int | None:
        raise NotImplementedError

    def delta_bound(self) -> int | None:
        raise NotImplementedError

    def classify(self) -> Classification:
        raise NotImplementedError

    def narrow(self) -> tuple[bool, OrthogonalWitness | None]:
        raise NotImplementedError

    def omega_chain(self, k: int) -> list:
        raise NoChainError(f"{type(self).__name__} has bounded height")

    def sexpr(self) -> str:
        raise NotImplementedError

    # shared conveniences

    def bounded(self) -> bool:
        return self.height_bound() is not None and self.delta_bound() is not None

    def first(self) -> Address:
        return next(iter(self.nodes()))

    def check(self, a: Address) -> None:
        if not self.contains(a):
            raise AddressError(f"{format_address(a)} is not a node")

    def ast_hash(self) -> str:
        return hashlib.sha256(self.sexpr().encode()).hexdigest()[:16]

    def _bounded_or_none(self) -> Classification | None:
        h, d = self.height_bound(), self.delta_bound()
        if h is not None and d is not None:
            return Classification(BOUNDED, BoundedWitness(h, d))
        return None


@dataclass(frozen=True, eq=True)
class FiniteExplicit(Presentation):
    names: tuple[str, ...]
    covers: tuple[tuple[str, str], ...]
    deltas: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ParseError("duplicate node names")
        if len(self.deltas) != len(self.names):
            raise ParseError("delta table length differs from node count")
        if self.deltas and min(self.deltas) < 2:
            raise ParseError("delta values must be >= 2")
        known = set(self.names)
        for a, b in self.covers:
            if a not in known or b not in known:
                raise ParseError(f"cover ({a} {b}) names an unknown node")
        self._order  # raises on cycles

    @cached_property
    def _below(self) -> dict[str, frozenset]:
        # reflexive-transitive closure of the cover relation
        lower = {n: {n} for n in self.names}
        changed = True
        while changed:
            changed = False
            for a, b in self.covers:
                new = lower[a] - lower[b]
                if new:
                    lower[b] |= new
                    changed = True
        for a, b in self.covers:
            if b in lower[a]:
                raise ParseError("cover relation has a cycle")
        return {n: frozenset(s) for n, s in lower.items()}

    @cached_property
    def _order(self) -> tuple[str, ...]:
        below = self._below
        pos = {n: i for i, n in enumerate(self.names)}
        return tuple(sorted(self.names, key=lambda n: (_ht(n, below), pos[n])))

    @cached_property
    def _delta(self) -> dict[str, int]:
        return dict(zip(self.names, self.deltas))

    def nodes(self):
        return iter(self._order)

    def size(self):
        return len(self.names)

    def contains(self, a):
        return isinstance(a, str) and a in self._delta

    def leq(self, a, b):
        return a in self._below[b]

    def down(self, a):
        return [n for n in self._order if n in self._below[a]]

    def delta(self, a):
        return self._delta[a]

    def height_bound(self):
        return max((_ht(n, self._below) for n in self.names), default=0)

    def delta_bound(self):
        return max(self.deltas, default=2)

    def classify(self):
        return self._bounded_or_none()

    def narrow(self):
        return True, None

    def sexpr(self):
        covers = " ".join(f"({a} {b})" for a, b in self.covers)
        return (f"(finite :nodes [{' '.join(self.names)}] :covers [{covers}]"
                f" :delta [{' '.join(map(str, self.deltas))}])")


def _ht(n: str, below: dict[str, frozenset]) -> int:
    best = 1
    for m in below[n]:
        if m != n:
            best = max(best, 1 + _ht(m, below))
    return best


@dataclass(frozen=True)
class OmegaChain(Presentation):
    rule: Rule

    def __post_init__(self):
        _need(self.rule)

    def nodes(self):
        return itertools.count()

    def contains(self, a):
        return isinstance(a, int) and not isinstance(a, bool) and a >= 0

    def leq(self, a, b):
        return a <= b

    def down(self, a):
        return list(range(a + 1))

    def delta(self, a):
        return self.rule(a)

    def height_bound(self):
        return None

    def delta_bound(self):
        return self.rule.bound

    def classify(self):
        return Classification(MIN_UNBOUNDED, ChainWitness(self.omega_chain))

    def narrow(self):
        return True, None

    def omega_chain(self, k):
        return list(range(k))

    def sexpr(self):
        return f"(chain omega :delta {self.rule.sexpr()})"


@dataclass(frozen=True)
class OmegaAntichain(Presentation):
    rule: Rule

    def __post_init__(self):
        _need(self.rule)

    def nodes(self):
        return itertools.count()

    def contains(self, a):
        return isinstance(a, int) and not isinstance(a, bool) and a >= 0

    def leq(self, a, b):
        return a == b

    def down(self, a):
        return [a]

    def delta(self, a):
        return self.rule(a)

    def height_bound(self):
        return 1

    def delta_bound(self):
        return self.rule.bound

    def classify(self):
        done = self._bounded_or_none()
        if done:
            return done
        return Classification(UNBOUNDED_NOT_MIN, SplitWitness("even-indexed points", _even))

    def narrow(self):
        return True, None

    def sexpr(self):
        return f"(antichain omega :delta {self.rule.sexpr()})"


@dataclass(frozen=True)
class Product(Presentation):
    """Componentwise order; delta of a pair is the larger of the two deltas."""

    left: Presentation
    right: Presentation

    def nodes(self):
        sa, sb = _Stream(self.left.nodes()), _Stream(self.right.nodes())
        na, nb = self.left.size(), self.right.size()
        for s in itertools.count():
            if na is not None and nb is not None and s > na + nb - 2:
                return
            for i in range(s + 1):
                a = sa.get(i)
                if a is None:
                    break
                b = sb.get(s - i)
                if b is not None:
                    yield ("*", a, b)

    def size(self):
        na, nb = self.left.size(), self.right.size()
        return None if na is None or nb is None else na * nb

    def contains(self, a):
        return (isinstance(a, tuple) and len(a) == 3 and a[0] == "*"
                and self.left.contains(a[1]) and self.right.contains(a[2]))

    def leq(self, a, b):
        return self.left.leq(a[1], b[1]) and self.right.leq(a[2], b[2])

    def down(self, a):
        return [("*", x, y) for x in self.left.down(a[1]) for y in self.right.down(a[2])]

    def delta(self, a):
        return max(self.left.delta(a[1]), self.right.delta(a[2]))

    def height_bound(self):
        ha, hb = self.left.height_bound(), self.right.height_bound()
        return None if ha is None or hb is None else ha + hb - 1

    def delta_bound(self):
        da, db = self.left.delta_bound(), self.right.delta_bound()
        return None if da is None or db is None else max(da, db)

    def classify(self):
        done = self._bounded_or_none()
        if done:
            return done
        a_unb, b_unb = not self.left.bounded(), not self.right.bounded()
        if a_unb and self.right.size() == 1:
            b0 = self.right.first()
            return _lift(self.left.classify(), lambda x: ("*", x, b0), lambda q: q[1])
        if b_unb and self.left.size() == 1:
            a0 = self.left.first()
            return _lift(self.right.classify(), lambda y: ("*", a0, y), lambda q: q[2])
        if a_unb:
            b0 = self.right.first()
            return Classification(UNBOUNDED_NOT_MIN, SplitWitness(
                "left factor times the first (minimal) right node",
                lambda q, b0=b0: q[2] == b0))
        a0 = self.left.first()
        return Classification(UNBOUNDED_NOT_MIN, SplitWitness(
            "first (minimal) left node times right factor",
            lambda q, a0=a0: q[1] == a0))

    def narrow(self):
        A, B = self.left, self.right
        ha, hb = A.height_bound(), B.height_bound()
        if ha is not None and hb is not None:
            return True, None
        if ha is None and hb is None:
            c, d = A.omega_chain(2), B.omega_chain(2)
            wit = OrthogonalWitness(
                "chain above the left start at the right start, and vice versa",
                lambda q, c=c, d=d: q[2] == d[0] and A.leq(c[1], q[1]) and _on_chain(A, q[1]),
                lambda q, c=c, d=d: q[1] == c[0] and B.leq(d[1], q[2]) and _on_chain(B, q[2]))
            return False, wit
        unb, other, side = (A, B, 1) if ha is None else (B, A, 2)
        if other.size() == 1:
            ok, wit = unb.narrow()
            if ok:
                return True, None
            o0 = other.first()
            return False, OrthogonalWitness(
                wit.description,
                lambda q: q[3 - side] == o0 and wit.left(q[side]),
                lambda q: q[3 - side] == o0 and wit.right(q[side]))
        pair = _incomparable_pair(other)
        if pair is None:
            raise UnsupportedError("narrowness of an unbounded-height factor times a finite chain")
        x, y = pair
        return False, OrthogonalWitness(
            "unbounded factor over two incomparable nodes of the other factor",
            lambda q: q[3 - side] == x, lambda q: q[3 - side] == y)

    def omega_chain(self, k):
        if self.left.height_bound() is None:
            b0 = self.right.first()
            return [("*", a, b0) for a in self.left.omega_chain(k)]
        if self.right.height_bound() is None:
            a0 = self.left.first()
            return [("*", a0, b) for b in self.right.omega_chain(k)]
        raise NoChainError("product of bounded-height factors")

    def sexpr(self):
        return f"(product {self.left.sexpr()} {self.right.sexpr()})"


def _on_chain(P: Presentation, a) -> bool:
    # membership in the canonical omega-chain of P
    k = 2
    while True:
        chain = P.omega_chain(k)
        if a in chain:
            return True
        if not P.leq(chain[-1], a):
            return False
        k *= 2


def _incomparable_pair(P: Presentation, scan: int = 64):
    seen = []
    for i, a in enumerate(P.nodes()):
        if i >= scan:
            break
        for b in seen:
            if not P.leq(a, b) and not P.leq(b, a):
                return b, a
        seen.append(a)
    return None


def _lift(cls: Classification, wrap, unwrap) -> Classification:
    w = cls.witness
    if isinstance(w, ChainWitness):
        return Classification(cls.verdict, ChainWitness(lambda k: [wrap(x) for x in w.nodes(k)]))
    if isinstance(w, SplitWitness):
        return Classification(cls.verdict, SplitWitness(w.description, lambda q: w.member(unwrap(q))))
    return cls


@dataclass(frozen=True)
class DisjointSum(Presentation):
    parts: tuple[Presentation, ...]

    def nodes(self):
        streams = [p.nodes() for p in self.parts]
        live = list(range(len(streams)))
        while live:
            nxt = []
            for i in live:
                a = next(streams[i], _DONE)
                if a is not _DONE:
                    yield ("+", i, a)
                    nxt.append(i)
            live = nxt

    def size(self):
        sizes = [p.size() for p in self.parts]
        return None if None in sizes else sum(sizes)

    def contains(self, a):
        return (isinstance(a, tuple) and len(a) == 3 and a[0] == "+"
                and isinstance(a[1], int) and 0 <= a[1] < len(self.parts)
                and self.parts[a[1]].contains(a[2]))

    def leq(self, a, b):
        return a[1] == b[1] and self.parts[a[1]].leq(a[2], b[2])

    def down(self, a):
        return [("+", a[1], x) for x in self.parts[a[1]].down(a[2])]

    def delta(self, a):
        return self.parts[a[1]].delta(a[2])

    def height_bound(self):
        hs = [p.height_bound() for p in self.parts]
        return None if None in hs else max(hs)

    def delta_bound(self):
        ds = [p.delta_bound() for p in self.parts]
        return None if None in ds else max(ds)

    def classify(self):
        done = self._bounded_or_none()
        if done:
            return done
        unb = [i for i, p in enumerate(self.parts) if not p.bounded()]
        if len(unb) >= 2:
            i = unb[0]
            return Classification(UNBOUNDED_NOT_MIN, SplitWitness(
                f"summand {i}", lambda q, i=i: q[1] == i))
        i = unb[0]
        return _lift(self.parts[i].classify(), lambda x: ("+", i, x),
                     lambda q: q[2] if q[1] == i else _NOWHERE)

    def narrow(self):
        tall = [i for i, p in enumerate(self.parts) if p.height_bound() is None]
        if len(tall) >= 2:
            i, j = tall[:2]
            return False, OrthogonalWitness(
                f"summands {i} and {j}", lambda q, i=i: q[1] == i, lambda q, j=j: q[1] == j)
        if not tall:
            return True, None
        i = tall[0]
        ok, wit = self.parts[i].narrow()
        if ok:
            return True, None
        return False, OrthogonalWitness(
            wit.description,
            lambda q: q[1] == i and wit.left(q[2]),
            lambda q: q[1] == i and wit.right(q[2]))

    def omega_chain(self, k):
        for i, p in enumerate(self.parts):
            if p.height_bound() is None:
                return [("+", i, x) for x in p.omega_chain(k)]
        raise NoChainError("all summands have bounded height")

    def sexpr(self):
        return "(sum " + " ".join(p.sexpr() for p in self.parts) + ")"


_DONE = object()
_NOWHERE = object()


@dataclass(frozen=True)
class ChainFiber:
    """Fiber ``n`` is a chain of length ``length(n)``."""

    length: Rule

    def __post_init__(self):
        _need(self.length, 1)

    def sexpr(self) -> str:
        return f"(chain {self.length.sexpr()})"


@dataclass(frozen=True)
class AntichainFiber:
    """An antichain of ``k`` points, or infinitely many when ``k`` is None."""

    k: int | None

    def sexpr(self) -> str:
        return f"(antichain {'omega' if self.k is None else self.k})"


def _fiber_nodes(fiber, n: int) -> list:
    if isinstance(fiber, FiniteExplicit):
        return list(fiber._order)
    return list(range(fiber.length(n)))


@dataclass(frozen=True)
class OmegaSum(Presentation):
    """Disjoint union of fibers ``F_0, F_1, ...``.

    When a delta rule is given it overrides the fiber's own table, with
    summand ``n`` using ``rule(n)`` at every node.
    """

    fiber: FiniteExplicit | ChainFiber
    rule: Rule | None = None

    def __post_init__(self):
        if isinstance(self.fiber, ChainFiber) and self.rule is None:
            raise ParseError("omega-sum of chains needs a :delta rule")
        if self.rule is not None:
            _need(self.rule)

    def nodes(self):
        cache: dict[int, list] = {}
        for s in itertools.count():
            for n in range(s + 1):
                if n not in cache:
                    cache[n] = _fiber_nodes(self.fiber, n)
                f = cache[n]
                if s - n < len(f):
                    yield ("s", n, f[s - n])

    def contains(self, a):
        if not (isinstance(a, tuple) and len(a) == 3 and a[0] == "s"):
            return False
        n, x = a[1], a[2]
        if not isinstance(n, int) or n < 0:
            return False
        if isinstance(self.fiber, FiniteExplicit):
            return self.fiber.contains(x)
        return isinstance(x, int) and 0 <= x < self.fiber.length(n)

    def leq(self, a, b):
        if a[1] != b[1]:
            return False
        if isinstance(self.fiber, FiniteExplicit):
            return self.fiber.leq(a[2], b[2])
        return a[2] <= b[2]

    def down(self, a):
        n, x = a[1], a[2]
        if isinstance(self.fiber, FiniteExplicit):
            return [("s", n, y) for y in self.fiber.down(x)]
        return [("s", n, y) for y in range(x + 1)]

    def delta(self, a):
        if self.rule is not None:
            return self.rule(a[1])
        return self.fiber.delta(a[2])

    def height_bound(self):
        if isinstance(self.fiber, FiniteExplicit):
            return self.fiber.height_bound()
        return self.fiber.length.bound

    def delta_bound(self):
        if self.rule is not None:
            return self.rule.bound
        return self.fiber.delta_bound()

    def classify(self):
        done = self._bounded_or_none()
        if done:
            return done
        return Classification(UNBOUNDED_NOT_MIN, SplitWitness(
            "even-indexed summands", lambda q: _even(q[1])))

    def narrow(self):
        if self.height_bound() is not None:
            return True, None
        return False, OrthogonalWitness(
            "even-indexed against odd-indexed summands",
            lambda q: _even(q[1]), lambda q: not _even(q[1]))

    def sexpr(self):
        tail = f" :delta {self.rule.sexpr()}" if self.rule is not None else ""
        return f"(omega-sum :fiber {self.fiber.sexpr()}{tail})"


@dataclass(frozen=True)
class ChainWithFibers(Presentation):
    """Spine ``p_0 < p_1 < ...`` with a copy of the fiber placed above each ``p_n``.

    Spine nodes use ``rule(n)``; antichain fibers use ``rule(n)`` as well,
    finite explicit fibers keep their own table.
    """

    fiber: FiniteExplicit | AntichainFiber
    rule: Rule

    def __post_init__(self):
        _need(self.rule)

    def _fiber_at(self, m: int):
        if isinstance(self.fiber, FiniteExplicit):
            order = self.fiber._order
            return order[m] if m < len(order) else None
        if self.fiber.k is not None and m >= self.fiber.k:
            return None
        return m

    def nodes(self):
        for s in itertools.count():
            yield ("p", s)
            for n in range(s + 1):
                x = self._fiber_at(s - n)
                if x is not None:
                    yield ("q", n, x)

    def _fiber_contains(self, x) -> bool:
        if isinstance(self.fiber, FiniteExplicit):
            return self.fiber.contains(x)
        return (isinstance(x, int) and x >= 0
                and (self.fiber.k is None or x < self.fiber.k))

    def contains(self, a):
        if not isinstance(a, tuple) or not a or not isinstance(a[1] if len(a) > 1 else None, int):
            return False
        if a[0] == "p" and len(a) == 2:
            return a[1] >= 0
        return a[0] == "q" and len(a) == 3 and a[1] >= 0 and self._fiber_contains(a[2])

    def _fiber_leq(self, x, y) -> bool:
        if isinstance(self.fiber, FiniteExplicit):
            return self.fiber.leq(x, y)
        return x == y

    def leq(self, a, b):
        if a[0] == "p":
            return a[1] <= b[1]
        return b[0] == "q" and a[1] == b[1] and self._fiber_leq(a[2], b[2])

    def down(self, a):
        spine = [("p", j) for j in range(a[1] + 1)]
        if a[0] == "p":
            return spine
        if isinstance(self.fiber, FiniteExplicit):
            return spine + [("q", a[1], y) for y in self.fiber.down(a[2])]
        return spine + [a]

    def delta(self, a):
        if a[0] == "q" and isinstance(self.fiber, FiniteExplicit):
            return self.fiber.delta(a[2])
        return self.rule(a[1])

    def height_bound(self):
        return None

    def delta_bound(self):
        b = self.rule.bound
        if b is not None and isinstance(self.fiber, FiniteExplicit):
            b = max(b, self.fiber.delta_bound())
        return b

    def classify(self):
        if isinstance(self.fiber, AntichainFiber) and self.rule.bound is None:
            return Classification(UNBOUNDED_NOT_MIN, SplitWitness(
                "the spine", lambda q: q[0] == "p"))
        return Classification(MIN_UNBOUNDED, ChainWitness(self.omega_chain))

    def narrow(self):
        return True, None

    def omega_chain(self, k):
        return [("p", i) for i in range(k)]

    def sexpr(self):
        return f"(chain-with-fibers :fiber {self.fiber.sexpr()} :delta {self.rule.sexpr()})"


# ---------------------------------------------------------------- s-expression reader



_TOKEN = re.compile(r"\s+|;[^\n]*|([()\[\]])|([^\s()\[\];]+)")


class _Vec(list):
    pass


def _read(text: str):
    stack: list[list] = [[]]
    closers: list[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"bad character at offset {pos}")
        pos = m.end()
        br, atom = m.group(1), m.group(2)
        if br in ("(", "["):
            stack.append(_Vec() if br == "[" else [])
            closers.append(")" if br == "(" else "]")
        elif br in (")", "]"):
            if not closers or closers.pop() != br:
                raise ParseError(f"unbalanced '{br}'")
            done = stack.pop()
            stack[-1].append(done)
        elif atom is not None:
            stack[-1].append(int(atom) if re.fullmatch(r"-?\d+", atom) else atom)
    if closers:
        raise ParseError("unclosed bracket")
    if len(stack[0]) != 1:
        raise ParseError("expected exactly one expression")
    return stack[0][0]


def _split_kw(form: list) -> tuple[list, dict]:
    pos, kw = [], {}
    i = 0
    while i < len(form):
        x = form[i]
        if isinstance(x, str) and x.startswith(":"):
            if i + 1 >= len(form):
                raise ParseError(f"keyword {x} without value")
            kw[x[1:]] = form[i + 1]
            i += 2
        else:
            pos.append(x)
            i += 1
    return pos, kw


def _rule(form) -> Rule:
    if not isinstance(form, list) or isinstance(form, _Vec) or not form:
        raise ParseError(f"expected a delta rule, got {form!r}")
    head, (args, kw) = form[0], _split_kw(form[1:])
    try:
        if head == "const":
            return Const(int(args[0]))
        if head == "table":
            return Table(tuple(int(v) for v in args[0]), int(kw.get("default", args[0][-1])))
        if head == "affine":
            return Affine(int(args[0]), int(args[1]))
    except (IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed rule {form!r}") from exc
    raise ParseError(f"unknown rule '{head}'")


def _finite(kw: dict) -> FiniteExplicit:
    names = tuple(str(n) for n in kw.get("nodes", []))
    covers = []
    for c in kw.get("covers", []):
        if not isinstance(c, list) or len(c) != 2:
            raise ParseError(f"malformed cover {c!r}")
        covers.append((str(c[0]), str(c[1])))
    deltas = kw.get("delta", [2] * len(names))
    if not isinstance(deltas, list):
        raise ParseError(":delta of a finite poset must be a vector")
    for n in names:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", n):
            raise ParseError(f"node name '{n}' must be an identifier")
    return FiniteExplicit(names, tuple(covers), tuple(int(d) for d in deltas))


def _build(form) -> Presentation:
    if not isinstance(form, list) or isinstance(form, _Vec) or not form:
        raise ParseError(f"expected a presentation, got {form!r}")
    head = form[0]
    args, kw = _split_kw(form[1:])
    if head == "finite":
        return _finite(kw)
    if head in ("chain", "antichain"):
        if args != ["omega"]:
            raise ParseError(f"({head} ...) at top level must be ({head} omega :delta <rule>)")
        rule = _rule(kw["delta"]) if "delta" in kw else Const(2)
        return OmegaChain(rule) if head == "chain" else OmegaAntichain(rule)
    if head == "product":
        if len(args) != 2:
            raise ParseError("product takes two presentations")
        return Product(_build(args[0]), _build(args[1]))
    if head == "sum":
        if not args:
            raise ParseError("sum needs at least one summand")
        return DisjointSum(tuple(_build(a) for a in args))
    if head == "omega-sum":
        fib = kw.get("fiber")
        if isinstance(fib, list) and fib and fib[0] == "chain":
            fiber = ChainFiber(_rule(fib[1]))
        elif isinstance(fib, list) and fib and fib[0] == "finite":
            fiber = _finite(_split_kw(fib[1:])[1])
        else:
            raise ParseError("omega-sum :fiber must be (finite ...) or (chain <rule>)")
        rule = _rule(kw["delta"]) if "delta" in kw else None
        return OmegaSum(fiber, rule)
    if head == "chain-with-fibers":
        fib = kw.get("fiber")
        if isinstance(fib, list) and fib and fib[0] == "finite":
            fiber = _finite(_split_kw(fib[1:])[1])
        elif isinstance(fib, list) and len(fib) == 2 and fib[0] == "antichain":
            fiber = AntichainFiber(None if fib[1] == "omega" else int(fib[1]))
        else:
            raise ParseError("chain-with-fibers :fiber must be (finite ...) or (antichain k|omega)")
        rule = _rule(kw["delta"]) if "delta" in kw else Const(2)
        return ChainWithFibers(fiber, rule)
    raise ParseError(f"unknown combinator '{head}'")


def parse_presentation(text: str) -> Presentation:
    """Parse one presentation from its s-expression text."""
    try:
        return _build(_read(text))
    except KeyError as exc:
        raise ParseError(f"missing keyword {exc}") from exc


# ---------------------------------------------------------------- addresses


def format_address(a: Address) -> str:
    if isinstance(a, str):
        return a
    if isinstance(a, int):
        return str(a)
    tag = a[0]
    if tag == "*":
        return f"<{format_address(a[1])},{format_address(a[2])}>"
    if tag == "+":
        return f"{a[1]}:{format_address(a[2])}"
    if tag == "s":
        return f"{a[1]}/{format_address(a[2])}"
    if tag == "p":
        return f"p{a[1]}"
    if tag == "q":
        return f"q{a[1]}.{format_address(a[2])}"
    raise AddressError(f"unrecognised address {a!r}")


# ---------------------------------------------------------------- finite posets


class FinitePoset:
    """A finite poset whose node list is a linear extension of the order.

    ``below[i]`` is a bitmask of the nodes ``<=`` node ``i`` (including
    ``i``).  Only indices ``<= i`` can occur in ``below[i]``.
    """

    def __init__(self, nodes: Sequence[Address], below: Sequence[int],
                 delta: Sequence[int], parent: Presentation | None = None):
        self.nodes = tuple(nodes)
        self.below = tuple(below)
        self.delta = tuple(delta)
        self.parent = parent
        self.n = len(self.nodes)
        self.index = {a: i for i, a in enumerate(self.nodes)}
        if len(self.index) != self.n:
            raise ValueError("duplicate nodes")
        for i, m in enumerate(self.below):
            if m >> (i + 1) or not (m >> i) & 1:
                raise ValueError("node order is not a linear extension")
        if any(d < 2 for d in self.delta):
            raise ValueError("delta values must be >= 2")
        above = [0] * self.n
        for i, m in enumerate(self.below):
            for j in _bits(m):
                above[j] |= 1 << i
        self.above = tuple(above)
        hts = []
        for i, m in enumerate(self.below):
            hts.append(1 + max((hts[j] for j in _bits(m) if j != i), default=0))
        self.heights = tuple(hts)
        self.full_mask = (1 << self.n) - 1

    @classmethod
    def from_down(cls, nodes: Sequence[Address], down: Callable[[Address], Iterable],
                  delta: Callable[[Address], int], parent=None) -> "FinitePoset":
        index = {a: i for i, a in enumerate(nodes)}
        below = []
        for a in nodes:
            m = 0
            for b in down(a):
                if b in index:
                    m |= 1 << index[b]
            below.append(m)
        return cls(nodes, below, [delta(a) for a in nodes], parent)

    @classmethod
    def from_presentation(cls, pres: Presentation, nodes: Sequence[Address]) -> "FinitePoset":
        return cls.from_down(nodes, pres.down, pres.delta, pres)

    def __eq__(self, other) -> bool:
        return (isinstance(other, FinitePoset) and self.nodes == other.nodes
                and self.below == other.below and self.delta == other.delta)

    def __hash__(self) -> int:
        return hash((self.nodes, self.below, self.delta))

    def __repr__(self) -> str:
        return f"FinitePoset({[format_address(a) for a in self.nodes]})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, FinitePoset) and self.nodes == other.nodes
                and self.below == other.below and self.delta == other.delta)

    def __hash__(self) -> int:
        return hash((self.nodes, self.below, self.delta))

    def idx(self, a: Address) -> int:
        try:
            return self.index[a]
        except (KeyError, TypeError):
            raise AddressError(f"{a!r} is not a node of this poset") from None

    def mask(self, addrs: Iterable[Address]) -> int:
        m = 0
        for a in addrs:
            m |= 1 << self.idx(a)
        return m

    def addrs(self, mask: int) -> list:
        return [self.nodes[i] for i in _bits(mask)]

    def leq(self, a: Address, b: Address) -> bool:
        return bool((self.below[self.idx(b)] >> self.idx(a)) & 1)

    def leq_i(self, i: int, j: int) -> bool:
        return bool((self.below[j] >> i) & 1)

    def strict_below(self, i: int) -> int:
        return self.below[i] & ~(1 << i)

    def dc_mask(self, mask: int) -> int:
        out = 0
        for i in _bits(mask):
            out |= self.below[i]
        return out

    def is_down_closed(self, mask: int) -> bool:
        return self.dc_mask(mask) == mask

    def maxima(self, mask: int) -> list[int]:
        return [i for i in _bits(mask) if self.above[i] & mask == 1 << i]

    def minima(self, mask: int) -> list[int]:
        return [i for i in _bits(mask) if self.below[i] & mask == 1 << i]

    def sub(self, mask: int) -> "FinitePoset":
        """Induced subposet on the nodes in ``mask`` (order kept)."""
        keep = list(_bits(mask))
        pos = {i: k for k, i in enumerate(keep)}
        below = []
        for i in keep:
            m = 0
            for j in _bits(self.below[i] & mask):
                m |= 1 << pos[j]
            below.append(m)
        return FinitePoset([self.nodes[i] for i in keep], below,
                           [self.delta[i] for i in keep], self.parent)

    def size_of_product(self) -> int:
        out = 1
        for d in self.delta:
            out *= d
        return out

    def names(self) -> list[str]:
        return [format_address(a) for a in self.nodes]

    def lookup(self, name: str) -> Address:
        for a in self.nodes:
            if format_address(a) == name:
                return a
        raise AddressError(f"no node named '{name}'")


def _bits(m: int) -> Iterator[int]:
    while m:
        low = m & -m
        yield low.bit_length() - 1
        m ^= low


bits = _bits


def popcount(m: int) -> int:
    return bin(m).count("1")


def finite_poset(names: Sequence[str], covers: Iterable[tuple[str, str]] = (),
                 delta: Sequence[int] | int = 2) -> FinitePoset:
    """Convenience constructor: a finite poset from names and cover pairs."""
    if isinstance(delta, int):
        delta = [delta] * len(names)
    fe = FiniteExplicit(tuple(names), tuple(covers), tuple(delta))
    return FinitePoset.from_presentation(fe, fe._order)


# ---------------------------------------------------------------- operations


def truncate(pres: Presentation, n: int) -> FinitePoset:
    """Downward closure of the first ``n`` nodes of the canonical enumeration."""
    if n < 0:
        raise PreconditionError("depth must be >= 0")
    first = list(itertools.islice(pres.nodes(), n))
    seen = set(first)
    extra = [b for a in first for b in pres.down(a) if b not in seen]
    # the enumeration is a linear extension, so nothing should be added
    assert not extra, "enumeration is not a linear extension"
    return FinitePoset.from_presentation(pres, first)


def downward_closure(P: FinitePoset | Presentation, Q: Iterable[Address]) -> frozenset:
    out = set()
    for q in Q:
        if isinstance(P, FinitePoset):
            out.update(P.addrs(P.below[P.idx(q)]))
        else:
            P.check(q)
            out.update(P.down(q))
    return frozenset(out)


def height_of_node(P: FinitePoset | Presentation, q: Address) -> int:
    if isinstance(P, FinitePoset):
        return P.heights[P.idx(q)]
    P.check(q)
    down = P.down(q)
    sub = FinitePoset.from_presentation(P, _linearize(P, down))
    return sub.heights[sub.idx(q)]


def _linearize(P, addrs: list) -> list:
    # sort a finite set of addresses along the order (by number of elements below)
    inside = set(addrs)
    return sorted(addrs, key=lambda a: sum(1 for b in P.down(a) if b in inside))


def classify(pres: Presentation) -> Classification:
    return pres.classify()


def find_omega_chain(pres: Presentation, k: int) -> list:
    return pres.omega_chain(k)


def is_orthogonal(P: FinitePoset | Presentation, Q: Iterable[Address], R: Iterable[Address]) -> bool:
    R = list(R)
    for q in Q:
        for r in R:
            if P.leq(q, r) or P.leq(r, q):
                return False
    return True


def is_narrow(pres: Presentation) -> tuple[bool, OrthogonalWitness | None]:
    return pres.narrow()


def level_sets(pres: Presentation, n: int, depth: int) -> FinitePoset:
    """``Q_n = {q : not q > p_n}`` restricted to the truncation at ``depth``."""
    if pres.classify().verdict != MIN_UNBOUNDED:
        raise PreconditionError("level sets need a minimally unbounded presentation")
    p = pres.omega_chain(n + 1)[n]
    T = truncate(pres, depth)
    mask = 0
    for i, q in enumerate(T.nodes):
        if not (q != p and pres.leq(p, q)):
            mask |= 1 << i
    return T.sub(mask)


def subset_height(P: FinitePoset, mask: int) -> int:
    """Length of the longest chain inside the node set ``mask``."""
    best: dict[int, int] = {}
    for i in _bits(mask):
        best[i] = 1 + max((best[j] for j in _bits(P.strict_below(i) & mask)), default=0)
    return max(best.values(), default=0)


def unboundedness(P: FinitePoset, mask: int) -> int:
    """max(height, delta) over a node set; grows without bound on unbounded sets."""
    return max(subset_height(P, mask), max((P.delta[i] for i in _bits(mask)), default=0))


def witness_mask(P: FinitePoset, member: Callable[[Address], bool]) -> int:
    m = 0
    for i, a in enumerate(P.nodes):
        if member(a):
            m |= 1 << i
    return m


def validate_witness(pres: Presentation, cls: Classification, depth: int) -> bool:
    """Check the structural part of a witness on the truncation at ``depth``.

    Bounded: heights and deltas within the bounds.  Chain: strictly
    increasing.  Split: ``Q`` downward closed and both sides nonempty.
    Orthogonal: the two sides pairwise incomparable.
    """
    T = truncate(pres, depth)
    w = cls.witness
    if isinstance(w, BoundedWitness):
        return max(T.heights, default=0) <= w.height and max(T.delta, default=2) <= w.delta
    if isinstance(w, ChainWitness):
        c = w.nodes(max(2, depth))
        return all(pres.leq(a, b) and a != b for a, b in zip(c, c[1:]))
    if isinstance(w, SplitWitness):
        q = witness_mask(T, w.member)
        return T.is_down_closed(q) and q != 0 and q != T.full_mask
    if isinstance(w, OrthogonalWitness):
        left = T.addrs(witness_mask(T, w.left))
        right = T.addrs(witness_mask(T, w.right))
        return is_orthogonal(T, left, right)
    return False
