"""Backtracking search for maps preserving pairwise wedge masks and colors.

Structures are given as a wedge matrix ``W`` (``W[x][y]`` the wedge mask of
elements ``x`` and ``y``) plus a color per element.  Candidates are pruned
by a joint color-refinement labelling computed on both structures at once.
"""
from __future__ import annotations

from collections import Counter
from typing import Iterator, Sequence

from .errors import CapExceeded


def refine(structures: Sequence[tuple[Sequence[Sequence[int]], Sequence]], rounds: int = 4) -> list[list[int]]:
    """Joint refinement labels for several structures (shared label space)."""
    labels = [[hash(("c", c)) for c in colors] for _, colors in structures]
    for _ in range(rounds):
        table: dict = {}
        new_all = []
        for (W, _), lab in zip(structures, labels):
            new = []
            for x in range(len(lab)):
                sig = (lab[x], tuple(sorted(Counter(
                    (W[x][y], lab[y]) for y in range(len(lab)) if y != x).items())))
                new.append(table.setdefault(sig, len(table)))
            new_all.append(new)
        if all(len(set(a)) == len(set(b)) for a, b in zip(new_all, labels)):
            labels = new_all
            break
        labels = new_all
    return labels


def iter_isomorphisms(W1, c1, W2, c2, node_cap: int | None = None,
                      fixed: dict[int, int] | None = None) -> Iterator[list[int]]:
    """Yield every bijection ``h`` with ``W2[h x][h y] == W1[x][y]`` and equal colors.

    ``fixed`` pins some images in advance.  Raises ``CapExceeded`` after
    ``node_cap`` search nodes.
    """
    n = len(c1)
    if n != len(c2):
        return
    l1, l2 = refine([(W1, c1), (W2, c2)])
    if sorted(l1) != sorted(l2):
        return
    by_label: dict[int, list[int]] = {}
    for y, lab in enumerate(l2):
        by_label.setdefault(lab, []).append(y)
    size = Counter(l1)
    fixed = dict(fixed or {})
    order = sorted(range(n), key=lambda x: (x not in fixed, size[l1[x]], x))
    img = [-1] * n
    used = [False] * n
    budget = [node_cap]

    def tick():
        if budget[0] is not None:
            budget[0] -= 1
            if budget[0] < 0:
                raise CapExceeded("isomorphism search exceeded its node cap")

    def rec(k: int):
        if k == n:
            yield list(img)
            return
        x = order[k]
        cands = [fixed[x]] if x in fixed else by_label.get(l1[x], [])
        for y in cands:
            if used[y] or l2[y] != l1[x]:
                continue
            tick()
            ok = True
            for j in range(k):
                p = order[j]
                if W2[y][img[p]] != W1[x][p]:
                    ok = False
                    break
            if not ok:
                continue
            img[x], used[y] = y, True
            yield from rec(k + 1)
            img[x], used[y] = -1, False

    yield from rec(0)


def find_isomorphism(W1, c1, W2, c2, node_cap: int | None = None,
                     fixed: dict[int, int] | None = None) -> list[int] | None:
    return next(iter_isomorphisms(W1, c1, W2, c2, node_cap, fixed), None)
