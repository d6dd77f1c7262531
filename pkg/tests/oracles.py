"""Brute-force reference computations used to freeze expected values.

Each oracle works from first principles (order relation, coordinates,
all permutations) and shares no code with the package beyond data types.
"""
from __future__ import annotations

import itertools


def leq_table(P):
    return [[P.leq(a, b) for b in P.nodes] for a in P.nodes]


def longest_chain_through(P, top):
    """Largest totally ordered subset of the nodes below ``top`` (containing it)."""
    L = leq_table(P)
    t = P.nodes.index(top)
    down = [i for i in range(P.n) if L[i][t]]
    best = 0
    for r in range(1, len(down) + 1):
        for S in itertools.combinations(down, r):
            if all(L[a][b] or L[b][a] for a, b in itertools.combinations(S, 2)):
                best = max(best, r)
    return best


def agree_below(P, q, f, g):
    L = leq_table(P)
    return all(f[p] == g[p] for p in range(P.n) if L[p][q])


def wedge_nodes(P, f, g):
    return frozenset(P.nodes[q] for q in range(P.n) if agree_below(P, q, f, g))


def automorphisms(P, elements):
    """Every bijection of ``elements`` preserving each ``E_q`` in both directions."""
    els = [tuple(e) for e in elements]
    rel = [[[agree_below(P, q, a, b) for b in els] for a in els] for q in range(P.n)]
    out = []
    for perm in itertools.permutations(range(len(els))):
        if all(rel[q][i][j] == rel[q][perm[i]][perm[j]]
               for q in range(P.n) for i in range(len(els)) for j in range(len(els))):
            out.append(perm)
    return out


def perm_order(perm):
    seen, order = set(), 1
    for i in range(len(perm)):
        if i in seen:
            continue
        k, j = 0, i
        while j not in seen:
            seen.add(j)
            j = perm[j]
            k += 1
        order = order * k // _gcd(order, k)
    return order


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def bipartite_iso(R, S):
    if (R.rows, R.cols, len(R.edges)) != (S.rows, S.cols, len(S.edges)):
        return False
    for p in itertools.permutations(range(R.rows)):
        for q in itertools.permutations(range(R.cols)):
            if {(p[u], q[v]) for u, v in R.edges} == set(S.edges):
                return True
    return False


def ref_automorphisms(M, indices):
    """Bijections of a RefModel preserving ``E_j`` for each listed ``j``."""
    n = M.size
    rels = [[[M.E(j, x, y) for y in range(n)] for x in range(n)] for j in indices]
    out = []
    for perm in itertools.permutations(range(n)):
        if all(r[x][y] == r[perm[x]][perm[y]] for r in rels for x in range(n) for y in range(n)):
            out.append(perm)
    return out


def invariant(tuples, perms):
    T = set(tuples)
    return all({tuple(p[x] for x in t) for t in T} == T for p in perms)
