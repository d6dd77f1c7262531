"""The acceptance criteria as callable checks.

Each check returns a ``Result``; the CLI ``selftest`` command and the
acceptance test module both run them.
"""
from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass
from typing import Callable

from . import backforth as bf
from . import dynamics as dy
from . import indiscernibles as ind
from . import reductions as rd
from . import reducts as rx
from .errors import CapExceeded
from .model_core import ColoredModel, TruncatedModel, full_model
from .poset_core import (BOUNDED, MIN_UNBOUNDED, UNBOUNDED_NOT_MIN, FinitePoset,
                         parse_presentation)


@dataclass(frozen=True)
class Result:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name: str, fn: Callable[[], tuple[bool, str]]) -> Result:
    t = time.perf_counter()
    ok, detail = fn()
    return Result(name, ok, detail, time.perf_counter() - t)


# ---------------------------------------------------------------- small posets


def _canon(below: tuple[int, ...]) -> tuple:
    n = len(below)
    best = None
    for perm in itertools.permutations(range(n)):
        rel = tuple(sorted((perm[i], perm[j]) for i in range(n) for j in range(n)
                           if i != j and below[i] >> j & 1))
        if best is None or rel < best:
            best = rel
    return best


def small_posets(max_nodes: int, max_height: int) -> list[tuple[int, ...]]:
    """One below-mask tuple per isomorphism type, nodes in a linear extension."""
    levels = [[()]]
    out = []
    for n in range(1, max_nodes + 1):
        seen, nxt = set(), []
        for below in levels[-1]:
            full = (1 << len(below)) - 1
            for down in range(full + 1):
                if any(down >> j & 1 and (below[j] & ~down) for j in range(len(below))):
                    continue
                cand = below + (down | 1 << len(below),)
                key = _canon(cand)
                if key not in seen:
                    seen.add(key)
                    nxt.append(cand)
        levels.append(nxt)
        for below in nxt:
            P = FinitePoset([f"n{i}" for i in range(n)], below, [2] * n)
            if max(P.heights) <= max_height:
                out.append(below)
    return out


def _posets_with_delta(max_nodes: int, max_height: int, max_delta: int, max_size: int):
    for below in small_posets(max_nodes, max_height):
        n = len(below)
        for delta in itertools.product(range(2, max_delta + 1), repeat=n):
            if math.prod(delta) <= max_size:
                yield FinitePoset([f"n{i}" for i in range(n)], below, delta)


# ---------------------------------------------------------------- criteria


def exponent_bound(enum_cap: int = 2000, samples: int = 16) -> Result:
    def run():
        enumerated = dp_only = checked = 0
        rng = random.Random(0)
        for P in _posets_with_delta(6, 3, 3, 64):
            k, m = max(P.heights), max(P.delta)
            N = dy.exponent_bound(m, k)
            if N % dy.group_exponent(P):
                return False, f"orbit bound fails on {P.below} {P.delta}"
            order = dy.conditional_group_order(P)
            model = full_model(P)
            if order <= enum_cap:
                perms = dy.enumerate_automorphisms(model, cap=64)
                for p in perms:
                    if N % dy.perm_order(p):
                        return False, f"automorphism of order {dy.perm_order(p)} on {P.delta}"
                checked += len(perms)
                enumerated += 1
            else:
                for _ in range(samples):
                    sigma = bf.random_conditional(P, rng)
                    if not dy.verify_exponent(model, sigma, m, k):
                        return False, f"sampled automorphism violates the bound on {P.delta}"
                checked += samples
                dp_only += 1
        return True, (f"{enumerated} models enumerated, {dp_only} by orbit bound plus samples, "
                      f"{checked} automorphisms checked")
    return _timed("exponent bound", run)


def nested_stabilization(max_len: int = 8, max_size: int = 16) -> Result:
    def run():
        seqs = models = 0
        for P in _posets_with_delta(4, 3, 3, max_size):
            m = full_model(P)
            k, mb = max(P.heights), max(P.delta)
            start = mb * k
            if start >= max_len:
                continue
            models += 1
            for seq in dy.nested_sequences(m, max_len):
                seqs += 1
                if seqs % 97 == 1 and not dy.is_nested(seq, m):
                    return False, f"generator produced a non-nested sequence on {P.delta}"
                for q in range(P.n):
                    if not dy.nested_stabilization(seq, q, mb, k, m, assume_nested=True):
                        return False, f"violation at node {q} on {P.delta}: {seq}"
        return True, f"{seqs} nested sequences of length {max_len} in {models} models"
    return _timed("nested stabilization", run)


def disjoint_amalgamation(n: int = 1000) -> Result:
    def run():
        parts = []
        for src in ("(antichain omega :delta (affine 1 2))", "(chain omega :delta (const 2))"):
            spec = ind.SuitableClassSpec.for_presentation(parse_presentation(src), 16, 6)
            rng = random.Random(0)
            bad = 0
            for _ in range(n):
                A, f, h = ind.random_amalgamation_instance(spec, rng)
                step = ind.disjoint_amalgamate(spec, A, f, h)
                bad += not ind.check_amalgamation(spec, A, f, h, step)
            parts.append((spec.case, bad))
        ok = all(b == 0 for _, b in parts)
        return ok, ", ".join(f"{c}: {n - b}/{n}" for c, b in parts)
    return _timed("disjoint amalgamation", run)


def absolute_indiscernibility() -> Result:
    def run():
        out, ok = [], True
        for src in ("(antichain omega :delta (affine 1 2))", "(chain omega :delta (const 2))"):
            fam = ind.build_family(parse_presentation(src), 4, 2, 12, 0)
            try:
                good = ind.verify_family(fam.model, fam)
                out.append(f"{src}: {'24/24' if good else 'some permutation does not lift'}")
            except CapExceeded:
                good = False
                out.append(f"{src}: inconclusive (search cap)")
            ok &= good
        return ok, "; ".join(out)
    return _timed("absolute indiscernibility", run)


def bipartite_round_trip(n_random: int = 500) -> Result:
    def run():
        pres = parse_presentation("(antichain omega :delta (affine 1 2))")
        w3 = ind.saturate(ind.build_cross_cutting(pres, 16, 3, 3, 1, 0))
        w5 = ind.saturate(ind.build_cross_cutting(pres, 24, 5, 5, 1, 0))
        small = rd.all_reduced_graphs(3, 3)
        enc = [rd.encode_bipartite(w3, g) for g in small]
        for g, cm in zip(small, enc):
            if not rd.graph_iso(g, rd.decode_bipartite(cm, w3))[0]:
                return False, f"round trip fails on {sorted(g.edges)}"
        pairs = 0
        for i, j in itertools.combinations(range(len(small)), 2):
            if rd.graph_iso(small[i], small[j])[0] != (rd.colored_iso(enc[i], enc[j]) is not None):
                return False, "iso reflection fails on a small pair"
            pairs += 1
        rng = random.Random(0)
        for _ in range(n_random):
            g = rd.random_reduced_graph(rng, 5, 5)
            cg = rd.encode_bipartite(w5, g)
            if not rd.graph_iso(g, rd.decode_bipartite(cg, w5))[0]:
                return False, f"round trip fails on {sorted(g.edges)}"
            if rng.random() < 0.5:
                s0 = rng.sample(range(g.rows), g.rows)
                s1 = rng.sample(range(g.cols), g.cols)
                other = rd.permute_graph(g, s0, s1)
            else:
                other = rd.random_reduced_graph(rng, g.rows, g.cols)
                if (other.rows, other.cols) != (g.rows, g.cols):
                    other = rd.random_reduced_graph(rng, 5, 5)
            co = rd.encode_bipartite(w5, other)
            if rd.graph_iso(g, other)[0] != (rd.colored_iso(cg, co) is not None):
                return False, "iso reflection fails on a random pair"
            pairs += 1
        return True, f"{len(small)} small graphs, {n_random} random graphs, {pairs} pairs"
    return _timed("bipartite round trip", run)


def shift1_transport(n: int = 500) -> Result:
    def run():
        rng = random.Random(0)
        P = parse_presentation("(finite :nodes [a b c] :covers [(a b)] :delta [2 3 2])")
        from .poset_core import truncate
        T = truncate(P, 3)
        universe = full_model(T).elements
        iso_pairs = 0
        for _ in range(n):
            els = rng.sample(universe, rng.randint(1, 6))
            a = ColoredModel(TruncatedModel(T, els), tuple(rng.randint(0, 3) for _ in els))
            if rng.random() < 0.5:
                sigma = bf.random_conditional(T, rng)
                img = [tuple(dy.apply(sigma, e)) for e in els]
                order = sorted(range(len(els)), key=lambda i: img[i])
                b = ColoredModel(TruncatedModel(T, [img[i] for i in order]),
                                 tuple(a.colors[i] for i in order))
            else:
                cs = list(a.colors)
                cs[rng.randrange(len(cs))] = rng.randint(0, 3)
                b = ColoredModel(a.model, tuple(cs))
            x = rd.colored_iso(a, b) is not None
            y = rd.blowup_iso(rd.color_to_model(a), rd.color_to_model(b)) is not None
            if x != y:
                return False, "isomorphism not transported"
            if rd.colored_iso(a, rd.model_to_color(rd.color_to_model(a))) is None:
                return False, "inverse does not recover the coloring"
            iso_pairs += x
        return True, f"{n} pairs, {iso_pairs} isomorphic"
    return _timed("shift1 transport", run)


def twolevel_encoder(n: int = 50) -> Result:
    def run():
        moving = 0
        for s in range(n):
            inst = rd.twolevel_instance(s)
            ok_rec, ok_tau, note = rd.check_twolevel_instance(inst)
            if not ok_rec:
                return False, f"recovery fails on seed {s}"
            if not ok_tau:
                return False, f"tau fails on seed {s}"
            moving += note != "identity h"
        return True, f"{n} instances, {moving} with a non-identity automorphism"
    return _timed("two-level encoder", run)


SB_SOURCES = ("(chain omega :delta (const 2))",
              "(chain-with-fibers :fiber (antichain 1) :delta (const 2))",
              "(sum (chain omega :delta (const 2)) (finite :nodes [a] :covers [] :delta [3]))")


def sb_back_and_forth(n: int = 25) -> Result:
    def run():
        cases: dict[int, int] = {}
        for s in range(n):
            pres = parse_presentation(SB_SOURCES[s % len(SB_SOURCES)])
            inst = bf.sb_instance(pres, 6, 16, 2, s)
            if not (bf.check_one_embedding(inst.f, inst.M, inst.N)
                    and bf.check_one_embedding(inst.g, inst.N, inst.M)):
                return False, f"instance {s} lacks mutual 1-embeddings"
            h, log = bf.sb_isomorphism(inst.M, inst.N, inst.f, inst.g, inst.L)
            if not bf.is_colored_isomorphism(h, inst.M, inst.N):
                return False, f"instance {s}: output is not an isomorphism"
            for c in log:
                cases[c] = cases.get(c, 0) + 1
        return True, f"{n} instances, steps by case {dict(sorted(cases.items()))}"
    return _timed("SB back-and-forth", run)


def reduct_classification(n3: int = 150) -> Result:
    def run():
        M = rx.RefModel.uniform([0, 1, 2, rx.OMEGA])
        group = rx.ref_automorphisms(M)
        expected = [(rx.e_set(M, 1), {1, rx.OMEGA}), (rx.e_set(M, rx.OMEGA), {rx.OMEGA}),
                    (rx.e_strip(M, 1, 2), {1, 2, rx.OMEGA})]
        for D, F in expected:
            if rx.classify_reduct(D, M) != F:
                return False, f"worked example gives {rx.fmt_set(rx.classify_reduct(D, M))}"
        suite = []
        for arity in (1, 2):
            orbits = rx.tuple_orbits(M, arity, group)
            for bits_ in range(1 << len(orbits)):
                suite.append(rx.DefinableSet.of(arity, set().union(
                    *[o for i, o in enumerate(orbits) if bits_ >> i & 1])))
        rng = random.Random(0)
        for _ in range(n3):
            suite.append(rx.random_orbit_closed(M, 3, rng, group))
        seen = {}
        for D in suite:
            if (D.arity, D.tuples) in seen:
                continue
            F = rx.classify_reduct(D, M)
            seen[(D.arity, D.tuples)] = F
            if not rx.verify_equivalence(D, F, M):
                return False, f"equivalence fails for arity {D.arity}, F={rx.fmt_set(F)}"
            if not rx.is_minimal(D, F, M):
                return False, f"F={rx.fmt_set(F)} is not minimal"
        dist: dict[str, int] = {}
        for F in seen.values():
            dist[rx.fmt_set(F)] = dist.get(rx.fmt_set(F), 0) + 1
        return True, f"3 worked examples, {len(seen)} distinct sets, outputs {dist}"
    return _timed("reduct classification", run)


CLASSIFICATION_TABLE = (
    ("(chain omega :delta (const 2))", MIN_UNBOUNDED),
    ("(product (chain omega :delta (const 2)) (finite :nodes [a b] :covers [] :delta [2 2]))",
     UNBOUNDED_NOT_MIN),
    ("(omega-sum :fiber (chain (affine 1 1)) :delta (const 2))", UNBOUNDED_NOT_MIN),
    ("(chain-with-fibers :fiber (antichain omega) :delta (const 3))", MIN_UNBOUNDED),
    ("(antichain omega :delta (const 2))", BOUNDED),
    ("(antichain omega :delta (affine 1 2))", UNBOUNDED_NOT_MIN),
)


def classification_table() -> Result:
    def run():
        got = [(src, parse_presentation(src).classify().verdict) for src, _ in CLASSIFICATION_TABLE]
        bad = [src for (src, v), (_, want) in zip(got, CLASSIFICATION_TABLE) if v != want]
        return not bad, "6/6 verdicts" if not bad else f"mismatch on {bad}"
    return _timed("classification table", run)


CRITERIA: dict[str, Callable[[], Result]] = {
    "exponent": exponent_bound,
    "nested": nested_stabilization,
    "amalgamation": disjoint_amalgamation,
    "indiscernibility": absolute_indiscernibility,
    "bipartite": bipartite_round_trip,
    "shift1": shift1_transport,
    "twolevel": twolevel_encoder,
    "sb": sb_back_and_forth,
    "reducts": reduct_classification,
    "classification": classification_table,
}


def run_all(names=None) -> list[Result]:
    return [CRITERIA[n]() for n in (names or CRITERIA)]
