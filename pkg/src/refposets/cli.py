"""Command-line front end: ``refposets <subcommand> ...``.

Every report starts with a provenance block (presentation hash, seed, depth,
caps, version) so a failing run can be replayed.  Exit status is 0 when the
checked property holds, 1 on a property violation or a library error, and 2
on malformed flags or input files.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
from typing import Callable

from . import __version__
from . import backforth as bf
from . import dynamics as dy
from . import indiscernibles as ind
from . import reductions as rd
from . import reducts as rx
from .errors import DecodeError, ParseError, RefError
from .formats import (closures_section, describe_poset, dump_embedding, dump_model,
                      load_embedding, load_model, mask_names, read_closures, write_atomic)
from .model_core import ColoredModel, TruncatedModel, full_model
from .poset_core import format_address, parse_presentation, truncate, validate_witness


class Report:
    """Ordered key/value report rendered as text or as JSON."""

    def __init__(self, command: str, args: argparse.Namespace, pres=None):
        self.fields: list[tuple[str, object]] = []
        self.blocks: list[tuple[str, list[str]]] = []
        self.ok = True
        prov = {"command": command, "version": __version__}
        if pres is not None:
            prov["poset"] = pres.sexpr()
            prov["poset-hash"] = pres.ast_hash()
        for k in ("seed", "depth", "cap"):
            v = getattr(args, k, None)
            if v is not None:
                prov[k] = v
        self.provenance = prov

    def add(self, key: str, value) -> None:
        self.fields.append((key, value))

    def block(self, name: str, lines: list[str]) -> None:
        self.blocks.append((name, list(lines)))

    def fail(self, key: str, value) -> None:
        self.ok = False
        self.add(key, value)

    def render(self, fmt: str) -> str:
        if fmt == "machine":
            doc = {"provenance": self.provenance, "ok": self.ok,
                   "result": {k: v for k, v in self.fields},
                   "blocks": {k: v for k, v in self.blocks}}
            return json.dumps(doc, sort_keys=True, default=str) + "\n"
        out = ["[provenance]"] + [f"{k}: {v}" for k, v in self.provenance.items()]
        out += ["[result]"] + [f"{k}: {v}" for k, v in self.fields]
        for name, lines in self.blocks:
            out += [f"[{name}]"] + lines
        out.append(f"status: {'ok' if self.ok else 'violation'}")
        return "\n".join(out) + "\n"


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc


def _graph(path: str) -> rd.BipartiteGraph:
    try:
        return rd.BipartiteGraph.loads(_read(path))
    except DecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _presentation(arg: str):
    """Inline s-expression when it starts with ``(``, otherwise a file path."""
    text = arg if arg.lstrip().startswith("(") else _read(arg)
    return parse_presentation(text)


def _figure(args, name: str, draw: Callable[[str], str], rep: Report) -> None:
    if args.figures:
        rep.add(f"figure {name}", draw(os.path.join(args.figures, f"{name}.png")))


def _elem(e) -> str:
    return "(" + " ".join(map(str, e)) + ")"


# ---------------------------------------------------------------- subcommands


def cmd_classify(args) -> Report:
    pres = _presentation(args.poset)
    rep = Report("classify", args, pres)
    cls = pres.classify()
    rep.add("verdict", cls.verdict)
    rep.add("witness", type(cls.witness).__name__)
    desc = getattr(cls.witness, "description", None)
    if desc:
        rep.add("witness description", desc)
    narrow, _ = pres.narrow()
    rep.add("narrow", narrow)
    if args.depth is not None:
        ok = validate_witness(pres, cls, args.depth)
        (rep.add if ok else rep.fail)("witness valid at depth", ok)
    _figure(args, "hasse", lambda p: _plot().hasse_diagram(truncate(pres, args.depth or 6), p, cls.verdict), rep)
    return rep


def cmd_truncate(args) -> Report:
    pres = _presentation(args.poset)
    rep = Report("truncate", args, pres)
    T = truncate(pres, args.depth)
    rep.add("nodes", T.n)
    rep.add("max height", max(T.heights) if T.n else 0)
    rep.add("max delta", max(T.delta) if T.n else 0)
    rep.block("nodes", describe_poset(T))
    if args.out:
        m = full_model(T, cap=args.cap)
        write_atomic(args.out, dump_model(m, pres.sexpr(), args.depth, poset_file=args.poset))
        rep.add("model elements", len(m))
        rep.add("written", args.out)
    _figure(args, "hasse", lambda p: _plot().hasse_diagram(T, p), rep)
    return rep


def cmd_aut_exponent(args) -> Report:
    pres = _presentation(args.poset)
    rep = Report("aut-exponent", args, pres)
    T = truncate(pres, args.depth)
    k, m = max(T.heights), max(T.delta)
    N = dy.exponent_bound(m, k)
    e = dy.group_exponent(T)
    rep.add("height k", k)
    rep.add("delta bound m", m)
    rep.add("bound (m!)^k", N)
    rep.add("group exponent", e)
    rep.add("orbit lengths", sorted(dy.orbit_lengths(T)))
    rep.add("group order", dy.conditional_group_order(T))
    if N % e:
        rep.fail("exponent divides bound", False)
    else:
        rep.add("exponent divides bound", True)
    rng = random.Random(args.seed)
    model = full_model(T, cap=args.cap)
    bad = sum(not dy.verify_exponent(model, bf.random_conditional(T, rng), m, k)
              for _ in range(args.samples))
    (rep.fail if bad else rep.add)("sampled violations", f"{bad}/{args.samples}")
    return rep


def cmd_nested_search(args) -> Report:
    pres = _presentation(args.poset)
    rep = Report("nested-search", args, pres)
    T = truncate(pres, args.depth)
    model = full_model(T, cap=args.cap)
    k, m = max(T.heights), max(T.delta)
    rep.add("model elements", len(model))
    rep.add("stabilization index m*k", m * k)
    seqs = 0
    for seq in dy.nested_sequences(model, args.length):
        seqs += 1
        for q in range(T.n):
            if not dy.nested_stabilization(seq, q, m, k, model, assume_nested=True):
                rep.fail("violation", f"node {format_address(T.nodes[q])} in {' '.join(map(_elem, seq))}")
                rep.add("sequences checked", seqs)
                return rep
    rep.add("sequences checked", seqs)
    rep.add("violations", 0)
    return rep


def cmd_amalgamate(args) -> Report:
    pres = _presentation(args.poset)
    rep = Report("amalgamate", args, pres)
    spec = ind.SuitableClassSpec.for_presentation(pres, args.depth, args.bound)
    rep.add("case", spec.case)
    rng = random.Random(args.seed)
    bad, example = 0, None
    for _ in range(args.count):
        A, f, h = ind.random_amalgamation_instance(spec, rng)
        step = ind.disjoint_amalgamate(spec, A, f, h)
        if not ind.check_amalgamation(spec, A, f, h, step):
            bad += 1
        example = example or (A, f, h, step)
    (rep.fail if bad else rep.add)("failures", f"{bad}/{args.count}")
    A, f, h, step = example
    rep.block("first instance", [f"A: {' '.join(map(_elem, A)) or '-'}", f"f: {_elem(f)}",
                                 f"h: {_elem(h)}", f"f': {_elem(step.element)}",
                                 f"threshold: {step.threshold}"])
    return rep


def cmd_build_family(args) -> Report:
    pres = _presentation(args.poset)
    rep = Report("build-family", args, pres)
    fam = ind.build_family(pres, args.N, args.size, args.depth, args.seed)
    rep.add("case", fam.case)
    rep.add("classes", len(fam.classes))
    rep.add("model elements", len(fam.model))
    ok = ind.verify_family(fam.model, fam, node_cap=args.cap)
    (rep.add if ok else rep.fail)("every permutation lifts", ok)
    rep.block("classes", [f"D{i}: {' '.join(map(_elem, D))}" for i, D in enumerate(fam.classes)])
    if args.out:
        cls = fam.class_of()
        write_atomic(args.out, dump_model(fam.model, pres.sexpr(), args.depth,
                                          classes=[cls.get(e, -1) for e in fam.model.elements]))
        rep.add("written", args.out)
    _figure(args, "classes", lambda p: _plot().class_heatmap(fam.model, fam.classes, p), rep)
    return rep


def _witness(pres, args, n0: int, n1: int):
    w = ind.build_cross_cutting(pres, args.depth, n0, n1, args.size, args.seed)
    return ind.saturate(w)


def cmd_cross_cutting(args) -> Report:
    pres = _presentation(args.poset)
    rep = Report("cross-cutting", args, pres)
    w = _witness(pres, args, args.n0, args.n1)
    P = w.model.poset
    rep.add("side 0", mask_names(P, w.sides[0]))
    rep.add("side 1", mask_names(P, w.sides[1]))
    rep.add("model elements", len(w.model))
    ok = ind.verify_cross_cutting(w, node_cap=args.cap)
    (rep.add if ok else rep.fail)("cross-cutting clauses hold", ok)
    if args.out:
        write_atomic(args.out, dump_model(w.model, pres.sexpr(), args.depth,
                                          sections={"cross-cutting": closures_section(P, w.sides, w.closures)}))
        rep.add("written", args.out)
    _figure(args, "side0", lambda p: _plot().class_heatmap(w.model, w.classes[0], p, "side 0 classes"), rep)
    _figure(args, "side1", lambda p: _plot().class_heatmap(w.model, w.classes[1], p, "side 1 classes"), rep)
    return rep


def cmd_encode_bipartite(args) -> Report:
    pres = _presentation(args.poset)
    rep = Report("encode-bipartite", args, pres)
    R = _graph(args.graph)
    if not rd.is_reduced(R):
        raise ParseError("graph is not reduced (two rows or two columns share a neighborhood)")
    w = _witness(pres, args, R.rows, R.cols)
    cm = rd.encode_bipartite(w, R)
    P = w.model.poset
    rep.add("graph", f"{R.rows} x {R.cols}, {len(R.edges)} edges")
    rep.add("model elements", len(cm.model))
    rep.add("color counts", {c: cm.colors.count(c) for c in sorted(set(cm.colors))})
    back = rd.decode_bipartite(cm, w.closures)
    ok, _ = rd.graph_iso(R, back)
    (rep.add if ok else rep.fail)("decodes to an isomorphic graph", ok)
    if args.out:
        write_atomic(args.out, dump_model(cm.model, pres.sexpr(), args.depth, colors=cm.colors,
                                          sections={"cross-cutting": closures_section(P, w.sides, w.closures)}))
        rep.add("written", args.out)
    _figure(args, "bipartite", lambda p: _plot().bipartite_encoding(R, cm, w, p), rep)
    return rep


def cmd_decode_bipartite(args) -> Report:
    mf = load_model(_read(args.model))
    pres = mf.presentation
    rep = Report("decode-bipartite", args, pres)
    if mf.colors is None or "cross-cutting" not in (mf.sections or {}):
        raise ParseError("decoding needs a color column and a [cross-cutting] section")
    closures = read_closures(mf.model.poset, mf.sections["cross-cutting"])
    R = rd.decode_bipartite(ColoredModel(mf.model, mf.colors), closures)
    rep.add("graph", f"{R.rows} x {R.cols}, {len(R.edges)} edges")
    rep.block("graph", R.dumps().splitlines())
    if args.against:
        ok, _ = rd.graph_iso(_graph(args.against), R)
        (rep.add if ok else rep.fail)("isomorphic to reference", ok)
    if args.out:
        write_atomic(args.out, R.dumps())
        rep.add("written", args.out)
    return rep


def cmd_shift1(args) -> Report:
    mf = load_model(_read(args.model))
    pres = mf.presentation
    rep = Report("shift1", args, pres)
    if args.inverse:
        cm = rd.model_to_color(mf.model)
        rep.add("colored points", len(cm.model))
        text = dump_model(cm.model, mf.source, mf.depth, colors=cm.colors)
    else:
        if mf.colors is None:
            raise ParseError("shift1 needs a color column")
        cm = ColoredModel(mf.model, mf.colors)
        m = rd.color_to_model(cm)
        back = rd.model_to_color(m)
        same = back.model.elements == tuple(sorted(e[: cm.model.poset.n] for e in cm.model.elements)) and \
            all(back.color(e) == cm.color(e) for e in cm.model.elements)
        rep.add("blown-up elements", len(m))
        (rep.add if same else rep.fail)("inverse recovers the coloring", same)
        text = dump_model(m, mf.source, mf.depth)
    if args.out:
        write_atomic(args.out, text)
        rep.add("written", args.out)
    return rep


def cmd_encode_twolevel(args) -> Report:
    inst = rd.twolevel_instance(args.seed)
    pres = parse_presentation(inst.source)
    rep = Report("encode-twolevel", args, pres)
    cm, enc = rd.encode_twolevel(inst.poset, inst.qmask, inst.expansion, inst.colors,
                                 inst.family, inst.seed)
    Q = inst.expansion.model
    rep.add("q nodes", mask_names(inst.poset, inst.qmask))
    rep.add("relations", ", ".join(f"{S.name}/{S.arity}@{format_address(Q.poset.nodes[S.node])}: "
                                   f"{len(S.tuples)}" for S in inst.expansion.relations))
    rep.add("index set size", len(enc.codebook.J))
    rep.add("model elements", len(cm.model))
    ok_rec, ok_tau, note = rd.check_twolevel_instance(inst)
    (rep.add if ok_rec else rep.fail)("relations and coloring recovered", ok_rec)
    (rep.add if ok_tau else rep.fail)("automorphism transport", f"{ok_tau} ({note})")
    rep.block("coloring", [f"{_elem(a)} {c}" for a, c in zip(Q.elements, inst.colors)])
    if args.out:
        write_atomic(args.out, dump_model(cm.model, inst.source, inst.poset.n, colors=cm.colors,
                                          sections={"codebook": enc.key().dumps()}))
        rep.add("written", args.out)
    return rep


def cmd_recover(args) -> Report:
    mf = load_model(_read(args.model))
    pres = mf.presentation
    rep = Report("recover", args, pres)
    if mf.colors is None or "codebook" not in (mf.sections or {}):
        raise ParseError("recovery needs a color column and a [codebook] section")
    key = rd.RecoveryKey.loads(mf.model.poset, mf.sections["codebook"])
    cm = ColoredModel(mf.model, mf.colors)
    rels = rd.recover_relations(cm, key)
    col = rd.recover_coloring(cm, key)
    for i, r in enumerate(rels):
        rep.add(f"relation {i} size", len(r))
        rep.block(f"relation {i}", [" ".join(map(_elem, t)) for t in sorted(r)])
    rep.block("coloring", [f"{_elem(a)} {c}" for a, c in sorted(col.items())])
    return rep


def cmd_sb_iso(args) -> Report:
    if args.instance:
        pres = _presentation(args.instance)
        inst = bf.sb_instance(pres, args.depth, args.size, args.colors, args.seed)
        M, N, f, g, L = inst.M, inst.N, inst.f, inst.g, inst.L
        if args.save:
            src = pres.sexpr()
            write_atomic(os.path.join(args.save, "M.model"), dump_model(M.model, src, args.depth, colors=M.colors))
            write_atomic(os.path.join(args.save, "N.model"), dump_model(N.model, src, args.depth, colors=N.colors))
            write_atomic(os.path.join(args.save, "f.emb"), dump_embedding(f, M.model, N.model))
            write_atomic(os.path.join(args.save, "g.emb"), dump_embedding(g, N.model, M.model))
    else:
        if not all((args.M, args.N, args.f, args.g)):
            raise ParseError("sb-iso needs M N f g files or --instance")
        mM, mN = load_model(_read(args.M)), load_model(_read(args.N))
        if mM.colors is None or mN.colors is None:
            raise ParseError("both models need a color column")
        if mM.source != mN.source or mM.depth != mN.depth:
            raise ParseError("models live on different truncations")
        pres = mM.presentation
        M, N = ColoredModel(mM.model, mM.colors), ColoredModel(mN.model, mN.colors)
        f = load_embedding(_read(args.f), M.model, N.model)
        g = load_embedding(_read(args.g), N.model, M.model)
        L = bf.leveled(pres, mM.depth)
    rep = Report("sb-iso", args, pres)
    for name, e, A, B in (("f", f, M, N), ("g", g, N, M)):
        if not bf.is_colored_embedding(e, A, B):
            raise ParseError(f"{name} is not a colored embedding")
    h, log = bf.sb_isomorphism(M, N, f, g, L)
    ok = bf.is_colored_isomorphism(h, M, N)
    rep.add("elements", len(M.model))
    rep.add("cases used", {c: log.count(c) for c in sorted(set(log))})
    (rep.add if ok else rep.fail)("isomorphism verified", ok)
    if args.out:
        write_atomic(args.out, dump_embedding(h, M.model, N.model))
        rep.add("written", args.out)
    return rep


def cmd_reduct_classify(args) -> Report:
    rep = Report("reduct-classify", args)
    try:
        M = rx.RefModel.loads(_read(args.model))
        D = rx.DefinableSet.loads(_read(args.set))
    except RefError as exc:
        raise ParseError(str(exc)) from exc
    if any(not 0 <= x < M.size for t in D.tuples for x in t):
        raise ParseError("set references an element outside the model")
    log = rx.Transcript()
    F = rx.classify_reduct(D, M, log)
    rep.add("u", rx.fmt_set(M.u))
    rep.add("F", rx.fmt_set(F))
    eq = rx.verify_equivalence(D, F, M)
    (rep.add if eq else rep.fail)("equivalent", eq)
    mn = rx.is_minimal(D, F, M)
    (rep.add if mn else rep.fail)("minimal", mn)
    rep.block("transcript", log.lines)
    return rep


def cmd_selftest(args) -> Report:
    from . import acceptance
    rep = Report("selftest", args)
    names = args.only or list(acceptance.CRITERIA)
    unknown = [n for n in names if n not in acceptance.CRITERIA]
    if unknown:
        raise ParseError(f"unknown criteria: {' '.join(unknown)}")
    results = []
    for n in names:
        r = acceptance.CRITERIA[n]()
        results.append(r)
        print(r.line(), file=sys.stderr, flush=True)
        (rep.add if r.passed else rep.fail)(n, ("PASS " if r.passed else "FAIL ") + r.detail)
    _figure(args, "acceptance", lambda p: _plot().acceptance_summary(results, p), rep)
    return rep


def _plot():
    from . import plotting
    return plotting


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("text", "machine"), default="text")
    common.add_argument("--figures", metavar="DIR", help="write matplotlib figures into DIR")

    p = argparse.ArgumentParser(prog="refposets", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext, depth=None, cap=None):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        if depth is not False:
            sp.add_argument("--depth", type=int, default=depth)
        if cap is not False:
            sp.add_argument("--cap", type=int, default=cap)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("classify", cmd_classify, "classify a presentation", cap=False)
    sp.add_argument("poset")
    sp = add("truncate", cmd_truncate, "materialize a truncation", depth=6, cap=250_000)
    sp.add_argument("poset")
    sp.add_argument("--out")
    sp = add("aut-exponent", cmd_aut_exponent, "exponent bound for automorphisms", depth=4, cap=250_000)
    sp.add_argument("poset")
    sp.add_argument("--samples", type=int, default=16)
    sp = add("nested-search", cmd_nested_search, "exhaustive nested-sequence search", depth=3, cap=16)
    sp.add_argument("poset")
    sp.add_argument("--length", type=int, default=8)
    sp = add("amalgamate", cmd_amalgamate, "random disjoint amalgamation instances", depth=16, cap=False)
    sp.add_argument("poset")
    sp.add_argument("--bound", type=int, default=6)
    sp.add_argument("--count", type=int, default=100)
    sp = add("build-family", cmd_build_family, "build and verify an indiscernible family",
             depth=12, cap=200_000)
    sp.add_argument("poset")
    sp.add_argument("-N", type=int, default=3)
    sp.add_argument("--size", type=int, default=2)
    sp.add_argument("--out")
    sp = add("cross-cutting", cmd_cross_cutting, "build and verify a cross-cutting witness",
             depth=16, cap=200_000)
    sp.add_argument("poset")
    sp.add_argument("--n0", type=int, default=3)
    sp.add_argument("--n1", type=int, default=3)
    sp.add_argument("--size", type=int, default=1)
    sp.add_argument("--out")
    sp = add("encode-bipartite", cmd_encode_bipartite, "encode a reduced bipartite graph",
             depth=16, cap=False)
    sp.add_argument("poset")
    sp.add_argument("graph")
    sp.add_argument("--size", type=int, default=1)
    sp.add_argument("--out")
    sp = add("decode-bipartite", cmd_decode_bipartite, "decode a colored model dump",
             depth=False, cap=False)
    sp.add_argument("model")
    sp.add_argument("--against", help="reference graph to compare with")
    sp.add_argument("--out")
    sp = add("shift1", cmd_shift1, "blow a coloring up into an uncolored model", depth=False, cap=False)
    sp.add_argument("model")
    sp.add_argument("--inverse", action="store_true", help="read a blown-up model back to a coloring")
    sp.add_argument("--out")
    sp = add("encode-twolevel", cmd_encode_twolevel, "encode a seeded tame expansion",
             depth=False, cap=False)
    sp.add_argument("--out")
    sp = add("recover", cmd_recover, "recover relations and coloring from a two-level dump",
             depth=False, cap=False)
    sp.add_argument("model")
    sp = add("sb-iso", cmd_sb_iso, "back-and-forth from mutual embeddings", depth=6, cap=False)
    for name in ("M", "N", "f", "g"):
        sp.add_argument(name, nargs="?")
    sp.add_argument("--instance", metavar="POSET", help="generate a seeded instance instead of reading files")
    sp.add_argument("--size", type=int, default=16)
    sp.add_argument("--colors", type=int, default=2)
    sp.add_argument("--save", metavar="DIR", help="write the generated instance files")
    sp.add_argument("--out")
    sp = add("reduct-classify", cmd_reduct_classify, "classify a reduct of a finite REF model",
             depth=False, cap=False)
    sp.add_argument("--model", required=True)
    sp.add_argument("--set", required=True)
    sp = add("selftest", cmd_selftest, "run the acceptance criteria", depth=False, cap=False)
    sp.add_argument("--only", nargs="+", metavar="NAME")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rep = args.fn(args)
    except ParseError as exc:
        print(f"usage-error: {exc}", file=sys.stderr)
        return 2
    except RefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(rep.render(args.format))
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
