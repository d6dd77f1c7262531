"""Text formats: model dumps (with optional color and class columns), embeddings."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError
from .model_core import Element, TruncatedModel
from .poset_core import FinitePoset, Presentation, parse_presentation, truncate


@dataclass
class ModelFile:
    model: TruncatedModel
    source: str
    depth: int
    colors: tuple[int, ...] | None = None
    classes: tuple[int, ...] | None = None
    sections: dict[str, str] | None = None

    @property
    def presentation(self) -> Presentation:
        return parse_presentation(self.source)


def dump_model(m: TruncatedModel, source: str, depth: int, colors=None, classes=None,
               poset_file: str | None = None, sections: dict[str, str] | None = None) -> str:
    """Header, then one line of coordinates per element in node order.

    Trailing columns (``color``, ``class``) are announced by the ``columns`` line.
    Extra sections start with a ``[name]`` line and run to the next section.
    """
    cols = ["coords"] + (["color"] if colors is not None else []) + (["class"] if classes is not None else [])
    lines = ["model", f"poset-file {poset_file or '-'}", f"poset {source}", f"depth {depth}",
             f"tags {m.tags}", "columns " + " ".join(cols)]
    for i, e in enumerate(m.elements):
        row = list(map(str, e))
        if colors is not None:
            row.append(str(colors[i]))
        if classes is not None:
            row.append(str(classes[i]))
        lines.append(" ".join(row))
    out = "\n".join(lines) + "\n"
    for name, body in (sections or {}).items():
        out += body if body.startswith(f"[{name}]") else f"[{name}]\n{body}"
    return out


def load_model(text: str) -> ModelFile:
    head: dict[str, str] = {}
    rows: list[list[int]] = []
    sections: dict[str, list[str]] = {}
    current = None
    lines = text.splitlines()
    if not lines or lines[0].strip() != "model":
        raise ParseError("model file must start with 'model'")
    try:
        for ln in lines[1:]:
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1]
                sections[current] = [s]
                continue
            if current is not None:
                sections[current].append(s)
                continue
            key = s.split()[0]
            if key in ("poset-file", "poset", "depth", "tags", "columns"):
                head[key] = s[len(key):].strip()
            else:
                rows.append([int(t) for t in s.split()])
        source, depth = head["poset"], int(head["depth"])
        tags = int(head.get("tags", "0"))
        cols = head.get("columns", "coords").split()
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}") from exc
    P = truncate(parse_presentation(source), depth)
    width = P.n + tags
    extra = len(cols) - 1
    for r in rows:
        if len(r) != width + extra:
            raise ParseError(f"row has {len(r)} columns, expected {width + extra}")
    m = TruncatedModel(P, [tuple(r[:width]) for r in rows], tags=tags)
    colors = tuple(r[width + cols.index("color") - 1] for r in rows) if "color" in cols else None
    classes = tuple(r[width + cols.index("class") - 1] for r in rows) if "class" in cols else None
    return ModelFile(m, source, depth, colors, classes,
                     {k: "\n".join(v) + "\n" for k, v in sections.items()})


def dump_embedding(f: dict, src: TruncatedModel, dst: TruncatedModel) -> str:
    """One ``i j`` line per element: index in the source, index of its image."""
    return "".join(f"{src.index[x]} {dst.index[y]}\n" for x, y in sorted(f.items(), key=lambda p: src.index[p[0]]))


def load_embedding(text: str, src: TruncatedModel, dst: TruncatedModel) -> dict[Element, Element]:
    out = {}
    try:
        for ln in text.splitlines():
            if ln.strip() and not ln.startswith("#"):
                i, j = map(int, ln.split())
                out[src.elements[i]] = dst.elements[j]
    except (ValueError, IndexError) as exc:
        raise ParseError("malformed embedding file") from exc
    return out


def describe_poset(P: FinitePoset) -> list[str]:
    from .poset_core import format_address
    out = []
    for i, a in enumerate(P.nodes):
        below = [format_address(P.nodes[j]) for j in range(P.n) if j != i and P.below[i] >> j & 1]
        out.append(f"{format_address(a)} delta={P.delta[i]} height={P.heights[i]} below=[{' '.join(below)}]")
    return out


def mask_names(P: FinitePoset, mask: int) -> str:
    from .poset_core import bits, format_address
    return " ".join(format_address(P.nodes[i]) for i in bits(mask))


def names_mask(P: FinitePoset, names: str) -> int:
    from .poset_core import format_address
    index = {format_address(a): i for i, a in enumerate(P.nodes)}
    try:
        return sum(1 << index[t] for t in names.split())
    except KeyError as exc:
        raise ParseError(f"unknown node {exc.args[0]}") from exc


def closures_section(P: FinitePoset, sides: tuple[int, int], closures: tuple[int, int]) -> str:
    """Node sets of the two sides and of the closures defining ``E^0``, ``E^1``."""
    return ("[cross-cutting]\n"
            f"side0 {mask_names(P, sides[0])}\nside1 {mask_names(P, sides[1])}\n"
            f"closure0 {mask_names(P, closures[0])}\nclosure1 {mask_names(P, closures[1])}\n")


def read_closures(P: FinitePoset, section: str) -> tuple[int, int]:
    vals = {}
    for ln in section.splitlines():
        parts = ln.split(None, 1)
        if parts and parts[0] in ("closure0", "closure1"):
            vals[parts[0]] = names_mask(P, parts[1] if len(parts) > 1 else "")
    if len(vals) != 2:
        raise ParseError("cross-cutting section lacks closure0/closure1")
    return vals["closure0"], vals["closure1"]


def write_atomic(path: str, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    import os
    import tempfile
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
