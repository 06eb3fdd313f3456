"""The ``.apc`` patch-cord language: one statement per line, ``#`` comments.

::

    patch lowpass
    param b = 0.5
    input x
    block s1 = summer(k=[2.0, 2.0])
    block i1 = integrator(k=[1.0], ic=0.0)
    wire x -> s1.in[0]
    wire i1.out -> s1.in[1]
    wire s1.out -> i1.in[0]
    probe y = i1.out
    end
"""

from __future__ import annotations

import re
from dataclasses import fields
from typing import Optional

from .blocks import (
    PARAMS,
    Block,
    BlockError,
    BlockKind,
    Patch,
    PortRef,
    Wire,
    make_params,
    validate_patch,
)
from .diagnostics import Diagnostic, DiagnosticError, SourceSpan, error

ID = r"[a-z_][a-z0-9_]*"
NUM = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
SCALAR = rf"(?:{NUM}|[+-]?{ID})"

_STATEMENTS = {
    "patch": re.compile(rf"patch\s+(?P<id>{ID})$"),
    "param": re.compile(rf"param\s+(?P<id>{ID})\s*=\s*(?P<value>{SCALAR})$"),
    "input": re.compile(rf"input\s+(?P<id>{ID})$"),
    "output": re.compile(rf"output\s+(?P<id>{ID})$"),
    "block": re.compile(rf"block\s+(?P<id>{ID})\s*=\s*(?P<kind>{ID})\s*\((?P<args>.*)\)$"),
    "wire": re.compile(
        rf"wire\s+(?P<src>{ID})(?:\.(?P<sport>{ID}))?\s*->\s*"
        rf"(?P<dst>{ID})\.(?P<dport>{ID})(?:\[\s*(?P<idx>\d+)\s*\])?$"
    ),
    "probe": re.compile(rf"probe\s+(?P<id>{ID})\s*=\s*(?P<src>{ID})(?:\.(?P<sport>{ID}))?$"),
    "end": re.compile(r"end$"),
}
_ARG = re.compile(rf"\s*(?P<key>{ID})\s*=\s*(?P<value>\[[^\]]*\]|[^,\[\]]*?)\s*(?:,|$)")


class _Line:
    def __init__(self, lineno: int, raw: str):
        self.lineno = lineno
        body = raw.split("#", 1)[0].rstrip()
        self.offset = len(body) - len(body.lstrip())
        self.text = body.strip()

    def span(self, m: Optional[re.Match] = None, group: Optional[str] = None) -> SourceSpan:
        if m is None or group is None or m.start(group) < 0:
            return SourceSpan(self.lineno, self.offset + 1, len(self.text))
        return SourceSpan(self.lineno, self.offset + m.start(group) + 1, m.end(group) - m.start(group))


class _Parser:
    def __init__(self, text: str):
        self.lines = [_Line(i + 1, raw) for i, raw in enumerate(text.splitlines())]
        self.diags: list[Diagnostic] = []
        self.name: Optional[str] = None
        self.params: dict[str, float] = {}
        self.blocks: dict[str, Block] = {}
        # (wire, span of the src token, span of the dst token)
        self.wires: list[tuple[Wire, SourceSpan, SourceSpan]] = []
        self.ended = False

    def fail(self, code: str, message: str, span: SourceSpan) -> None:
        self.diags.append(error(code, message, span))

    def run(self) -> Patch:
        for line in self.lines:
            if line.text:
                self.statement(line)
        if self.name is None:
            last = self.lines[0].lineno if self.lines else 1
            self.fail("E_SYNTAX", "missing 'patch <name>' header", SourceSpan(last, 1, 0))
        elif not self.ended:
            last = self.lines[-1]
            self.fail("E_SYNTAX", "missing 'end'", SourceSpan(last.lineno, 1, len(last.text)))

        kept = []
        for wire, sspan, dspan in self.wires:
            ok = True
            for ref, span in ((wire.src, sspan), (wire.dst, dspan)):
                if ref.block not in self.blocks:
                    self.fail("E_UNKNOWN_ID", f"undeclared block {ref.block!r}", span)
                    ok = False
            if ok:
                kept.append(wire)
        patch = Patch(self.name or "patch", dict(self.blocks), tuple(kept), dict(self.params))
        if not self.diags:
            self.diags.extend(validate_patch(patch))
        return patch

    def statement(self, line: _Line) -> None:
        keyword = line.text.split(None, 1)[0]
        pattern = _STATEMENTS.get(keyword)
        m = pattern.match(line.text) if pattern else None
        if m is None:
            what = f"malformed '{keyword}' statement" if pattern else f"unknown statement {keyword!r}"
            self.fail("E_SYNTAX", what, line.span())
            return
        if self.ended:
            self.fail("E_SYNTAX", "statement after 'end'", line.span())
            return
        if keyword != "patch" and self.name is None:
            self.fail("E_SYNTAX", "first statement must be 'patch <name>'", line.span())
            return
        getattr(self, "do_" + keyword)(line, m)

    def do_patch(self, line, m):
        if self.name is not None:
            self.fail("E_SYNTAX", "duplicate 'patch' header", line.span())
        self.name = m["id"]

    def do_end(self, line, m):
        self.ended = True

    def do_param(self, line, m):
        if m["id"] in self.params:
            self.fail("E_DUPLICATE_ID", f"parameter {m['id']!r} already defined", line.span(m, "id"))
            return
        value = self.number(m["value"], line.span(m, "value"))
        if value is not None:
            self.params[m["id"]] = value

    def declare(self, line, m, kind, values) -> None:
        bid = m["id"]
        if bid in self.blocks:
            self.fail("E_DUPLICATE_ID", f"block {bid!r} already defined", line.span(m, "id"))
            return
        try:
            params = make_params(kind, **values)
        except BlockError as exc:
            self.fail(exc.code, str(exc), line.span(m, "args" if "args" in m.groupdict() else None))
            return
        self.blocks[bid] = Block(params.kind, params, line.span())

    def do_input(self, line, m):
        self.declare(line, m, BlockKind.INPUT, {})

    def do_output(self, line, m):
        self.declare(line, m, BlockKind.OUTPUT, {})

    def do_block(self, line, m):
        try:
            kind = BlockKind(m["kind"])
        except ValueError:
            self.fail("E_KIND", f"unknown block kind {m['kind']!r}", line.span(m, "kind"))
            return
        values = self.arguments(line, m, kind)
        if values is not None:
            self.declare(line, m, kind, values)

    def do_wire(self, line, m):
        sport = m["sport"] or "out"
        if sport != "out":
            self.fail("E_PORT", f"unknown output port {sport!r}", line.span(m, "sport"))
            return
        if m["dport"] != "in":
            self.fail("E_PORT", f"unknown input port {m['dport']!r}", line.span(m, "dport"))
            return
        wire = Wire(PortRef(m["src"]), PortRef(m["dst"], "in", int(m["idx"] or 0)), line.span())
        self.wires.append((wire, line.span(m, "src"), line.span(m, "dst")))

    def do_probe(self, line, m):
        sport = m["sport"] or "out"
        if sport != "out":
            self.fail("E_PORT", f"unknown output port {sport!r}", line.span(m, "sport"))
            return
        before = len(self.blocks)
        self.declare(line, m, BlockKind.PROBE, {})
        if len(self.blocks) > before:
            wire = Wire(PortRef(m["src"]), PortRef(m["id"], "in", 0), line.span())
            self.wires.append((wire, line.span(m, "src"), line.span(m, "id")))

    def arguments(self, line, m, kind) -> Optional[dict]:
        args = m["args"]
        base = m.start("args")
        values: dict = {}
        str_fields = PARAMS[kind].str_fields
        pos = 0
        while pos < len(args) and args[pos:].strip():
            am = _ARG.match(args, pos)
            if am is None or am.end() == pos:
                self.fail("E_SYNTAX", "malformed argument list", line.span(m, "args"))
                return None
            span = SourceSpan(line.lineno, line.offset + base + am.start("value") + 1,
                              am.end("value") - am.start("value"))
            key, raw = am["key"], am["value"]
            if key in values:
                self.fail("E_PARAM", f"parameter {key!r} given twice", span)
                return None
            if key in str_fields:
                if not re.fullmatch(ID, raw):
                    self.fail("E_PARAM", f"{key} expects a name", span)
                    return None
                values[key] = raw
            elif raw.startswith("["):
                items = [x.strip() for x in raw[1:-1].split(",")]
                items = [x for x in items if x] if not any(items) else items
                nums = [self.number(x, span) for x in items]
                if any(n is None for n in nums):
                    return None
                values[key] = nums
            else:
                n = self.number(raw, span)
                if n is None:
                    return None
                values[key] = n
            pos = am.end()
        return values

    def number(self, raw: str, span: SourceSpan) -> Optional[float]:
        raw = raw.strip()
        if re.fullmatch(NUM, raw):
            value = float(raw)
            if value != value or value in (float("inf"), float("-inf")):
                self.fail("E_SYNTAX", f"number out of range: {raw}", span)
                return None
            return value
        m = re.fullmatch(rf"([+-]?)({ID})", raw)
        if m is None:
            self.fail("E_SYNTAX", f"expected a number, got {raw!r}", span)
            return None
        if m[2] not in self.params:
            self.fail("E_UNKNOWN_ID", f"undefined parameter {m[2]!r}", span)
            return None
        return -self.params[m[2]] if m[1] == "-" else self.params[m[2]]


def parse_patch_diagnostics(text: str) -> tuple[Optional[Patch], list[Diagnostic]]:
    """Parse and validate; returns the patch (``None`` on error) and all diagnostics."""
    parser = _Parser(text)
    patch = parser.run()
    errors = [d for d in parser.diags if d.is_error]
    return (None if errors else patch), parser.diags


def parse_patch(text: str) -> Patch:
    """Parse ``.apc`` source into a validated :class:`Patch`.

    Raises :class:`DiagnosticError` carrying every error found.
    """
    patch, diags = parse_patch_diagnostics(text)
    if patch is None:
        raise DiagnosticError(diags)
    return patch


def format_number(value) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return "[" + ", ".join(format_number(v) for v in value) + "]"
    if isinstance(value, str):
        return value
    return format_number(value)


def serialize_patch(patch: Patch) -> str:
    """Canonical ``.apc`` text: blocks in declaration order with every
    parameter spelled out, then wires, then probes."""
    out = [f"patch {patch.name}"]
    out += [f"param {k} = {format_number(v)}" for k, v in patch.params.items()]
    probes = patch.probes
    folded: set[PortRef] = set()
    for bid, blk in patch.blocks.items():
        if blk.kind is BlockKind.INPUT:
            out.append(f"input {bid}")
        elif blk.kind is BlockKind.OUTPUT and blk.params.g == 1.0:
            out.append(f"output {bid}")
        elif blk.kind is BlockKind.PROBE and probes[bid] is not None:
            folded.add(PortRef(bid, "in", 0))
        else:
            args = ", ".join(f"{f.name}={_format_value(getattr(blk.params, f.name))}"
                             for f in fields(blk.params))
            out.append(f"block {bid} = {blk.kind.value}({args})")

    def src(ref: PortRef) -> str:
        return ref.block if patch.blocks[ref.block].kind is BlockKind.INPUT else f"{ref.block}.out"

    out += [f"wire {src(w.src)} -> {w.dst}" for w in patch.wires if w.dst not in folded]
    out += [f"probe {p} = {src(ref)}" for p, ref in probes.items() if ref is not None]
    out.append("end")
    return "\n".join(out) + "\n"
