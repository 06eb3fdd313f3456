"""Analogue computing elements and the patch graph that wires them together.

Every signal is a machine voltage.  Gain, summer and integrator blocks are
inverting, as their op-amp realisations are; the attenuator is passive and
never inverts.  All block outputs saturate at the machine rails.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import ClassVar, Iterable, Mapping, Optional, Sequence

from .diagnostics import Diagnostic, SourceSpan, error
from .graph import cycles

V_RAIL = 10.0
DEFAULT_SAMPLE_RATE = 48000.0
MIDDLE_C = 261.63
GATE_THRESHOLD = 2.5

IDENT = re.compile(r"[a-z_][a-z0-9_]*\Z")


class BlockKind(str, Enum):
    ATTEN = "atten"
    GAIN = "gain"
    SUMMER = "summer"
    INTEGRATOR = "integrator"
    MULTIPLIER = "multiplier"
    CONST = "const"
    OSC = "osc"
    NOISE = "noise"
    ENV = "env"
    SEQ = "seq"
    CMP = "cmp"
    LIM = "lim"
    BBD = "bbd"
    INPUT = "input"
    OUTPUT = "output"
    PROBE = "probe"

    @property
    def stateful(self) -> bool:
        """True when the output does not depend on the instantaneous input."""
        return self in (BlockKind.INTEGRATOR, BlockKind.BBD)

    @property
    def is_sink(self) -> bool:
        return self in (BlockKind.OUTPUT, BlockKind.PROBE)


class BlockError(ValueError):
    """Bad block parameters or a port-signature mismatch."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _finite(name: str, value: float) -> list[str]:
    return [] if math.isfinite(value) else [f"{name} must be finite"]


@dataclass(frozen=True)
class BlockParams:
    """Base for the per-kind coefficient records.

    Field declaration order is the canonical key order used by the
    serializer.  Sequence fields are stored as tuples of floats.
    """

    kind: ClassVar[BlockKind]
    int_fields: ClassVar[tuple[str, ...]] = ()
    str_fields: ClassVar[tuple[str, ...]] = ()

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in self.str_fields:
                if not isinstance(value, str):
                    raise BlockError("E_PARAM", f"{self.kind.value}.{f.name} must be a name")
                continue
            if isinstance(value, (list, tuple)):
                value = tuple(float(v) for v in value)
            elif f.name in self.int_fields:
                if isinstance(value, float):
                    if not value.is_integer():
                        raise BlockError("E_PARAM", f"{self.kind.value}.{f.name} must be an integer")
                    value = int(value)
                elif not isinstance(value, int) or isinstance(value, bool):
                    raise BlockError("E_PARAM", f"{self.kind.value}.{f.name} must be an integer")
            elif isinstance(value, (int, float)) and not isinstance(value, bool):
                value = float(value)
            else:
                raise BlockError("E_PARAM", f"{self.kind.value}.{f.name} must be a number")
            object.__setattr__(self, f.name, value)
        bad = self.problems()
        if bad:
            raise BlockError("E_PARAM", f"{self.kind.value}: " + "; ".join(bad))

    def problems(self) -> list[str]:
        out: list[str] = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                for v in value:
                    out += _finite(f.name, v)
            elif isinstance(value, float):
                out += _finite(f.name, value)
        return out

    @property
    def n_inputs(self) -> int:
        return 1

    @property
    def n_outputs(self) -> int:
        return 0 if self.kind.is_sink else 1

    def values(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Atten(BlockParams):
    kind: ClassVar = BlockKind.ATTEN
    a: float = 1.0

    def problems(self):
        return super().problems() + ([] if 0.0 <= self.a <= 1.0 else ["a must lie in [0, 1]"])


@dataclass(frozen=True)
class Gain(BlockParams):
    kind: ClassVar = BlockKind.GAIN
    k: float = 1.0

    def problems(self):
        return super().problems() + ([] if self.k >= 0 else ["k must be a non-negative magnitude"])


def _coeff_problems(k: tuple) -> list[str]:
    if not k:
        return ["k needs at least one coefficient"]
    if any(c < 0 for c in k):
        return ["k entries must be non-negative magnitudes"]
    return []


@dataclass(frozen=True)
class Summer(BlockParams):
    kind: ClassVar = BlockKind.SUMMER
    k: tuple = (1.0, 1.0)

    def problems(self):
        return super().problems() + _coeff_problems(self.k)

    @property
    def n_inputs(self):
        return len(self.k)


@dataclass(frozen=True)
class Integrator(BlockParams):
    kind: ClassVar = BlockKind.INTEGRATOR
    k: tuple = (1.0,)
    ic: float = 0.0

    def problems(self):
        return super().problems() + _coeff_problems(self.k)

    @property
    def n_inputs(self):
        return len(self.k)


@dataclass(frozen=True)
class Multiplier(BlockParams):
    kind: ClassVar = BlockKind.MULTIPLIER
    s: float = 0.1

    @property
    def n_inputs(self):
        return 2


@dataclass(frozen=True)
class Const(BlockParams):
    kind: ClassVar = BlockKind.CONST
    v: float = 0.0

    @property
    def n_inputs(self):
        return 0


OSC_SHAPES = ("sine", "tri", "saw", "square")


@dataclass(frozen=True)
class Osc(BlockParams):
    """Input 0 is the 1 V/octave pitch control."""

    kind: ClassVar = BlockKind.OSC
    str_fields: ClassVar = ("shape",)
    shape: str = "sine"
    f_ref: float = MIDDLE_C
    amp: float = 1.0

    def problems(self):
        out = super().problems()
        if self.shape not in OSC_SHAPES:
            out.append(f"shape must be one of {', '.join(OSC_SHAPES)}")
        if not self.f_ref > 0:
            out.append("f_ref must be positive")
        if self.amp < 0:
            out.append("amp must be non-negative")
        return out


@dataclass(frozen=True)
class Noise(BlockParams):
    kind: ClassVar = BlockKind.NOISE
    int_fields: ClassVar = ("seed",)
    seed: int = 0
    amp: float = 1.0

    def problems(self):
        out = super().problems()
        if not 0 <= self.seed < 2**64:
            out.append("seed must be a 64-bit unsigned integer")
        if self.amp < 0:
            out.append("amp must be non-negative")
        return out

    @property
    def n_inputs(self):
        return 0


@dataclass(frozen=True)
class Env(BlockParams):
    """ADSR envelope; input 0 is the gate.  Output runs from 0 to 1 V."""

    kind: ClassVar = BlockKind.ENV
    a: float = 0.01
    d: float = 0.1
    s: float = 0.7
    r: float = 0.3

    def problems(self):
        out = super().problems()
        if min(self.a, self.d, self.r) < 0:
            out.append("a, d and r must be non-negative")
        if not 0.0 <= self.s <= 1.0:
            out.append("s must lie in [0, 1]")
        return out


@dataclass(frozen=True)
class Seq(BlockParams):
    """Breakpoint function of time: values ``v`` at times ``t``."""

    kind: ClassVar = BlockKind.SEQ
    str_fields: ClassVar = ("mode",)
    t: tuple = (0.0,)
    v: tuple = (0.0,)
    mode: str = "step"

    def problems(self):
        out = super().problems()
        if len(self.t) != len(self.v) or not self.t:
            out.append("t and v must be non-empty and of equal length")
        elif any(b < a for a, b in zip(self.t, self.t[1:])):
            out.append("t must be non-decreasing")
        if self.mode not in ("step", "linear"):
            out.append("mode must be step or linear")
        return out

    @property
    def n_inputs(self):
        return 0


@dataclass(frozen=True)
class Cmp(BlockParams):
    kind: ClassVar = BlockKind.CMP
    hi: float = V_RAIL
    lo: float = 0.0

    @property
    def n_inputs(self):
        return 2


@dataclass(frozen=True)
class Lim(BlockParams):
    kind: ClassVar = BlockKind.LIM
    lo: float = -V_RAIL
    hi: float = V_RAIL

    def problems(self):
        return super().problems() + ([] if self.lo <= self.hi else ["lo must not exceed hi"])


@dataclass(frozen=True)
class Bbd(BlockParams):
    kind: ClassVar = BlockKind.BBD
    int_fields: ClassVar = ("n",)
    n: int = 512
    f_clk: float = 20000.0

    def problems(self):
        out = super().problems()
        if self.n < 1:
            out.append("n must be at least 1")
        if not self.f_clk > 0:
            out.append("f_clk must be positive")
        return out

    @property
    def delay(self) -> float:
        return self.n / (2.0 * self.f_clk)


@dataclass(frozen=True)
class Input(BlockParams):
    kind: ClassVar = BlockKind.INPUT

    @property
    def n_inputs(self):
        return 0


@dataclass(frozen=True)
class Output(BlockParams):
    """Audio pre-amplifier: records ``g * v`` as an audio channel."""

    kind: ClassVar = BlockKind.OUTPUT
    g: float = 1.0

    def problems(self):
        return super().problems() + ([] if self.g >= 0 else ["g must be non-negative"])


@dataclass(frozen=True)
class Probe(BlockParams):
    kind: ClassVar = BlockKind.PROBE


PARAMS: dict[BlockKind, type[BlockParams]] = {
    cls.kind: cls
    for cls in (Atten, Gain, Summer, Integrator, Multiplier, Const, Osc, Noise, Env,
                Seq, Cmp, Lim, Bbd, Input, Output, Probe)
}


def make_params(kind: BlockKind | str, **values) -> BlockParams:
    """Build the parameter record for ``kind``; raises :class:`BlockError`."""
    try:
        kind = BlockKind(kind)
    except ValueError:
        raise BlockError("E_KIND", f"unknown block kind {kind!r}") from None
    cls = PARAMS[kind]
    known = {f.name for f in fields(cls)}
    extra = sorted(set(values) - known)
    if extra:
        raise BlockError("E_PARAM", f"{kind.value} has no parameter {extra[0]!r}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise BlockError("E_PARAM", f"{kind.value}: {exc}") from None


# --------------------------------------------------------------------------
# Semantics


def clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def osc_shape(shape: str, phase: float) -> float:
    """Unit-amplitude waveform at ``phase`` radians."""
    p = phase % (2.0 * math.pi)
    if shape == "sine":
        return math.sin(p)
    if shape == "square":
        return 1.0 if p < math.pi else -1.0
    if shape == "saw":
        return p / math.pi - 1.0
    # triangle starting at 0 rising to +1 at pi/2
    x = p / (2.0 * math.pi)
    return 4.0 * x if x < 0.25 else 2.0 - 4.0 * x if x < 0.75 else 4.0 * x - 4.0


def vco_frequency(f_ref: float, v_ctrl: float, nyquist: float = DEFAULT_SAMPLE_RATE / 2) -> float:
    """Exponential 1 V/octave pitch mapping, kept below the Nyquist limit."""
    if not f_ref > 0:
        raise ValueError("f_ref must be positive")
    f = f_ref * 2.0 ** v_ctrl
    return min(f, nyquist) if f > 0 else math.ulp(0.0)


def seq_value(p: Seq, t: float) -> float:
    ts, vs = p.t, p.v
    if t < ts[0]:
        return vs[0]
    if t >= ts[-1]:
        return vs[-1]
    # last breakpoint at or before t
    lo, hi = 0, len(ts) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ts[mid] <= t:
            lo = mid
        else:
            hi = mid
    if p.mode == "step" or ts[hi] == ts[lo]:
        return vs[lo]
    w = (t - ts[lo]) / (ts[hi] - ts[lo])
    return vs[lo] + w * (vs[hi] - vs[lo])


def _check_arity(params: BlockParams, inputs: Sequence[float]) -> None:
    if len(inputs) != params.n_inputs:
        raise BlockError(
            "E_ARITY",
            f"{params.kind.value} takes {params.n_inputs} inputs, got {len(inputs)}",
        )


def integrator_rate(params: Integrator, inputs: Sequence[float]) -> float:
    """dV/dt of an integrator: the negated weighted input sum."""
    _check_arity(params, inputs)
    return -sum(k * v for k, v in zip(params.k, inputs))


def eval_block(
    kind: BlockKind | str,
    params: BlockParams,
    inputs: Sequence[float],
    state: Optional[float] = None,
    t: float = 0.0,
    rail: float = V_RAIL,
    nyquist: float = DEFAULT_SAMPLE_RATE / 2,
) -> float:
    """Instantaneous output of one block, rail-clamped.

    ``state`` carries whatever the block holds between evaluations: the
    integrator voltage, oscillator phase, held noise/envelope/delay output,
    or the external value of an input block.
    """
    kind = BlockKind(kind)
    if params.kind is not kind:
        raise BlockError("E_PARAM", f"{type(params).__name__} parameters given for {kind.value}")
    _check_arity(params, inputs)
    if kind is BlockKind.GAIN:
        out = -params.k * inputs[0]
    elif kind is BlockKind.ATTEN:
        out = params.a * inputs[0]
    elif kind is BlockKind.SUMMER:
        out = -sum(k * v for k, v in zip(params.k, inputs))
    elif kind is BlockKind.INTEGRATOR:
        out = params.ic if state is None else state
    elif kind is BlockKind.MULTIPLIER:
        out = params.s * inputs[0] * inputs[1]
    elif kind is BlockKind.CMP:
        out = params.hi if inputs[0] > inputs[1] else params.lo
    elif kind is BlockKind.LIM:
        out = clamp(inputs[0], params.lo, params.hi)
    elif kind is BlockKind.OSC:
        out = params.amp * osc_shape(params.shape, state or 0.0)
    elif kind is BlockKind.CONST:
        out = params.v
    elif kind is BlockKind.SEQ:
        out = seq_value(params, t)
    elif kind is BlockKind.OUTPUT:
        out = params.g * inputs[0]
    elif kind is BlockKind.PROBE:
        out = inputs[0]
    else:
        # noise, env, bbd, input: output is the held value
        out = state or 0.0
    if not math.isfinite(out):
        raise BlockError("E_OVERFLOW", f"{kind.value} produced a non-finite value")
    return clamp(out, -rail, rail)


# --------------------------------------------------------------------------
# Patch graph

_REF = re.compile(r"([a-z_][a-z0-9_]*)(?:\.(out|in)(?:\[(\d+)\])?)?\Z")


@dataclass(frozen=True)
class PortRef:
    block: str
    port: str = "out"
    index: int = 0

    def __str__(self) -> str:
        return f"{self.block}.out" if self.port == "out" else f"{self.block}.in[{self.index}]"

    @classmethod
    def parse(cls, text: str, default_port: str = "out") -> "PortRef":
        m = _REF.match(text.strip())
        if not m:
            raise ValueError(f"bad port reference {text!r}")
        return cls(m.group(1), m.group(2) or default_port, int(m.group(3) or 0))


@dataclass(frozen=True)
class Block:
    kind: BlockKind
    params: BlockParams
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Wire:
    src: PortRef
    dst: PortRef
    span: Optional[SourceSpan] = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.src} -> {self.dst}"


@dataclass(frozen=True, eq=True)
class Patch:
    """An analogue program: blocks keyed by id, in declaration order, plus wires.

    External inputs are ``input`` blocks and recorded signals are ``probe``
    blocks, so they take part in the graph like any other element.
    """

    name: str
    blocks: Mapping[str, Block]
    wires: tuple[Wire, ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)

    __hash__ = None  # type: ignore[assignment]

    def ids(self, kind: BlockKind) -> list[str]:
        return [b for b, blk in self.blocks.items() if blk.kind is kind]

    @property
    def inputs(self) -> list[str]:
        return self.ids(BlockKind.INPUT)

    @property
    def outputs(self) -> list[str]:
        return self.ids(BlockKind.OUTPUT)

    @property
    def probes(self) -> dict[str, Optional[PortRef]]:
        """Probe name -> the port it records (``None`` if undriven)."""
        return {p: self.driver(PortRef(p, "in", 0)) for p in self.ids(BlockKind.PROBE)}

    def driver(self, dst: PortRef) -> Optional[PortRef]:
        for w in self.wires:
            if w.dst == dst:
                return w.src
        return None

    def isomorphic(self, other: "Patch") -> bool:
        """Same labelled graph and parameters, ignoring wire order and spans."""
        key = lambda w: (w.src.block, w.src.port, w.src.index, w.dst.block, w.dst.port, w.dst.index)
        return (
            self.name == other.name
            and dict(self.params) == dict(other.params)
            and dict(self.blocks) == dict(other.blocks)
            and sorted(map(key, self.wires)) == sorted(map(key, other.wires))
        )


class PatchBuilder:
    """Incremental construction of an immutable :class:`Patch`."""

    def __init__(self, name: str, params: Optional[Mapping[str, float]] = None):
        self.name = name
        self.params: dict[str, float] = dict(params or {})
        self.blocks: dict[str, Block] = {}
        self.wires: list[Wire] = []

    @classmethod
    def from_patch(cls, patch: Patch) -> "PatchBuilder":
        b = cls(patch.name, patch.params)
        b.blocks = dict(patch.blocks)
        b.wires = list(patch.wires)
        return b

    def add(self, block_id: str, kind: BlockKind | str, span: Optional[SourceSpan] = None, **params) -> str:
        if block_id in self.blocks:
            raise BlockError("E_DUPLICATE_ID", f"block {block_id!r} already defined")
        p = make_params(kind, **params)
        self.blocks[block_id] = Block(p.kind, p, span)
        return block_id

    def fresh_id(self, stem: str) -> str:
        i = 1
        while f"{stem}{i}" in self.blocks:
            i += 1
        return f"{stem}{i}"

    def wire(self, src: PortRef | str, dst: PortRef | str, span: Optional[SourceSpan] = None) -> None:
        if isinstance(src, str):
            src = PortRef.parse(src, "out")
        if isinstance(dst, str):
            dst = PortRef.parse(dst, "in")
        self.wires.append(Wire(src, dst, span))

    def probe(self, name: str, src: PortRef | str) -> str:
        self.add(name, BlockKind.PROBE)
        self.wire(src, PortRef(name, "in", 0))
        return name

    def build(self) -> Patch:
        return Patch(self.name, dict(self.blocks), tuple(self.wires), dict(self.params))


def validate_patch(patch: Patch) -> list[Diagnostic]:
    """All invariant violations of ``patch``; empty iff it can be simulated."""
    diags: list[Diagnostic] = []
    for bid, blk in patch.blocks.items():
        if not IDENT.match(bid):
            diags.append(error("E_SYNTAX", f"invalid block id {bid!r}", blk.span))
        if blk.params.kind is not blk.kind:
            diags.append(error("E_PARAM", f"{bid}: parameters do not match kind {blk.kind.value}", blk.span))
            continue
        for msg in blk.params.problems():
            diags.append(error("E_PARAM", f"{bid}: {msg}", blk.span))

    good: list[Wire] = []
    drivers: dict[PortRef, Wire] = {}
    for w in patch.wires:
        ok = True
        for ref, role in ((w.src, "source"), (w.dst, "destination")):
            if ref.block not in patch.blocks:
                diags.append(error("E_UNKNOWN_ID", f"wire {w}: unknown {role} block {ref.block!r}", w.span))
                ok = False
        if not ok:
            continue
        src_blk, dst_blk = patch.blocks[w.src.block], patch.blocks[w.dst.block]
        if w.src.port != "out" or w.src.index != 0 or src_blk.params.n_outputs == 0:
            diags.append(error("E_PORT", f"wire {w}: {w.src} is not an output port", w.span))
            ok = False
        n_in = dst_blk.params.n_inputs
        if w.dst.port != "in" or not 0 <= w.dst.index < n_in:
            diags.append(error(
                "E_PORT", f"wire {w}: {w.dst} is not an input port of {dst_blk.kind.value} "
                f"({n_in} inputs)", w.span))
            ok = False
        if not ok:
            continue
        if w.dst in drivers:
            diags.append(error("E_DUPLICATE_DRIVER", f"wire {w}: {w.dst} already driven by "
                               f"{drivers[w.dst].src}", w.span))
            continue
        drivers[w.dst] = w
        good.append(w)

    ids = list(patch.blocks)
    edges = [(w.src.block, w.dst.block) for w in good if not patch.blocks[w.src.block].kind.stateful]
    for comp in cycles(ids, edges):
        members = set(comp)
        span = next((w.span for w in good if w.src.block in members and w.dst.block in members), None)
        diags.append(error(
            "E_ALGEBRAIC_LOOP",
            "feedback loop without an integrator or delay through " + ", ".join(comp),
            span,
        ))
    return diags


def upstream(patch: Patch, targets: Iterable[str]) -> set[str]:
    """Blocks whose outputs combinationally reach ``targets`` (inclusive)."""
    feeds: dict[str, list[str]] = {b: [] for b in patch.blocks}
    for w in patch.wires:
        if w.dst.block in feeds and w.src.block in feeds:
            feeds[w.dst.block].append(w.src.block)
    seen: set[str] = set()
    todo = list(targets)
    while todo:
        b = todo.pop()
        if b in seen:
            continue
        seen.add(b)
        if b in targets or not patch.blocks[b].kind.stateful:
            todo.extend(feeds[b])
    return seen
