"""Continuous-time simulation of patches.

A valid patch is compiled into integrator state slots plus a topologically
ordered schedule of stateless blocks.  Time integration is classical
fixed-step RK4 at ``sample_rate * oversample``; probes are sampled every
``oversample`` substeps.  For speed the schedule is turned into straight-line
Python source once per render, so the inner loop runs without per-block
dispatch.

Held (non-RK) state is advanced once per substep from the values seen at
the start of the step: bucket-brigade delay lines, envelope generators, and
noise sources (which only draw a new value once per output sample).
"""

from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from . import blocks as B
from .blocks import BlockKind, Patch, PortRef, validate_patch
from .diagnostics import DiagnosticError, error
from .graph import ordered_toposort

TWO_PI = 2.0 * math.pi
MASK64 = (1 << 64) - 1
KERNEL_CACHE = 32


@dataclass(frozen=True)
class EngineConfig:
    sample_rate: float = B.DEFAULT_SAMPLE_RATE
    oversample: int = 4
    rail: float = B.V_RAIL

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if int(self.oversample) != self.oversample or self.oversample < 1:
            raise ValueError("oversample must be an integer >= 1")
        if not self.rail > 0:
            raise ValueError("rail must be positive")

    @property
    def h(self) -> float:
        return 1.0 / (self.sample_rate * self.oversample)

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0


# --------------------------------------------------------------------------
# External input signals


class Signal:
    """A named external input; subclasses may inline themselves as source."""

    def __call__(self, t: float) -> float:
        raise NotImplementedError

    def source(self, t: str, name: str) -> tuple[str, dict]:
        return f"{name}({t})", {name: self}


@dataclass(frozen=True)
class Step(Signal):
    amp: float = 1.0
    t0: float = 0.0

    def __call__(self, t):
        return self.amp if t >= self.t0 else 0.0

    def source(self, t, name):
        return f"({float(self.amp)!r} if ({t}) >= {float(self.t0)!r} else 0.0)", {}


@dataclass(frozen=True)
class Sine(Signal):
    freq: float
    amp: float = 1.0
    phase: float = 0.0
    delay: float = 0.0

    def __call__(self, t):
        if t < self.delay:
            return 0.0
        return self.amp * math.sin(TWO_PI * self.freq * (t - self.delay) + self.phase)

    def source(self, t, name):
        if self.delay:
            return f"{name}({t})", {name: self}
        w, amp, ph = float(TWO_PI * self.freq), float(self.amp), float(self.phase)
        return f"{amp!r} * _sin({w!r} * ({t}) + {ph!r})", {}


@dataclass(frozen=True)
class Samples(Signal):
    """Zero-order hold over samples at ``rate``; zero outside the recording."""

    values: tuple
    rate: float

    def __call__(self, t):
        i = int(t * self.rate) if t >= 0 else -1
        return self.values[i] if 0 <= i < len(self.values) else 0.0


@dataclass(frozen=True)
class Function(Signal):
    fn: Callable[[float], float]

    def __call__(self, t):
        return float(self.fn(t))


InputSpec = Union[Signal, Callable[[float], float], float]


def as_signal(spec: InputSpec) -> Signal:
    if isinstance(spec, Signal):
        return spec
    if callable(spec):
        return Function(spec)
    return Step(float(spec))


# --------------------------------------------------------------------------
# Held state


def splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class NoiseSource:
    """Uniform white noise in [-amp, amp]."""

    def __init__(self, seed: int, amp: float, run_seed: int = 0):
        self.state = (seed ^ splitmix64(run_seed & MASK64)[1]) & MASK64
        self.amp = amp
        self.value = 0.0

    def next(self) -> float:
        self.state, z = splitmix64(self.state)
        self.value = self.amp * (2.0 * (z >> 11) * 2.0**-53 - 1.0)
        return self.value


class DelayLine:
    """N-stage bucket brigade, clocked at ``2 * f_clk`` transfers per second."""

    def __init__(self, n: int, f_clk: float):
        self.period = 1.0 / (2.0 * f_clk)
        self.buf = deque([0.0] * n, maxlen=n)
        self.ticks = 0
        self.out = 0.0

    def clock(self, t_end: float, value: float) -> float:
        # ticks land on the nearest substep boundary at or after their time
        while (self.ticks + 1) * self.period <= t_end * (1 + 1e-12):
            self.ticks += 1
            self.out = self.buf[0]
            self.buf.append(value)
        return self.out


class Envelope:
    """Linear-segment ADSR; gate above 2.5 V is on, retriggers restart the
    attack from the current level."""

    def __init__(self, p: B.Env):
        self.p = p
        self.level = 0.0
        self.stage = "idle"
        self.gate = False

    def update(self, gate_v: float, h: float) -> float:
        p = self.p
        on = gate_v > B.GATE_THRESHOLD
        if on and not self.gate:
            self.stage = "attack"
        elif self.gate and not on:
            self.stage = "release"
        self.gate = on
        lvl = self.level
        if self.stage == "attack":
            lvl = lvl + h / p.a if p.a > 0 else 1.0
            if lvl >= 1.0:
                lvl, self.stage = 1.0, "decay"
        elif self.stage == "decay":
            lvl = lvl - h * (1.0 - p.s) / p.d if p.d > 0 else p.s
            if lvl <= p.s:
                lvl, self.stage = p.s, "sustain"
        elif self.stage == "sustain":
            lvl = p.s
        elif self.stage == "release":
            lvl = lvl - h / p.r if p.r > 0 else 0.0
            if lvl <= 0.0:
                lvl, self.stage = 0.0, "idle"
        self.level = lvl
        return lvl


# --------------------------------------------------------------------------
# Compiled form


@dataclass(frozen=True)
class StateSlot:
    block: str
    kind: BlockKind
    offset: int
    size: int


@dataclass
class SimState:
    """Integrator voltages and oscillator phases (``x``, advanced by RK4)
    plus the held state objects of delay, envelope and noise blocks."""

    x: list
    held: dict

    def copy(self) -> "SimState":
        return SimState(list(self.x), copy.deepcopy(self.held))

    def value(self, system: "CompiledSystem", block: str) -> float:
        return self.x[system.x_index[block]]


@dataclass
class CompiledSystem:
    patch: Patch
    config: EngineConfig
    layout: list[StateSlot]
    schedule: list[str]
    probes: dict[str, Optional[PortRef]]
    x_index: dict[str, int]
    _kernels: dict = field(default_factory=dict, repr=False)

    @property
    def n_slots(self) -> int:
        return sum(s.size for s in self.layout)

    def initial_state(self, seed: int = 0) -> SimState:
        x = [0.0] * len(self.x_index)
        held: dict = {}
        for bid, blk in self.patch.blocks.items():
            p = blk.params
            if blk.kind is BlockKind.INTEGRATOR:
                x[self.x_index[bid]] = B.clamp(p.ic, -self.config.rail, self.config.rail)
            elif blk.kind is BlockKind.BBD:
                held[bid] = DelayLine(p.n, p.f_clk)
            elif blk.kind is BlockKind.ENV:
                held[bid] = Envelope(p)
            elif blk.kind is BlockKind.NOISE:
                held[bid] = NoiseSource(p.seed, p.amp, seed)
        return SimState(x, held)

    def kernel(self, inputs: Mapping[str, Signal]):
        # Signals are frozen dataclasses, so equal inputs share a kernel.
        key = tuple(sorted(inputs.items(), key=lambda kv: kv[0]))
        if key not in self._kernels:
            if len(self._kernels) >= KERNEL_CACHE:
                self._kernels.pop(next(iter(self._kernels)))
            self._kernels[key] = _generate(self, inputs)
        return self._kernels[key]


def build_system(patch: Patch, config: Optional[EngineConfig] = None) -> CompiledSystem:
    """Compile a valid patch: state layout plus a deterministic evaluation order."""
    config = config or EngineConfig()
    diags = validate_patch(patch)
    if diags:
        raise DiagnosticError(diags)
    ids = list(patch.blocks)
    edges = [(w.src.block, w.dst.block) for w in patch.wires
             if not patch.blocks[w.src.block].kind.stateful]
    order, leftover = ordered_toposort(ids, edges)
    if leftover:
        raise DiagnosticError([error("E_ALGEBRAIC_LOOP", "stateless cycle through " + ", ".join(leftover))])
    skip = (BlockKind.INTEGRATOR, BlockKind.BBD, BlockKind.INPUT, BlockKind.PROBE, BlockKind.OUTPUT)
    schedule = [b for b in order if patch.blocks[b].kind not in skip]

    layout: list[StateSlot] = []
    offset = 0
    for bid, blk in patch.blocks.items():
        if blk.kind is BlockKind.INTEGRATOR:
            layout.append(StateSlot(bid, blk.kind, offset, 1))
            offset += 1
        elif blk.kind is BlockKind.BBD:
            layout.append(StateSlot(bid, blk.kind, offset, blk.params.n))
            offset += blk.params.n
    x_index = {}
    for bid, blk in patch.blocks.items():
        if blk.kind is BlockKind.INTEGRATOR:
            x_index[bid] = len(x_index)
    for bid, blk in patch.blocks.items():
        if blk.kind is BlockKind.OSC:
            x_index[bid] = len(x_index)
    sinks = [b for b in ids if patch.blocks[b].kind.is_sink]
    probes = {b: patch.driver(PortRef(b, "in", 0)) for b in sinks}
    return CompiledSystem(patch, config, layout, schedule, probes, x_index)


# --------------------------------------------------------------------------
# Code generation


class _Gen:
    def __init__(self, system: CompiledSystem, inputs: Mapping[str, Signal]):
        self.sys = system
        self.patch = system.patch
        self.cfg = system.config
        self.R = repr(float(system.config.rail))
        self.inputs = inputs
        self.ns: dict = {"_sin": math.sin, "_seq_value": B.seq_value, "_osc_shape": B.osc_shape}
        self.drivers = {w.dst: w.src.block for w in self.patch.wires}

    def var(self, bid: str) -> str:
        return "v_" + bid

    def arg(self, bid: str, i: int) -> str:
        src = self.drivers.get(PortRef(bid, "in", i))
        return self.var(src) if src is not None else "0.0"

    def clamp_lines(self, target: str, expr: str, ind: str) -> list[str]:
        R = self.R
        return [f"{ind}{target} = {expr}",
                f"{ind}if {target} > {R}: {target} = {R}",
                f"{ind}elif {target} < -{R}: {target} = -{R}"]

    def rail_const(self, v: float) -> str:
        return repr(B.clamp(float(v), -self.cfg.rail, self.cfg.rail))

    def block_lines(self, bid: str, xs: Sequence[str], t: str, ind: str) -> list[str]:
        blk = self.patch.blocks[bid]
        p, kind, v = blk.params, blk.kind, self.var(bid)
        a = lambda i: self.arg(bid, i)
        if kind is BlockKind.INTEGRATOR:
            return self.clamp_lines(v, xs[self.sys.x_index[bid]], ind)
        if kind is BlockKind.BBD:
            return [f"{ind}{v} = H_{bid}"]
        if kind is BlockKind.NOISE:
            return [f"{ind}{v} = H_{bid}"] if p.amp <= self.cfg.rail else self.clamp_lines(v, f"H_{bid}", ind)
        if kind is BlockKind.ENV:
            return [f"{ind}{v} = H_{bid}"]
        if kind is BlockKind.INPUT:
            sig = self.inputs.get(bid)
            if sig is None:
                return [f"{ind}{v} = 0.0"]
            expr, ns = sig.source(t, f"_in_{bid}")
            self.ns.update(ns)
            return self.clamp_lines(v, expr, ind)
        if kind is BlockKind.CONST:
            return [f"{ind}{v} = {self.rail_const(p.v)}"]
        if kind is BlockKind.SEQ:
            self.ns[f"_p_{bid}"] = p
            return self.clamp_lines(v, f"_seq_value(_p_{bid}, {t})", ind)
        if kind is BlockKind.OSC:
            ph = xs[self.sys.x_index[bid]]
            if p.shape == "sine":
                expr = f"{p.amp!r} * _sin({ph})"
            else:
                expr = f"{p.amp!r} * _osc_shape({p.shape!r}, {ph})"
            return self.clamp_lines(v, expr, ind) if p.amp > self.cfg.rail else [f"{ind}{v} = {expr}"]
        if kind is BlockKind.GAIN:
            return self.clamp_lines(v, f"-{p.k!r} * {a(0)}", ind)
        if kind is BlockKind.ATTEN:
            return [f"{ind}{v} = {p.a!r} * {a(0)}"]
        if kind is BlockKind.SUMMER:
            terms = " + ".join(f"{k!r} * {a(i)}" for i, k in enumerate(p.k))
            return self.clamp_lines(v, f"-({terms})", ind)
        if kind is BlockKind.MULTIPLIER:
            return self.clamp_lines(v, f"{p.s!r} * {a(0)} * {a(1)}", ind)
        if kind is BlockKind.CMP:
            hi, lo = self.rail_const(p.hi), self.rail_const(p.lo)
            return [f"{ind}{v} = {hi} if {a(0)} > {a(1)} else {lo}"]
        if kind is BlockKind.LIM:
            hi, lo = self.rail_const(p.hi), self.rail_const(p.lo)
            return [f"{ind}{v} = {a(0)}",
                    f"{ind}if {v} > {hi}: {v} = {hi}",
                    f"{ind}elif {v} < {lo}: {v} = {lo}"]
        raise AssertionError(kind)

    def rate_lines(self, xs: Sequence[str], ks: Sequence[str], ind: str) -> list[str]:
        out = []
        nyq = repr(self.cfg.nyquist)
        for bid, j in self.sys.x_index.items():
            blk = self.patch.blocks[bid]
            p = blk.params
            if blk.kind is BlockKind.INTEGRATOR:
                terms = " + ".join(f"{k!r} * {self.arg(bid, i)}" for i, k in enumerate(p.k))
                out.append(f"{ind}{ks[j]} = -({terms})")
            else:
                out += [f"{ind}{ks[j]} = {p.f_ref!r} * 2.0 ** {self.arg(bid, 0)}",
                        f"{ind}if {ks[j]} > {nyq}: {ks[j]} = {nyq}",
                        f"{ind}{ks[j]} = {TWO_PI!r} * {ks[j]}"]
        return out

    def source(self) -> str:
        patch, sysm = self.patch, self.sys
        n = len(sysm.x_index)
        X = [f"x{j}" for j in range(n)]
        order = _eval_order(sysm)
        needed = B.upstream(patch, list(sysm.x_index)) if n else set()
        staged = [b for b in order if b in needed]
        held = [b for b, blk in patch.blocks.items()
                if blk.kind in (BlockKind.BBD, BlockKind.ENV, BlockKind.NOISE)]
        noises = [b for b in held if patch.blocks[b].kind is BlockKind.NOISE]
        I = "        "
        L = ["def advance(X, held, t0, h, i0, nsub, m, bufs):"]
        L += [f"    x{j} = X[{j}]" for j in range(n)]
        for b in held:
            attr = {"bbd": "out", "env": "level", "noise": "value"}[patch.blocks[b].kind.value]
            L.append(f"    o_{b} = held[{b!r}]")
            L.append(f"    H_{b} = o_{b}.{attr}")
        L.append("    rec = bufs is not None")
        rec_names = []
        for k, (sink, src) in enumerate(sysm.probes.items()):
            L.append(f"    b{k} = bufs[{k}] if rec else None")
            rec_names.append((k, sink, src))
        L.append("    hh = 0.5 * h")
        L.append("    h6 = h / 6.0")
        L.append("    for i in range(i0, i0 + nsub):")
        L.append(f"{I}t = t0 + i * h")
        L.append(f"{I}sample = rec and i % m == 0")
        if noises:
            L.append(f"{I}if sample:")
            L += [f"{I}    H_{b} = o_{b}.next()" for b in noises]
        # stage 1 evaluates everything: probes and held blocks read it
        for b in order:
            L += self.block_lines(b, X, "t", I)
        if rec_names:
            L.append(f"{I}if sample:")
            L.append(f"{I}    s = (i - i0) // m")
            for k, sink, src in rec_names:
                blk = patch.blocks[sink]
                val = self.var(src.block) if src is not None else "0.0"
                if blk.kind is BlockKind.OUTPUT:
                    L += self.clamp_lines("r", f"{blk.params.g!r} * {val}", I + "    ")
                    val = "r"
                L.append(f"{I}    b{k}[s] = {val}")
        if n:
            K1 = [f"k1_{j}" for j in range(n)]
            L += self.rate_lines(X, K1, I)
            for stage, (prev, kname, tt, coef) in enumerate(
                    [("k1", "k2", "t + hh", "hh"), ("k2", "k3", "t + hh", "hh"), ("k3", "k4", "t + h", "h")]):
                Xs = [f"y{j}" for j in range(n)]
                L += [f"{I}y{j} = x{j} + {coef} * {prev}_{j}" for j in range(n)]
                for b in staged:
                    L += self.block_lines(b, Xs, tt, I)
                L += self.rate_lines(Xs, [f"{kname}_{j}" for j in range(n)], I)
            for bid, j in sysm.x_index.items():
                L.append(f"{I}x{j} = x{j} + h6 * (k1_{j} + 2.0 * k2_{j} + 2.0 * k3_{j} + k4_{j})")
                if patch.blocks[bid].kind is BlockKind.INTEGRATOR:
                    R = self.R
                    L += [f"{I}if x{j} > {R}: x{j} = {R}", f"{I}elif x{j} < -{R}: x{j} = -{R}"]
                else:
                    L.append(f"{I}if x{j} >= {TWO_PI!r}: x{j} = x{j} % {TWO_PI!r}")
        for b in held:
            kind = patch.blocks[b].kind
            if kind is BlockKind.BBD:
                L.append(f"{I}H_{b} = o_{b}.clock(t + h, {self.arg(b, 0)})")
            elif kind is BlockKind.ENV:
                L.append(f"{I}H_{b} = o_{b}.update({self.arg(b, 0)}, h)")
        L += [f"    X[{j}] = x{j}" for j in range(n)]
        L.append("    return X")
        return "\n".join(L) + "\n"


def _eval_order(system: CompiledSystem) -> list[str]:
    """Sources first (stateful outputs, inputs), then the schedule."""
    patch = system.patch
    roots = [b for b, blk in patch.blocks.items()
             if blk.kind in (BlockKind.INTEGRATOR, BlockKind.BBD, BlockKind.INPUT)]
    return roots + system.schedule


def _generate(system: CompiledSystem, inputs: Mapping[str, Signal]):
    gen = _Gen(system, inputs)
    src = gen.source()
    ns = dict(gen.ns)
    exec(compile(src, f"<patch {system.patch.name}>", "exec"), ns)
    fn = ns["advance"]
    fn.source = src
    return fn


# --------------------------------------------------------------------------
# Public operations


def _bind(system: CompiledSystem, inputs: Optional[Mapping[str, InputSpec]]) -> dict[str, Signal]:
    inputs = dict(inputs or {})
    unknown = sorted(set(inputs) - set(system.patch.inputs))
    if unknown:
        raise KeyError(f"patch {system.patch.name!r} has no input {unknown[0]!r}")
    return {k: as_signal(v) for k, v in inputs.items()}


def step(system: CompiledSystem, state: SimState, t: float, h: float,
         inputs: Optional[Mapping[str, InputSpec]] = None) -> SimState:
    """One RK4 step of size ``h`` from time ``t``; returns a new state."""
    if not h > 0:
        raise ValueError("h must be positive")
    kernel = system.kernel(_bind(system, inputs))
    new = state.copy()
    kernel(new.x, new.held, t, h, 0, 1, 1, None)
    return new


@dataclass(frozen=True)
class TraceSet:
    """Sampled probe and output signals in machine volts."""

    traces: Mapping[str, np.ndarray]
    sample_rate: float
    duration: float
    seed: int
    patch_name: str
    audio: tuple[str, ...] = ()

    @property
    def names(self) -> list[str]:
        return list(self.traces)

    @property
    def n_samples(self) -> int:
        return len(next(iter(self.traces.values()))) if self.traces else 0

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate

    def __getitem__(self, name: str) -> np.ndarray:
        return self.traces[name]


def render(system: CompiledSystem, duration: float,
           inputs: Optional[Mapping[str, InputSpec]] = None, seed: int = 0,
           state: Optional[SimState] = None) -> TraceSet:
    """Integrate for ``duration`` seconds and sample every probe/output."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    cfg = system.config
    n = int(round(duration * cfg.sample_rate))
    m = int(cfg.oversample)
    kernel = system.kernel(_bind(system, inputs))
    st = state.copy() if state is not None else system.initial_state(seed)
    bufs = [[0.0] * n for _ in system.probes]
    kernel(st.x, st.held, 0.0, cfg.h, 0, n * m, m, bufs)
    traces = {}
    for name, buf in zip(system.probes, bufs):
        arr = np.array(buf, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise DiagnosticError([error("E_OVERFLOW", f"non-finite sample in trace {name!r}")])
        traces[name] = arr
    audio = tuple(b for b in system.probes if system.patch.blocks[b].kind is BlockKind.OUTPUT)
    return TraceSet(traces, cfg.sample_rate, n / cfg.sample_rate, seed, system.patch.name, audio)


def simulate(patch: Patch, duration: float, inputs: Optional[Mapping[str, InputSpec]] = None,
             config: Optional[EngineConfig] = None, seed: int = 0) -> TraceSet:
    return render(build_system(patch, config), duration, inputs, seed)
