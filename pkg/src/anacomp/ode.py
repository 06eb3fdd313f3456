"""Compiler from linear constant-coefficient ODE systems to patches.

Each equation is normalised to::

    sum_i c_i y^(i) + sum_{v,i} d_{v,i} v^(i) = sum_j b_j x_j + b_0

and realised by the Kelvin feedback construction: a summer produces the
highest derivative, a chain of integrators produces the lower ones, and the
loop closes through the summer.  Every block in the chain inverts, so the
compiler tracks the sign of each node and inserts unit inverters where a
term or a probe needs the opposite polarity.

Derivative nodes are amplitude-normalised by a per-variable rate ``w``
(``y^(i) / w^i``), which keeps integrator gains and internal voltages in a
usable range for audio-rate systems.  By default ``w`` is the natural
frequency ``|c_0 / c_n| ** (1/n)``; probes of derivatives report the
normalised value.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from .blocks import V_RAIL, BlockKind, Patch, PatchBuilder, PortRef, validate_patch
from .diagnostics import Diagnostic, DiagnosticError, SourceSpan, error
from .dsl import format_number

MAX_ORDER = 8
NAME = r"[A-Za-z_][A-Za-z0-9_]*"


class RailWarning(UserWarning):
    """A synthesized patch is predicted to drive a node past the rails."""


@dataclass(frozen=True)
class Equation:
    var: str
    coeffs: tuple[float, ...]
    inputs: Mapping[str, float] = field(default_factory=dict)
    constant: float = 0.0
    couplings: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1


@dataclass(frozen=True)
class EquationSystem:
    name: str
    variables: tuple[str, ...]
    inputs: tuple[str, ...]
    equations: Mapping[str, Equation]
    params: Mapping[str, float] = field(default_factory=dict)
    ics: Mapping[tuple[str, int], float] = field(default_factory=dict)
    outputs: tuple[tuple[str, int], ...] = ()

    def order(self, var: str) -> int:
        return self.equations[var].order

    def table(self) -> dict:
        """Coefficient table used to compare normalised systems."""
        return {
            v: (eq.coeffs, dict(eq.inputs), eq.constant, dict(eq.couplings))
            for v, eq in self.equations.items()
        }


@dataclass(frozen=True)
class ScalingOptions:
    time_scale: float = 1.0
    amplitude: Mapping[str, float] = field(default_factory=dict)
    rate: Mapping[str, float] = field(default_factory=dict)
    coeff_cap: float = 1000.0

    def __post_init__(self):
        if not self.time_scale > 0:
            raise ValueError("time_scale must be positive")
        for label, table in (("amplitude", self.amplitude), ("rate", self.rate)):
            for k, v in table.items():
                if not v > 0:
                    raise ValueError(f"{label} scale for {k!r} must be positive")


# --------------------------------------------------------------------------
# Expressions

_TOKEN = re.compile(
    rf"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    rf"|(?P<name>{NAME})(?P<primes>'*)"
    rf"|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCS = {
    "semi": lambda k: k / 12.0,
    "sqrt": math.sqrt,
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
}


class _ExprError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# A linear form maps 1 -> constant, ("x", name) -> input coefficient,
# ("y", name, order) -> variable-derivative coefficient.
def _lin_add(a: dict, b: dict, sign: float = 1.0) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + sign * v
    return out


def _lin_scale(a: dict, s: float) -> dict:
    return {k: v * s for k, v in a.items()}


def _const_of(a: dict) -> Optional[float]:
    if all(k == 1 for k in a):
        return a.get(1, 0.0)
    return None


class _Expr:
    def __init__(self, text: str, params: Mapping[str, float], inputs: set[str]):
        self.tokens = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise _ExprError("E_SYNTAX", f"unexpected character {text[pos:].strip()[:1]!r}")
            self.tokens.append(m)
            pos = m.end()
        self.i = 0
        self.params = params
        self.inputs = inputs

    def peek(self, op: str) -> bool:
        return self.i < len(self.tokens) and self.tokens[self.i]["op"] == op

    def take(self, op: str) -> None:
        if not self.peek(op):
            got = self.tokens[self.i].group().strip() if self.i < len(self.tokens) else "end of expression"
            raise _ExprError("E_SYNTAX", f"expected {op!r}, got {got!r}")
        self.i += 1

    def parse(self) -> dict:
        out = self.expr()
        if self.i != len(self.tokens):
            raise _ExprError("E_SYNTAX", f"unexpected {self.tokens[self.i].group().strip()!r}")
        return out

    def expr(self) -> dict:
        out = self.term()
        while self.peek("+") or self.peek("-"):
            sign = 1.0 if self.tokens[self.i]["op"] == "+" else -1.0
            self.i += 1
            out = _lin_add(out, self.term(), sign)
        return out

    def term(self) -> dict:
        out = self.unary()
        while self.peek("*") or self.peek("/"):
            op = self.tokens[self.i]["op"]
            self.i += 1
            rhs = self.unary()
            ca, cb = _const_of(out), _const_of(rhs)
            if op == "*":
                if ca is not None:
                    out = _lin_scale(rhs, ca)
                elif cb is not None:
                    out = _lin_scale(out, cb)
                else:
                    raise _ExprError("E_NONLINEAR", "product of two signals is not linear")
            else:
                if cb is None:
                    raise _ExprError("E_NONLINEAR", "division by a signal is not linear")
                if cb == 0:
                    raise _ExprError("E_SYNTAX", "division by zero")
                out = _lin_scale(out, 1.0 / cb)
        return out

    def unary(self) -> dict:
        if self.peek("-"):
            self.i += 1
            return _lin_scale(self.unary(), -1.0)
        if self.peek("+"):
            self.i += 1
            return self.unary()
        return self.power()

    def power(self) -> dict:
        base = self.atom()
        if self.peek("^") or self.peek("**"):
            self.i += 1
            exp = self.unary()
            cb, ce = _const_of(base), _const_of(exp)
            if cb is None or ce is None:
                raise _ExprError("E_NONLINEAR", "powers of signals are not linear")
            try:
                return {1: float(cb ** ce)}
            except (OverflowError, ZeroDivisionError, TypeError):
                raise _ExprError("E_SYNTAX", "invalid power") from None
        return base

    def atom(self) -> dict:
        if self.i >= len(self.tokens):
            raise _ExprError("E_SYNTAX", "unexpected end of expression")
        tok = self.tokens[self.i]
        self.i += 1
        if tok["num"]:
            return {1: float(tok["num"])}
        if tok["op"] == "(":
            inner = self.expr()
            self.take(")")
            return inner
        if tok["name"]:
            name, order = tok["name"], len(tok["primes"])
            if self.peek("(") and not order:
                self.i += 1
                arg = self.expr()
                self.take(")")
                if name not in _FUNCS:
                    raise _ExprError("E_SYNTAX", f"unknown function {name!r}")
                c = _const_of(arg)
                if c is None:
                    raise _ExprError("E_NONLINEAR", f"{name}() of a signal is not linear")
                try:
                    return {1: float(_FUNCS[name](c))}
                except (ValueError, OverflowError):
                    raise _ExprError("E_SYNTAX", f"{name}({c!r}) is undefined") from None
            if order > MAX_ORDER:
                raise _ExprError("E_ORDER", f"derivative order {order} exceeds {MAX_ORDER}")
            if name in self.params or name == "pi":
                if order:
                    raise _ExprError("E_SYNTAX", f"cannot differentiate parameter {name!r}")
                return {1: self.params.get(name, math.pi)}
            if name in self.inputs:
                if order:
                    raise _ExprError("E_SYNTAX", f"derivatives of input {name!r} are not supported")
                return {("x", name): 1.0}
            return {("y", name, order): 1.0}
        raise _ExprError("E_SYNTAX", f"unexpected {tok.group().strip()!r}")


# --------------------------------------------------------------------------
# .ode files

_LINE = {
    "system": re.compile(rf"system\s+(?P<id>{NAME})$"),
    "param": re.compile(rf"param\s+(?P<id>{NAME})\s*=\s*(?P<expr>.+)$"),
    "input": re.compile(rf"input\s+(?P<id>{NAME})$"),
    "eq": re.compile(r"eq\s*:\s*(?P<lhs>[^=]+)=(?P<rhs>[^=]+)$"),
    "ic": re.compile(rf"ic\s+(?P<id>{NAME})(?P<primes>'*)\s*=\s*(?P<expr>.+)$"),
    "out": re.compile(r"out\s*:\s*(?P<list>.+)$"),
    "end": re.compile(r"end$"),
}


def _order_of(form: dict, var: str) -> int:
    orders = [k[2] for k, v in form.items() if k != 1 and k[0] == "y" and k[1] == var and v != 0.0]
    return max(orders) if orders else -1


def parse_equations(text: str) -> EquationSystem:
    """Parse ``.ode`` source into a normalised :class:`EquationSystem`.

    Raises :class:`DiagnosticError` listing every problem found.
    """
    diags: list[Diagnostic] = []
    name = None
    params: dict[str, float] = {}
    inputs: list[str] = []
    raw_eqs: list[tuple[dict, str, SourceSpan]] = []
    raw_ics: list[tuple[str, int, float, SourceSpan]] = []
    raw_outs: list[tuple[str, int, SourceSpan]] = []
    ended = False

    def fail(code, msg, span):
        diags.append(error(code, msg, span))

    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0]
        stmt = body.strip()
        if not stmt:
            continue
        span = SourceSpan(lineno, len(body) - len(body.lstrip()) + 1, len(stmt))
        key = re.match(r"[a-z]+", stmt)
        key = key.group() if key else ""
        m = _LINE[key].match(stmt) if key in _LINE else None
        if m is None:
            fail("E_SYNTAX", f"malformed statement: {stmt}", span)
            continue
        if ended:
            fail("E_SYNTAX", "statement after 'end'", span)
            continue
        if key != "system" and name is None:
            fail("E_SYNTAX", "first statement must be 'system <name>'", span)
            continue
        try:
            if key == "system":
                name = m["id"]
            elif key == "end":
                ended = True
            elif key == "param":
                if m["id"] in params or m["id"] in inputs:
                    fail("E_DUPLICATE_ID", f"{m['id']!r} already defined", span)
                    continue
                c = _const_of(_Expr(m["expr"], params, set(inputs)).parse())
                if c is None:
                    fail("E_SYNTAX", "parameter values must be constant", span)
                    continue
                params[m["id"]] = c
            elif key == "input":
                if m["id"] in params or m["id"] in inputs:
                    fail("E_DUPLICATE_ID", f"{m['id']!r} already defined", span)
                    continue
                inputs.append(m["id"])
            elif key == "eq":
                lhs = _Expr(m["lhs"], params, set(inputs)).parse()
                rhs = _Expr(m["rhs"], params, set(inputs)).parse()
                ranked = [(k[2], i, k[1]) for i, k in enumerate(lhs) if k != 1 and k[0] == "y"]
                if not ranked:
                    fail("E_SYNTAX", "the left-hand side names no variable to define", span)
                    continue
                var = max(ranked, key=lambda r: (r[0], -r[1]))[2]
                raw_eqs.append((_lin_add(lhs, rhs, -1.0), var, span))
            elif key == "ic":
                c = _const_of(_Expr(m["expr"], params, set(inputs)).parse())
                if c is None:
                    fail("E_SYNTAX", "initial conditions must be constant", span)
                    continue
                raw_ics.append((m["id"], len(m["primes"]), c, span))
            elif key == "out":
                for item in m["list"].split(","):
                    im = re.fullmatch(rf"\s*({NAME})('*)\s*", item)
                    if im is None:
                        fail("E_SYNTAX", f"bad output {item.strip()!r}", span)
                        continue
                    raw_outs.append((im[1], len(im[2]), span))
        except _ExprError as exc:
            fail(exc.code, str(exc), span)

    if name is None and not diags:
        fail("E_SYNTAX", "missing 'system <name>' header", SourceSpan(1, 1, 0))
    elif name is not None and not ended:
        fail("E_SYNTAX", "missing 'end'", SourceSpan(max(1, len(text.splitlines())), 1, 0))

    defined: dict[str, SourceSpan] = {}
    for form, var, span in raw_eqs:
        if var in defined:
            fail("E_DUPLICATE_ID", f"variable {var!r} is defined by more than one equation", span)
        else:
            defined[var] = span
    equations: dict[str, Equation] = {}
    for form, var, span in raw_eqs:
        if var in equations:
            continue
        bad = False
        for k in form:
            if k != 1 and k[0] == "y" and k[1] not in defined:
                fail("E_UNDEFINED", f"unknown identifier {k[1]!r}", span)
                bad = True
        if bad:
            continue
        n = _order_of(form, var)
        if n < 0:
            fail("E_SYNTAX", f"equation for {var!r} cancels to nothing", span)
            continue
        coeffs = tuple(form.get(("y", var, i), 0.0) for i in range(n + 1))
        ins = {x: -form[("x", x)] for x in inputs if form.get(("x", x), 0.0) != 0.0}
        const = -form.get(1, 0.0)
        couplings: dict[str, list[float]] = {}
        for k, v in form.items():
            if k != 1 and k[0] == "y" and k[1] != var and v != 0.0:
                cs = couplings.setdefault(k[1], [])
                cs.extend([0.0] * (k[2] + 1 - len(cs)))
                cs[k[2]] = v
        equations[var] = Equation(var, coeffs, ins, 0.0 if const == 0 else const,
                                  {v: tuple(c) for v, c in couplings.items()})

    for var, eq in equations.items():
        for other, cs in eq.couplings.items():
            if other in equations and len(cs) - 1 > equations[other].order:
                fail("E_ORDER", f"equation for {var!r} uses {other}{chr(39) * (len(cs) - 1)}, "
                     f"above the order of {other!r}", defined[var])

    ics: dict[tuple[str, int], float] = {}
    for var, order, value, span in raw_ics:
        if var not in equations:
            fail("E_UNDEFINED", f"unknown variable {var!r}", span)
        elif order >= equations[var].order:
            fail("E_ORDER", f"{var}{chr(39) * order} is not an integrator state", span)
        else:
            ics[(var, order)] = value
    outs: list[tuple[str, int]] = []
    for var, order, span in raw_outs:
        if var not in equations:
            fail("E_UNDEFINED", f"unknown variable {var!r}", span)
        elif order > equations[var].order:
            fail("E_ORDER", f"{var}{chr(39) * order} exceeds the order of {var!r}", span)
        elif (var, order) not in outs:
            outs.append((var, order))

    if diags:
        raise DiagnosticError(diags)
    variables = tuple(equations)
    return EquationSystem(
        name=name, variables=variables, inputs=tuple(inputs), equations=equations,
        params=params, ics=ics, outputs=tuple(outs) or tuple((v, 0) for v in variables),
    )


def _term(coef: float, name: str, first: bool) -> str:
    mag = format_number(abs(coef))
    body = f"{mag}*{name}" if name else mag
    if first:
        return ("-" if coef < 0 else "") + body
    return (" - " if coef < 0 else " + ") + body


def serialize_equations(system: EquationSystem) -> str:
    """Canonical ``.ode`` text with every coefficient written out numerically."""
    out = [f"system {system.name}"]
    out += [f"input {x}" for x in system.inputs]
    for var, eq in system.equations.items():
        lhs = []
        for i, c in enumerate(eq.coeffs):
            if c != 0.0:
                lhs.append((c, var + "'" * i))
        for other, cs in eq.couplings.items():
            lhs += [(c, other + "'" * i) for i, c in enumerate(cs) if c != 0.0]
        rhs = [(b, x) for x, b in eq.inputs.items()]
        if eq.constant != 0.0 or not rhs:
            rhs.append((eq.constant, ""))
        lt = "".join(_term(c, n, i == 0) for i, (c, n) in enumerate(lhs))
        rt = "".join(_term(c, n, i == 0) for i, (c, n) in enumerate(rhs))
        out.append(f"eq: {lt} = {rt}")
    for (var, order), v in system.ics.items():
        out.append(f"ic {var}{chr(39) * order} = {format_number(v)}")
    if system.outputs:
        out.append("out: " + ", ".join(v + "'" * o for v, o in system.outputs))
    out.append("end")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Synthesis


def time_scale(system: EquationSystem, lam: float) -> EquationSystem:
    """Slow the system down by ``lam``: the solution at machine time
    ``lam * t`` equals the original solution at ``t``."""
    if not lam > 0:
        raise ValueError("time scale must be positive")
    if lam == 1:
        return system
    eqs = {}
    for var, eq in system.equations.items():
        eqs[var] = replace(
            eq,
            coeffs=tuple(c * lam**i for i, c in enumerate(eq.coeffs)),
            couplings={v: tuple(c * lam**i for i, c in enumerate(cs)) for v, cs in eq.couplings.items()},
        )
    ics = {(v, i): x / lam**i for (v, i), x in system.ics.items()}
    return replace(system, equations=eqs, ics=ics)


def derivative_rates(system: EquationSystem, opts: Optional[ScalingOptions] = None) -> dict[str, float]:
    """Per-variable normalisation rate ``w``: node ``i`` carries ``y^(i) / w^i``."""
    opts = opts or ScalingOptions()
    scaled = time_scale(system, opts.time_scale)
    rates = {}
    for var, eq in scaled.equations.items():
        if var in opts.rate:
            rates[var] = float(opts.rate[var])
        elif eq.order >= 1 and eq.coeffs[0] != 0.0:
            rates[var] = abs(eq.coeffs[0] / eq.coeffs[-1]) ** (1.0 / eq.order)
        else:
            rates[var] = 1.0
    return rates


def _ident(name: str) -> str:
    base = re.sub(r"[^a-z0-9_]", "_", name.lower())
    return base if re.match(r"[a-z_]", base) else "_" + base


def _block_ids(system: EquationSystem) -> dict[str, str]:
    taken: set[str] = set()
    ids = {}
    for name in list(system.inputs) + list(system.variables):
        base = _ident(name)
        cand, i = base, 1
        while cand in taken:
            i += 1
            cand = f"{base}{i}"
        taken.add(cand)
        ids[name] = cand
    return ids


def probe_name(block_id: str, order: int) -> str:
    return block_id if order == 0 else f"{block_id}_d{order}"


def synthesize(system: EquationSystem, opts: Optional[ScalingOptions] = None,
               rail: float = V_RAIL) -> Patch:
    """Build a patch from summers, integrators and unit inverters whose probes
    follow the (time-scaled) solution of ``system``."""
    opts = opts or ScalingOptions()
    sysm = time_scale(system, opts.time_scale)
    rates = derivative_rates(system, opts)
    ids = _block_ids(sysm)
    amp = {v: float(opts.amplitude.get(v, 1.0)) for v in sysm.variables}
    b = PatchBuilder(_ident(sysm.name))
    problems: list[Diagnostic] = []

    def gain_of(var: str, i: int) -> float:
        n = sysm.order(var)
        return (-1.0) ** (n - i + 1) * amp[var] / rates[var] ** i

    def check(k: float, what: str) -> float:
        if abs(k) > opts.coeff_cap:
            problems.append(error("E_COEFF", f"{what}: coefficient {k:.6g} exceeds cap {opts.coeff_cap:g}"))
        return k

    # node -> (port producing it, gain relative to the problem quantity)
    nodes: dict = {}
    inverted: dict = {}

    for x in sysm.inputs:
        b.add(ids[x], BlockKind.INPUT)
        nodes[("x", x)] = (PortRef(ids[x]), 1.0)

    for var in sysm.variables:
        n, vid = sysm.order(var), ids[var]
        nodes[("y", var, n)] = (PortRef(f"{vid}_sum"), gain_of(var, n))
        for i in range(n - 1, -1, -1):
            nodes[("y", var, i)] = (PortRef(f"{vid}_int{i}"), gain_of(var, i))

    def inv(key) -> tuple[PortRef, float]:
        if key not in inverted:
            ref, g = nodes[key]
            bid = b.fresh_id(f"{ref.block}_inv") if f"{ref.block}_inv" in b.blocks else f"{ref.block}_inv"
            b.add(bid, BlockKind.GAIN, k=1.0)
            b.wire(ref, PortRef(bid, "in", 0))
            inverted[key] = (PortRef(bid), -g)
        return inverted[key]

    pending_wires = []
    for var in sysm.variables:
        eq = sysm.equations[var]
        n, vid = eq.order, ids[var]
        cn = eq.coeffs[-1]
        g_sum = gain_of(var, n)
        terms = []  # (node key, contribution to y^(n) per unit of the quantity)
        terms += [(("y", var, i), -c / cn) for i, c in enumerate(eq.coeffs[:-1]) if c != 0.0]
        for other, cs in eq.couplings.items():
            terms += [(("y", other, i), -c / cn) for i, c in enumerate(cs) if c != 0.0]
        terms += [(("x", x), bj / cn) for x, bj in eq.inputs.items()]
        ks, srcs = [], []
        for key, e in terms:
            ref, g = nodes[key]
            k = -g_sum * e / g
            srcs.append((key, k < 0))
            label = key[1] + "'" * key[2] if key[0] == "y" else key[1]
            ks.append(check(abs(k), f"{var}: term {label}"))
        if eq.constant != 0.0:
            want = -g_sum * eq.constant / cn   # value the summer must negate
            cid = f"{vid}_c"
            b.add(cid, BlockKind.CONST, v=1.0 if want > 0 else -1.0)
            srcs.append(("const", cid))
            ks.append(check(abs(want), f"{var}: constant term"))
        if not ks:
            ks = [0.0]
        b.add(f"{vid}_sum", BlockKind.SUMMER, k=ks)
        for i, (key, flip) in enumerate(srcs):
            pending_wires.append((key, flip, PortRef(f"{vid}_sum", "in", i)))
        for i in range(n - 1, -1, -1):
            k = check(rates[var], f"{var}: integrator gain")
            ic = gain_of(var, i) * sysm.ics.get((var, i), 0.0) + 0.0
            if abs(ic) > rail:
                warnings.warn(RailWarning(f"{var}: initial condition {ic:g} V exceeds the rails"))
            b.add(f"{vid}_int{i}", BlockKind.INTEGRATOR, k=[k], ic=ic)
            b.wire(nodes[("y", var, i + 1)][0], PortRef(f"{vid}_int{i}", "in", 0))

    if problems:
        raise DiagnosticError(problems)

    for key, flip, dst in pending_wires:
        if key == "const":
            b.wire(PortRef(flip), dst)
        else:
            b.wire(inv(key)[0] if flip else nodes[key][0], dst)

    for var, order in sysm.outputs:
        ref, g = nodes[("y", var, order)]
        if g < 0:
            ref, g = inv(("y", var, order))
        b.probe(probe_name(ids[var], order), ref)

    patch = b.build()
    diags = validate_patch(patch)
    if diags:
        raise DiagnosticError(diags)
    _dc_check(sysm, amp, rail)
    return patch


def _dc_check(system: EquationSystem, amp: Mapping[str, float], rail: float) -> None:
    """Warn when the steady state for unit inputs would overflow the rails."""
    vs = list(system.variables)
    idx = {v: i for i, v in enumerate(vs)}
    C = np.zeros((len(vs), len(vs)))
    rhs_in = np.zeros((len(vs), len(system.inputs)))
    rhs_c = np.zeros(len(vs))
    for v, eq in system.equations.items():
        C[idx[v], idx[v]] = eq.coeffs[0]
        for other, cs in eq.couplings.items():
            C[idx[v], idx[other]] += cs[0]
        for j, x in enumerate(system.inputs):
            rhs_in[idx[v], j] = eq.inputs.get(x, 0.0)
        rhs_c[idx[v]] = eq.constant
    if not vs or abs(np.linalg.det(C)) < 1e-12:
        return
    bound = np.abs(np.linalg.solve(C, rhs_in)).sum(axis=1) + np.abs(np.linalg.solve(C, rhs_c))
    for v in vs:
        level = amp[v] * bound[idx[v]]
        if level > rail:
            warnings.warn(RailWarning(f"{v}: DC level up to {level:.3g} V for unit inputs exceeds "
                                      f"the {rail:g} V rails; reduce its amplitude scale"))


def compile_equations(text: str, opts: Optional[ScalingOptions] = None) -> Patch:
    return synthesize(parse_equations(text), opts)
