"""Command-line front end: ``anacomp check|compile|run|estimate``."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from .blocks import V_RAIL, BlockError
from .diagnostics import DiagnosticError
from .dsl import parse_patch_diagnostics, serialize_patch
from .engine import EngineConfig, Samples, Signal, Sine, Step, build_system, render
from .fpaa import ModelError, capacity, demand, load_inventory, load_profile
from .ode import ScalingOptions, parse_equations, synthesize
from .signal_io import AudioFormat, audio_channels, read_wav, write_csv, write_wav


class UsageError(Exception):
    pass


def parse_input_spec(text: str, full_scale: float = V_RAIL) -> tuple[str, Signal]:
    """``name=step:amp[,t0]``, ``name=sine:freq,amp`` or ``name=wav:path``."""
    name, eq, spec = text.partition("=")
    kind, colon, args = spec.partition(":")
    if not eq or not colon or not name:
        raise UsageError(f"bad input spec {text!r}; expected name=kind:args")
    try:
        if kind == "step":
            nums = [float(a) for a in args.split(",")]
            if len(nums) not in (1, 2):
                raise ValueError
            return name, Step(*nums)
        if kind == "sine":
            nums = [float(a) for a in args.split(",")]
            if len(nums) not in (1, 2):
                raise ValueError
            return name, Sine(*nums)
    except ValueError:
        raise UsageError(f"bad arguments in input spec {text!r}") from None
    if kind == "wav":
        data, rate = read_wav(args)
        return name, Samples(tuple((data * full_scale).tolist()), float(rate))
    raise UsageError(f"unknown input kind {kind!r} (use step, sine or wav)")


def _load_patch(path: str):
    text = Path(path).read_text()
    patch, diags = parse_patch_diagnostics(text)
    for d in diags:
        print(d.format(path), file=sys.stderr)
    return patch


def cmd_check(args) -> int:
    return 0 if _load_patch(args.patch) is not None else 1


def cmd_compile(args) -> int:
    system = parse_equations(Path(args.ode).read_text())
    opts = ScalingOptions(time_scale=args.time_scale, coeff_cap=args.cap)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        patch = synthesize(system, opts)
    for w in caught:
        print(f"{args.ode}: warning: {w.message}", file=sys.stderr)
    text = serialize_patch(patch)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    patch = _load_patch(args.patch)
    if patch is None:
        return 1
    full_scale = args.full_scale or args.rail
    inputs = dict(parse_input_spec(s, full_scale) for s in args.inputs)
    config = EngineConfig(args.rate, args.oversample, args.rail)
    traces = render(build_system(patch, config), args.dur, inputs, seed=args.seed)
    if args.wav:
        names = audio_channels(traces, args.probe or None)
        fmt = AudioFormat(int(round(args.rate)), args.bits, len(names))
        write_wav(traces, args.wav, fmt, names, full_scale)
    if args.csv:
        write_csv(traces, args.csv)
    return 0


def cmd_estimate(args) -> int:
    patch = _load_patch(args.patch)
    if patch is None:
        return 1
    need = demand(patch, load_profile(args.profile))
    inv = load_inventory(args.device)
    print("demand: " + ", ".join(f"{k}={v}" for k, v in sorted(need.items())))
    print(f"copies: {capacity(inv, need)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anacomp", description="Virtual analogue computer toolchain.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and validate a patch")
    c.add_argument("patch")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("compile", help="synthesize a patch from an equation file")
    c.add_argument("ode")
    c.add_argument("-o", "--output", help="write the patch here instead of stdout")
    c.add_argument("--time-scale", type=float, default=1.0)
    c.add_argument("--cap", type=float, default=1000.0, help="coefficient magnitude cap")
    c.set_defaults(func=cmd_compile)

    c = sub.add_parser("run", help="simulate a patch and write traces")
    c.add_argument("patch")
    c.add_argument("--wav")
    c.add_argument("--csv")
    c.add_argument("--dur", type=float, default=1.0)
    c.add_argument("--in", dest="inputs", action="append", default=[], metavar="NAME=SPEC")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--rate", type=float, default=48000.0)
    c.add_argument("--oversample", type=int, default=4)
    c.add_argument("--rail", type=float, default=V_RAIL)
    c.add_argument("--full-scale", type=float, help="volts mapped to digital full scale (default: rail)")
    c.add_argument("--bits", type=int, choices=(16, 24), default=16)
    c.add_argument("--probe", action="append", help="trace to write as a WAV channel")
    c.set_defaults(func=cmd_run)

    c = sub.add_parser("estimate", help="FPAA copies of a patch")
    c.add_argument("patch")
    c.add_argument("--device", required=True)
    c.add_argument("--profile", required=True)
    c.set_defaults(func=cmd_estimate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "dur", 1.0) <= 0:
        parser.error("--dur must be positive")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"anacomp: error: {exc}", file=sys.stderr)
        return 2
    except DiagnosticError as exc:
        for d in exc.diagnostics:
            print(d.format(getattr(args, "ode", None) or getattr(args, "patch", "<input>")), file=sys.stderr)
        return 1
    except (OSError, ModelError, BlockError, ValueError, KeyError) as exc:
        code = getattr(exc, "code", "E_IO" if isinstance(exc, OSError) else "E_ERROR")
        print(f"anacomp: {code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
