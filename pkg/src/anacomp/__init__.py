"""A virtual general-purpose analogue computer for sound and music."""

from .blocks import (
    V_RAIL,
    Block,
    BlockKind,
    Patch,
    PatchBuilder,
    PortRef,
    Wire,
    eval_block,
    integrator_rate,
    make_params,
    validate_patch,
    vco_frequency,
)
from .diagnostics import Diagnostic, DiagnosticError, SourceSpan
from .dsl import parse_patch, serialize_patch
from .engine import EngineConfig, Sine, Step, TraceSet, build_system, render, step
from .fpaa import CabInventory, ResourceProfile, capacity, demand
from .ode import EquationSystem, ScalingOptions, parse_equations, synthesize, time_scale
from .signal_io import AudioFormat, normalize, write_csv, write_wav

__version__ = "0.1.0"
