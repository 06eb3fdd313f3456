"""Acceptance criteria, one marked group per criterion.

The conftest prints a PASS/FAIL line for each criterion after the run.
"""

import math
import random
import subprocess
import sys
import time
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

from anacomp.blocks import BlockKind, PatchBuilder, eval_block, make_params, validate_patch
from anacomp.dsl import parse_patch, serialize_patch
from anacomp.engine import EngineConfig, Sine, Step, build_system, render
from anacomp.fpaa import CabInventory, capacity
from anacomp.ode import compile_equations
from anacomp.signal_io import AudioFormat, wav_bytes

from oracles import (
    db, max_copies_brute, parabolic_peak, rising_crossing_freq, tone_gain,
)

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
SR = 48000

LOWPASS_100 = """
system lowpass
param a = 1
param b = 1/(2*pi*100)
input x
eq: y = a*x - b*y'
end
"""


def crit(n):
    return pytest.mark.criterion(n)


# 1 ---------------------------------------------------------------------------

def _sweep_gain(system, freq, probe="y", settle=0.05, window=0.02):
    tr = render(system, settle + window, {"x": Sine(freq)})
    return tone_gain(tr[probe], SR, freq, settle, window)


@crit(1)
def test_lowpass_frequency_response():
    start = time.perf_counter()
    system = build_system(compile_equations(LOWPASS_100))
    dc = render(system, 0.05, {"x": Step(1.0)})["y"][-1]
    gains = {f: _sweep_gain(system, f) / dc for f in (30, 100, 300, 1000, 3000, 10000)}
    elapsed = time.perf_counter() - start

    b = 1 / (2 * math.pi * 100)
    for f, g in gains.items():
        analytic = 1 / abs(1 + 2j * math.pi * f * b)
        assert db(g) == pytest.approx(db(analytic), abs=0.05), f
    assert db(gains[100]) == pytest.approx(-3.01, abs=0.1)
    slope = db(gains[10000]) - db(gains[1000])
    assert slope == pytest.approx(-20, abs=1)
    assert elapsed < 5


# 2 ---------------------------------------------------------------------------

@crit(2)
def test_lowpass_step_response():
    text = (CORPUS / "lowpass.ode").read_text()
    tr = render(build_system(compile_equations(text)), 1.0, {"x": Step(1.0)})
    t = tr.time
    err = tr["y"] - (1 - np.exp(-t / 0.5))
    assert len(t) == SR
    assert math.sqrt(np.mean(err ** 2)) < 1e-4


# 3 ---------------------------------------------------------------------------

F0 = 100.0


@pytest.fixture(scope="module")
def svf():
    patch = compile_equations((CORPUS / "svf.ode").read_text())
    return patch, build_system(patch)


@crit(3)
def test_svf_structure(svf):
    patch, _ = svf
    assert len(patch.ids(BlockKind.INTEGRATOR)) == 2
    assert len(patch.ids(BlockKind.SUMMER)) == 1
    g = nx.DiGraph((w.src.block, w.dst.block) for w in patch.wires)
    (summer,) = patch.ids(BlockKind.SUMMER)
    loops = [c for c in nx.simple_cycles(g) if summer in c]
    assert any(sum(patch.blocks[b].kind is BlockKind.INTEGRATOR for b in c) == 2 for c in loops)


@crit(3)
def test_svf_bandpass_peak(svf):
    _, system = svf

    def bp(f):
        return _sweep_gain(system, f, probe="y_d1", settle=0.1, window=0.1)

    grid = F0 * 2 ** np.linspace(-1, 1, 9)
    gains = [bp(f) for f in grid]
    i = int(np.argmax(gains))
    assert 0 < i < len(grid) - 1
    fine = grid[i] * 2 ** np.array([-1 / 16, 0, 1 / 16])
    peak = math.exp(parabolic_peak(np.log(fine), [db(bp(f)) for f in fine]))
    assert abs(peak / F0 - 1) < 0.01


@crit(3)
def test_svf_lowpass_slope(svf):
    _, system = svf
    g2 = _sweep_gain(system, 2 * F0, settle=0.1, window=0.1)
    g4 = _sweep_gain(system, 4 * F0, settle=0.1, window=0.1)
    drop = db(g2) - db(g4)
    analytic = 10 * math.log10(257 / 17)  # |H|^2 = 1/(1+r^4) at Q = 1/sqrt(2)
    assert drop == pytest.approx(analytic, abs=0.05)
    assert drop == pytest.approx(12, abs=0.5)


# 4 ---------------------------------------------------------------------------

GLIDE = """
system glide
param a = {a}
param b = 0.25
input x
eq: y = a*x + b
end
"""


def _glide_tone(gain, v):
    patch = compile_equations(GLIDE.format(a=gain))
    assert not patch.ids(BlockKind.INTEGRATOR)
    b = PatchBuilder.from_patch(patch)
    b.add("vco", "osc", shape="sine", f_ref=261.63, amp=5)
    b.wire(patch.probes["y"], "vco.in[0]")
    b.probe("tone", "vco.out")
    tr = render(build_system(b.build()), 1.0, {"x": Step(v)})
    return rising_crossing_freq(tr["tone"], SR)


@crit(4)
@pytest.mark.parametrize("gain,ratio", [("1", 2.0), ("semi(7)", 2 ** (7 / 12))])
def test_glide_pitch_ratio(gain, ratio):
    base = _glide_tone(gain, 0.0)
    up = _glide_tone(gain, 1.0)
    assert base == pytest.approx(261.63 * 2 ** 0.25, rel=1e-6)
    assert abs((up / base) / ratio - 1) < 1e-6


# 5 ---------------------------------------------------------------------------

DECAY = """
system decay
eq: y' = -y
ic y = 1
end
"""


@crit(5)
def test_rk4_convergence():
    patch = compile_equations(DECAY)
    errs = []
    for m in (1, 2):
        tr = render(build_system(patch, EngineConfig(sample_rate=20, oversample=m)), 5.0)
        errs.append(math.sqrt(np.mean((tr["y"] - np.exp(-tr.time)) ** 2)))
    assert 12 <= errs[0] / errs[1] <= 20


# 6 ---------------------------------------------------------------------------

@crit(6)
def test_inverting_signs():
    assert eval_block("gain", make_params("gain", k=2.5), [1.2]) == pytest.approx(-3.0)
    assert eval_block("summer", make_params("summer", k=[1, 2]), [1.0, 0.5]) == pytest.approx(-2.0)
    integ = make_params("integrator", k=[3.0], ic=0.0)
    sys_ = build_system(_integrator_patch(integ.k[0], 0.0))
    y = render(sys_, 0.01, {"x": Step(1.0)})["y"]
    assert y[-1] == pytest.approx(-3.0 * (len(y) - 1) / SR, rel=1e-9)
    assert eval_block("atten", make_params("atten", a=0.5), [4.0]) == 2.0


def _integrator_patch(k, ic):
    b = PatchBuilder("integ")
    b.add("x", "input")
    b.add("i", "integrator", k=[k], ic=ic)
    b.wire("x", "i.in[0]")
    b.probe("y", "i.out")
    return b.build()


@crit(6)
def test_superposition_below_rails(svf):
    _, system = svf
    u1, u2 = Sine(150, 0.7), Sine(420, 1.1, 0.3)
    both = lambda t: u1(t) + u2(t)  # noqa: E731
    y1 = render(system, 0.05, {"x": u1})["y_d1"]
    y2 = render(system, 0.05, {"x": u2})["y_d1"]
    y12 = render(system, 0.05, {"x": both})["y_d1"]
    assert np.max(np.abs(y12)) < 10
    assert np.max(np.abs(y12 - (y1 + y2))) < 1e-9


@crit(6)
def test_comparator_and_limiter():
    b = PatchBuilder("cl")
    b.add("x", "input")
    b.add("z", "const", v=0.0)
    b.add("c", "cmp", hi=7.0, lo=-3.0)
    b.add("l", "lim", lo=-0.5, hi=0.25)
    b.wire("x", "c.in[0]")
    b.wire("z.out", "c.in[1]")
    b.wire("x", "l.in[0]")
    b.probe("pc", "c.out")
    b.probe("pl", "l.out")
    tr = render(build_system(b.build()), 0.05, {"x": Sine(100, 2.0)})
    assert set(np.unique(tr["pc"])) == {7.0, -3.0}
    x = 2.0 * np.sin(2 * np.pi * 100 * tr.time)
    assert np.allclose(tr["pl"], np.clip(x, -0.5, 0.25), atol=1e-12)
    assert tr["pl"].min() == -0.5 and tr["pl"].max() == 0.25


@crit(6)
@pytest.mark.parametrize("ic", [0.0, 3.7, -9.25])
def test_integrator_initial_condition(ic):
    tr = render(build_system(_integrator_patch(5.0, ic)), 0.01, {"x": Step(1.0)})
    assert tr["y"][0] == ic


# 7 ---------------------------------------------------------------------------

STATELESS = ("gain", "summer", "atten", "lim")


def _random_patch(rng, through_integrator):
    b = PatchBuilder(f"gen{rng.randrange(10**6)}")
    b.add("x", "input")
    n = rng.randint(2, 6)
    ring = [f"r{i}" for i in range(n)]
    stateful = rng.randrange(n) if through_integrator else None
    for i, bid in enumerate(ring):
        if i == stateful:
            b.add(bid, "integrator", k=[1.0, 1.0])
        else:
            b.add(bid, "summer", k=[1.0, 1.0])
    for i, bid in enumerate(ring):
        b.wire(f"{ring[i - 1]}.out", f"{bid}.in[0]")
    tail = "x"
    for j in range(rng.randint(0, 3)):
        kind = rng.choice(STATELESS[:1] + STATELESS[2:])
        bid = b.add(f"t{j}", kind)
        b.wire(tail, f"{bid}.in[0]")
        tail = f"{bid}.out"
    for bid in ring:
        b.wire(tail, f"{bid}.in[1]")
    b.probe("y", f"{ring[-1]}.out")
    return b.build()


def _has_stateless_cycle(patch):
    g = nx.DiGraph()
    g.add_nodes_from(patch.blocks)
    for w in patch.wires:
        if patch.blocks[w.src.block].kind not in (BlockKind.INTEGRATOR, BlockKind.BBD):
            g.add_edge(w.src.block, w.dst.block)
    return not nx.is_directed_acyclic_graph(g)


@crit(7)
def test_algebraic_loop_corpus():
    rng = random.Random(2024)
    patches = [_random_patch(rng, i % 2 == 1) for i in range(50)]
    seen = {True: 0, False: 0}
    for p in patches:
        stateless = _has_stateless_cycle(p)
        seen[stateless] += 1
        codes = [d.code for d in validate_patch(p)]
        if stateless:
            assert "E_ALGEBRAIC_LOOP" in codes
            with pytest.raises(Exception) as exc:
                parse_patch(serialize_patch(p))
            assert "E_ALGEBRAIC_LOOP" in exc.value.codes
        else:
            assert codes == []
            assert parse_patch(serialize_patch(p)).isomorphic(p)
    assert seen == {True: 25, False: 25}


# 8 ---------------------------------------------------------------------------

@crit(8)
@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.apc")), ids=lambda p: p.name)
def test_round_trip_fixpoint(path):
    first = parse_patch(path.read_text())
    text = serialize_patch(first)
    second = parse_patch(text)
    assert second == first
    assert serialize_patch(second) == text
    for bid, blk in first.blocks.items():
        assert second.blocks[bid].params.values() == blk.params.values()


# 9 ---------------------------------------------------------------------------

@crit(9)
def test_cli_determinism(tmp_path):
    outs = []
    for run in ("a", "b"):
        wav, csv = tmp_path / f"{run}.wav", tmp_path / f"{run}.csv"
        cmd = [sys.executable, "-m", "anacomp", "run", str(CORPUS / "noise.apc"),
               "--dur", "0.25", "--seed", "11", "--wav", str(wav), "--csv", str(csv)]
        subprocess.run(cmd, check=True, capture_output=True)
        outs.append((wav.read_bytes(), csv.read_bytes()))
    assert outs[0] == outs[1]
    assert len(set(outs[0][0][44:])) > 2


# 10 --------------------------------------------------------------------------

@crit(10)
def test_capacity_matches_brute_force():
    rng = random.Random(7)
    resources = ["ota", "capacitor", "switch", "dac"]
    for _ in range(1000):
        caps = {r: rng.randint(0, 20) for r in resources if r != "switch"}
        inv = CabInventory(caps, rng.randint(1, 16), rng.randint(0, 300))
        need = {r: rng.randint(0, 6) for r in rng.sample(resources, rng.randint(1, 4))}
        if not any(need.values()):
            need[rng.choice(list(need))] = rng.randint(1, 6)
        avail = {r: inv.available(r) for r in resources}
        assert capacity(inv, need) == max_copies_brute(avail, need)


@crit(10)
def test_sample_model_hosts_twelve_vcfs():
    cmd = [sys.executable, "-m", "anacomp", "estimate", str(CORPUS / "vcf.apc"),
           "--device", str(ROOT / "models/sample.dev"), "--profile", str(ROOT / "models/sample.prof")]
    out = subprocess.run(cmd, check=True, capture_output=True, text=True).stdout
    assert "copies: 12" in out.splitlines()


# 11 --------------------------------------------------------------------------

@crit(11)
@pytest.mark.parametrize("n", [1, 480, 4801])
def test_wav_header_and_full_scale(n):
    b = PatchBuilder("dc")
    b.add("x", "input")
    b.add("o", "output")
    b.wire("x", "o.in[0]")
    tr = render(build_system(b.build()), n / SR, {"x": Step(10.0)})
    blob = wav_bytes(tr, AudioFormat(SR, 16, 1))
    assert len(blob) == 44 + 2 * n + (n * 2) % 2
    assert blob[:4] == b"RIFF" and blob[8:16] == b"WAVEfmt "
    assert int.from_bytes(blob[4:8], "little") == 36 + 2 * n
    assert int.from_bytes(blob[40:44], "little") == 2 * n
    assert int.from_bytes(blob[24:28], "little") == SR
    assert int.from_bytes(blob[28:32], "little") == 2 * SR
    samples = np.frombuffer(blob[44:], "<i2")
    assert (samples == 32767).all()
