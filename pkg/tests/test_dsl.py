from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from anacomp.blocks import BlockKind, PatchBuilder
from anacomp.diagnostics import DiagnosticError
from anacomp.dsl import parse_patch, parse_patch_diagnostics, serialize_patch

CORPUS = Path(__file__).resolve().parents[1] / "corpus"

# The documented example text, kept verbatim for the statement-count check.
LOWPASS_TEXT = """\
patch lowpass
input x
block s1 = summer(k=[2.0, 2.0])
block i1 = integrator(k=[1.0], ic=0.0)
wire x -> s1.in[0]
wire i1.out -> s1.in[1]
wire s1.out -> i1.in[0]
probe y = i1.out
end
"""


def codes(text):
    _, diags = parse_patch_diagnostics(text)
    return [d.code for d in diags]


def test_lowpass_counts():
    p = parse_patch(LOWPASS_TEXT)
    assert len(p.blocks) == 4 and len(p.wires) == 4 and list(p.probes) == ["y"]
    assert p.blocks["s1"].params.k == (2.0, 2.0)


def test_comments_params_and_refs():
    p = parse_patch("""
    # a comment
    patch g   # trailing
    param k = 0.25
    block a = atten(a=k)
    block i = integrator(k=[1, k], ic=-k)
    end
    """)
    assert p.params == {"k": 0.25}
    assert p.blocks["a"].params.a == 0.25
    assert p.blocks["i"].params.k == (1.0, 0.25) and p.blocks["i"].params.ic == -0.25


def test_unknown_id_reports_token_span():
    _, diags = parse_patch_diagnostics("patch p\ninput x\nwire x -> nope.in[0]\nend\n")
    (d,) = diags
    assert d.code == "E_UNKNOWN_ID"
    assert (d.span.line, d.span.column, d.span.length) == (3, 11, 4)
    assert d.format("f.apc").startswith("f.apc:3:11: error E_UNKNOWN_ID")


@pytest.mark.parametrize("text,code", [
    ("patch p\nblock a = flux()\nend", "E_KIND"),
    ("patch p\nblock a = gain(k=1)\nblock a = gain(k=1)\nend", "E_DUPLICATE_ID"),
    ("patch p\nblock a = gain(q=1)\nend", "E_PARAM"),
    ("patch p\nblock a = gain(k=zz)\nend", "E_UNKNOWN_ID"),
    ("patch p\nblok a = gain(k=1)\nend", "E_SYNTAX"),
    ("patch p\nblock a = gain(k=1)\nwire a.out -> a.in[3]\nend", "E_PORT"),
    ("patch p\ninput x\nblock a = gain(k=1)\nwire x -> a.in[0]\nwire x -> a.in[0]\nend",
     "E_DUPLICATE_DRIVER"),
    ("patch p\nblock a = gain(k=1)\nwire a.out -> a.in[0]\nend", "E_ALGEBRAIC_LOOP"),
])
def test_error_codes(text, code):
    assert code in codes(text)
    with pytest.raises(DiagnosticError) as e:
        parse_patch(text)
    assert code in e.value.codes


def test_all_errors_collected():
    text = "patch p\nblock a = flux()\nblock b = gain(q=1)\nwire c.out -> d.in[0]\nend"
    assert codes(text).count("E_UNKNOWN_ID") == 2
    assert {"E_KIND", "E_PARAM"} <= set(codes(text))


def test_canonical_form():
    text = serialize_patch(parse_patch(LOWPASS_TEXT))
    assert text == LOWPASS_TEXT


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.apc")), ids=lambda p: p.name)
def test_corpus_parses(path):
    parse_patch(path.read_text())


coeff = st.floats(0, 50, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-300)


@settings(max_examples=60, deadline=None)
@given(st.lists(coeff, min_size=1, max_size=4), st.floats(-10, 10, allow_nan=False), coeff)
def test_round_trip_exact(ks, ic, g):
    b = PatchBuilder("rt")
    b.add("x", "input")
    b.add("i", "integrator", k=ks, ic=ic)
    b.add("g", "gain", k=g)
    for j in range(len(ks)):
        b.wire("x" if j else "g.out", f"i.in[{j}]")
    b.wire("i.out", "g.in[0]")
    b.probe("y", "i.out")
    p = b.build()
    q = parse_patch(serialize_patch(p))
    assert q == p
    assert q.blocks["i"].params.k == tuple(float(k) for k in ks)
    assert q.blocks["i"].kind is BlockKind.INTEGRATOR
