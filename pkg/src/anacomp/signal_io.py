"""Writing traces to PCM WAV and CSV, and reading WAV files back as inputs."""

from __future__ import annotations

import os
import struct
import wave
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .blocks import V_RAIL
from .engine import TraceSet


class SignalIOError(OSError):
    code = "E_IO"


@dataclass(frozen=True)
class AudioFormat:
    sample_rate: int = 48000
    bit_depth: int = 16
    channels: int = 1

    def __post_init__(self):
        if self.bit_depth not in (16, 24):
            raise ValueError("bit_depth must be 16 or 24")
        if self.channels < 1:
            raise ValueError("channels must be at least 1")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def block_align(self) -> int:
        return self.channels * self.bit_depth // 8

    @property
    def byte_rate(self) -> int:
        return self.sample_rate * self.block_align


def normalize(v, rail: float = V_RAIL):
    """Machine volts to audio samples in [-1, 1]; ``rail`` volts is full scale."""
    if not rail > 0:
        raise ValueError("rail must be positive")
    out = np.clip(np.asarray(v, dtype=np.float64) / rail, -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def audio_channels(traces: TraceSet, probes: Optional[Sequence[str]] = None) -> list[str]:
    """Channel selection: explicit names, else output blocks, else every trace."""
    if probes:
        missing = [p for p in probes if p not in traces.traces]
        if missing:
            raise KeyError(f"no trace named {missing[0]!r}")
        return list(probes)
    return list(traces.audio) or traces.names


def wav_bytes(traces: TraceSet, fmt: Optional[AudioFormat] = None,
              probes: Optional[Sequence[str]] = None, full_scale: float = V_RAIL) -> bytes:
    names = audio_channels(traces, probes)
    if not names:
        raise ValueError("nothing to write: the trace set is empty")
    rate = int(round(traces.sample_rate))
    fmt = fmt or AudioFormat(rate, 16, len(names))
    if fmt.channels != len(names):
        raise ValueError(f"format has {fmt.channels} channels but {len(names)} traces were selected")
    if fmt.sample_rate != rate:
        raise ValueError(f"format rate {fmt.sample_rate} does not match trace rate {rate}")
    lengths = {len(traces[n]) for n in names}
    if len(lengths) != 1:
        raise ValueError("traces differ in length")

    frames = np.stack([normalize(traces[n], full_scale) for n in names], axis=1)
    peak = 32767 if fmt.bit_depth == 16 else 8388607
    ints = np.clip(np.rint(frames * peak), -peak, peak).astype("<i4").reshape(-1)
    if fmt.bit_depth == 16:
        data = ints.astype("<i2").tobytes()
    else:
        data = ints.view(np.uint8).reshape(-1, 4)[:, :3].tobytes()
    pad = b"\x00" if len(data) % 2 else b""
    header = b"".join([
        b"RIFF", struct.pack("<I", 36 + len(data) + len(pad)), b"WAVE",
        b"fmt ", struct.pack("<IHHIIHH", 16, 1, fmt.channels, fmt.sample_rate,
                             fmt.byte_rate, fmt.block_align, fmt.bit_depth),
        b"data", struct.pack("<I", len(data)),
    ])
    return header + data + pad


def write_wav(traces: TraceSet, path, fmt: Optional[AudioFormat] = None,
              probes: Optional[Sequence[str]] = None, full_scale: float = V_RAIL) -> int:
    """Write little-endian PCM with a 44-byte header; returns bytes written."""
    blob = wav_bytes(traces, fmt, probes, full_scale)
    return _write(path, blob)


def csv_text(traces: TraceSet) -> str:
    names = traces.names
    lines = ["t," + ",".join(names)]
    cols = [traces[n].tolist() for n in names]
    rate = traces.sample_rate
    for i in range(traces.n_samples):
        row = [f"{i / rate:.9g}"] + [repr(c[i]) for c in cols]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_csv(traces: TraceSet, path) -> int:
    """Header ``t,<names>`` then one row per sample; values round-trip exactly."""
    return _write(path, csv_text(traces).encode("ascii"))


def _write(path, blob: bytes) -> int:
    try:
        with open(os.fspath(path), "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise SignalIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return len(blob)


def read_wav(path, channel: int = 0) -> tuple[np.ndarray, int]:
    """One channel of a 16- or 24-bit PCM file as floats in [-1, 1], plus its rate."""
    try:
        with wave.open(os.fspath(path), "rb") as w:
            width, nch, rate = w.getsampwidth(), w.getnchannels(), w.getframerate()
            raw = w.readframes(w.getnframes())
    except (OSError, wave.Error, EOFError) as exc:
        raise SignalIOError(f"cannot read {path}: {exc}") from exc
    if width == 2:
        data = np.frombuffer(raw, "<i2").astype(np.float64) / 32767.0
    elif width == 3:
        b = np.frombuffer(raw, np.uint8).reshape(-1, 3)
        ints = (b[:, 0].astype(np.int32) | (b[:, 1].astype(np.int32) << 8)
                | (b[:, 2].astype(np.int32) << 16))
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        data = ints.astype(np.float64) / 8388607.0
    else:
        raise SignalIOError(f"{path}: unsupported sample width {8 * width} bits")
    if not 0 <= channel < nch:
        raise SignalIOError(f"{path}: no channel {channel}")
    return np.clip(data.reshape(-1, nch)[:, channel], -1.0, 1.0), rate
