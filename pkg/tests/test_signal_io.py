import struct
import wave

import numpy as np
import pytest

from anacomp.engine import TraceSet
from anacomp.signal_io import (
    AudioFormat, SignalIOError, csv_text, normalize, read_wav, wav_bytes, write_csv, write_wav,
)


def traces(**cols):
    arrays = {k: np.asarray(v, dtype=float) for k, v in cols.items()}
    return TraceSet(arrays, 8000, len(next(iter(arrays.values()))) / 8000, 0, "t")


def test_normalize_clips():
    assert normalize(5.0) == 0.5
    assert list(normalize([-20, 10, 3], rail=10)) == [-1.0, 1.0, 0.3]
    with pytest.raises(ValueError):
        normalize(1.0, rail=0)


def test_16_bit_golden_bytes():
    blob = wav_bytes(traces(y=[0.0, 10.0, -10.0, 5.0]))
    header = (b"RIFF" + struct.pack("<I", 44) + b"WAVEfmt "
              + struct.pack("<IHHIIHH", 16, 1, 1, 8000, 16000, 2, 16)
              + b"data" + struct.pack("<I", 8))
    assert blob == header + struct.pack("<4h", 0, 32767, -32767, 16384)


def test_24_bit_and_stereo(tmp_path):
    tr = traces(a=[10.0, -10.0, 0.0], b=[0.0, 5.0, -5.0])
    path = tmp_path / "s.wav"
    n = write_wav(tr, path, AudioFormat(8000, 24, 2))
    assert n == 44 + 3 * 2 * 3 + 0 == path.stat().st_size
    with wave.open(str(path)) as w:
        assert (w.getnchannels(), w.getsampwidth(), w.getframerate()) == (2, 3, 8000)
    a, rate = read_wav(path, 0)
    b, _ = read_wav(path, 1)
    assert rate == 8000
    assert np.allclose(a, [1, -1, 0]) and np.allclose(b, [0, 0.5, -0.5], atol=1e-6)


def test_odd_data_is_padded():
    blob = wav_bytes(traces(y=[1.0]), AudioFormat(8000, 24, 1))
    assert len(blob) == 44 + 3 + 1
    assert int.from_bytes(blob[40:44], "little") == 3


def test_read_back_16_bit(tmp_path):
    tr = traces(y=np.linspace(-10, 10, 101))
    write_wav(tr, tmp_path / "r.wav")
    data, _ = read_wav(tmp_path / "r.wav")
    assert np.max(np.abs(data - tr["y"] / 10)) <= 0.5 / 32767 + 1e-12


def test_channel_selection_errors():
    tr = traces(y=[0.0], z=[0.0])
    with pytest.raises(KeyError):
        wav_bytes(tr, probes=["q"])
    with pytest.raises(ValueError):
        wav_bytes(tr, AudioFormat(8000, 16, 1))


def test_csv_round_trips_values(tmp_path):
    vals = [0.1, -1 / 3, 2.5e-17]
    tr = traces(y=vals)
    text = csv_text(tr)
    rows = [r.split(",") for r in text.splitlines()]
    assert rows[0] == ["t", "y"]
    assert [float(r[1]) for r in rows[1:]] == vals
    assert rows[2][0] == "0.000125"
    write_csv(tr, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text() == text


def test_io_errors(tmp_path):
    with pytest.raises(SignalIOError) as e:
        write_wav(traces(y=[0.0]), tmp_path / "missing" / "x.wav")
    assert e.value.code == "E_IO"
    with pytest.raises(SignalIOError):
        read_wav(tmp_path / "nope.wav")
