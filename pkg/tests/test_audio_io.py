import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from interjection.audio_io import AudioClip, read_wav, write_wav
from interjection.errors import CorruptHeader, IoFailure, UnsupportedFormat

from conftest import sine

QUANT_BOUND = 2.0 ** -15 + 2.0 ** -16


def _raw_wav(path, tag, channels, rate, bits, payload):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def test_silence_reads_back_as_zeros(tmp_path):
    write_wav(AudioClip(np.zeros(16000)), tmp_path / "s.wav")
    clip = read_wav(tmp_path / "s.wav")
    assert clip.sample_rate == 16000
    assert len(clip) == 16000
    assert not clip.samples.any()


def test_most_negative_pcm_value_is_minus_one(tmp_path):
    _raw_wav(tmp_path / "m.wav", 1, 1, 16000, 16, struct.pack("<hh", -32768, 32767))
    clip = read_wav(tmp_path / "m.wav")
    assert clip.samples[0] == -1.0
    assert clip.samples[1] == 32767 / 32768


def test_sine_round_trip_error_bound(tmp_path):
    clip = sine(440.0, seconds=1.0, amp=0.9)
    write_wav(clip, tmp_path / "a.wav")
    back = read_wav(tmp_path / "a.wav")
    assert len(back) == len(clip)
    assert np.max(np.abs(back.samples - clip.samples)) <= 2 / 32768


def test_empty_clip_has_zero_length_data_chunk(tmp_path):
    write_wav(AudioClip(np.zeros(0)), tmp_path / "e.wav")
    raw = (tmp_path / "e.wav").read_bytes()
    assert raw[36:40] == b"data"
    assert struct.unpack("<I", raw[40:44])[0] == 0
    assert len(read_wav(tmp_path / "e.wav")) == 0


def test_out_of_range_sample_is_clamped(tmp_path):
    write_wav(AudioClip(np.array([1.5, -1.5, 0.0])), tmp_path / "c.wav")
    pcm = np.frombuffer((tmp_path / "c.wav").read_bytes()[44:], dtype="<i2")
    assert pcm.tolist() == [32767, -32768, 0]


def test_float32_input_accepted(tmp_path):
    data = np.array([0.25, -0.5, 0.75], dtype="<f4")
    _raw_wav(tmp_path / "f.wav", 3, 1, 22050, 32, data.tobytes())
    clip = read_wav(tmp_path / "f.wav")
    assert clip.sample_rate == 22050
    np.testing.assert_array_equal(clip.samples, data.astype(float))


def test_stereo_rejected(tmp_path):
    _raw_wav(tmp_path / "st.wav", 1, 2, 16000, 16, b"\0" * 8)
    with pytest.raises(UnsupportedFormat):
        read_wav(tmp_path / "st.wav")


def test_compressed_codec_rejected(tmp_path):
    _raw_wav(tmp_path / "mu.wav", 7, 1, 8000, 8, b"\0" * 8)
    with pytest.raises(UnsupportedFormat):
        read_wav(tmp_path / "mu.wav")


def test_not_riff(tmp_path):
    (tmp_path / "x.wav").write_bytes(b"hello world, not audio")
    with pytest.raises(CorruptHeader):
        read_wav(tmp_path / "x.wav")


def test_missing_file(tmp_path):
    with pytest.raises(IoFailure):
        read_wav(tmp_path / "nope.wav")


def test_duration_bookkeeping():
    clip = AudioClip(np.zeros(24800), 16000)
    assert clip.duration_seconds == 24800 / 16000


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(0, 2000), elements=st.floats(-1.0, 1.0)),
       st.sampled_from([8000, 16000, 44100]))
def test_round_trip_property(tmp_path_factory, samples, rate):
    path = tmp_path_factory.mktemp("rt") / "r.wav"
    write_wav(AudioClip(samples, rate), path)
    back = read_wav(path)
    assert back.sample_rate == rate
    assert len(back) == len(samples)
    if len(samples):
        assert np.max(np.abs(back.samples - samples)) <= QUANT_BOUND
