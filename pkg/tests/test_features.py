import numpy as np
import pytest

from interjection.audio_io import AudioClip
from interjection.dataset import pad_with_leading, synth_corpus
from interjection.errors import LengthMismatch, SignalTooShort
from interjection.features import (
    BLOCKS, LOG_FLOOR, N_FEATURES, FeatureVector, block_slices, chroma_means, contrast_frames,
    dct_matrix, featurize, featurize_batch, mel_centers, mel_filterbank, mel_means, mfcc_means,
    spectral_contrast_means, tonnetz_basis, tonnetz_means,
)
from interjection.pipeline import featurize_corpus

from conftest import sine

SILENCE = AudioClip(np.zeros(24800))


@pytest.fixture(scope="module")
def tone():
    return featurize(sine(440.0))


def test_block_layout():
    assert [n for n, _ in BLOCKS] == ["mfcc", "mel", "chroma", "contrast", "tonnetz"]
    assert N_FEATURES == 193
    s = block_slices()
    assert (s["mfcc"].start, s["mel"].start, s["chroma"].start, s["contrast"].start, s["tonnetz"].start) == (0, 40, 168, 180, 187)


def test_filterbank_invariants():
    fb = mel_filterbank(16000, 512)
    assert fb.shape == (128, 257)
    assert (fb >= 0).all()
    assert (fb.sum(axis=1) > 0).all()
    # neighbours share at least one bin
    assert all((fb[i] * fb[i + 1]).sum() > 0 for i in range(127))


def test_dct_is_orthonormal():
    d = dct_matrix(128, 128)
    np.testing.assert_allclose(d @ d.T, np.eye(128), atol=1e-12)


def test_silence_oracle():
    v = featurize(SILENCE)
    mfcc = v.block("mfcc")
    assert mfcc[0] == pytest.approx(np.sqrt(1 / 128) * 128 * np.log(LOG_FLOOR), rel=1e-12)
    np.testing.assert_allclose(mfcc[1:], 0.0, atol=1e-9)
    for name in ("mel", "chroma", "contrast", "tonnetz"):
        assert not v.block(name).any(), name


def test_tone_oracle(tone):
    assert np.argmax(tone.block("chroma")) == 9
    nearest = int(np.argmin(np.abs(mel_centers(16000) - 440.0)))
    assert np.argmax(tone.block("mel")) == nearest


def test_octave_equivalence():
    a = chroma_means(sine(440.0))
    b = chroma_means(sine(880.0))
    assert np.argmax(a) == np.argmax(b) == 9


def test_mel_power_scaling():
    clip = sine(700.0, amp=0.2)
    np.testing.assert_allclose(mel_means(AudioClip(3 * clip.samples)), 9 * mel_means(clip), rtol=1e-10)


def test_amplitude_changes_only_mfcc0(rng):
    # broadband so no mel band sits near the log floor
    clip = AudioClip(sine(300.0, amp=0.2).samples + rng.normal(0, 0.05, 24800))
    a, b = featurize(clip), featurize(AudioClip(2 * clip.samples))
    np.testing.assert_allclose(b.block("mfcc")[1:], a.block("mfcc")[1:], atol=1e-6)
    assert b.block("mfcc")[0] > a.block("mfcc")[0]
    np.testing.assert_allclose(b.block("mel"), 4 * a.block("mel"), rtol=1e-10)
    for name in ("chroma", "contrast", "tonnetz"):
        np.testing.assert_allclose(b.block(name), a.block(name), atol=1e-9)


def test_flat_spectrum_has_low_contrast():
    freqs = np.arange(257) * 16000 / 512
    c = contrast_frames(np.ones((3, 257)), freqs)
    assert np.all(np.abs(c) <= 1.0)


def test_sine_has_high_contrast_in_its_band():
    c = spectral_contrast_means(sine(1000.0))
    # 800-1600 Hz is the fourth band
    assert c[3] >= 5.0


def test_tonnetz_of_one_hot_chroma():
    basis = tonnetz_basis()
    for c in range(12):
        onehot = np.zeros(12)
        onehot[c] = 1.0
        np.testing.assert_allclose(basis @ onehot, basis[:, c])


def test_tonnetz_bounded(rng):
    clip = AudioClip(rng.uniform(-0.5, 0.5, 24800))
    t = tonnetz_means(clip)
    assert t.shape == (6,)
    assert np.all(np.abs(t) <= 1.0)


def test_shapes_and_finiteness(rng):
    clip = AudioClip(rng.normal(0, 0.1, 24800))
    assert mfcc_means(clip).shape == (40,)
    v = featurize(clip)
    assert v.values.shape == (193,)
    assert np.isfinite(v.values).all()
    assert (v.block("mel") >= 0).all() and (v.block("chroma") >= 0).all()


def test_deterministic(tone):
    np.testing.assert_array_equal(featurize(sine(440.0)).values, tone.values)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        featurize(AudioClip(np.zeros(16000)))


def test_too_short_for_a_frame():
    with pytest.raises(SignalTooShort):
        mfcc_means(AudioClip(np.zeros(100)))


def test_feature_vector_checks_size():
    with pytest.raises(LengthMismatch):
        FeatureVector(np.zeros(192))


def test_batch_and_parallel_match_serial():
    clips = synth_corpus(1, 1, seed=3)
    serial = np.stack([featurize(c).values for c in clips])
    np.testing.assert_array_equal(featurize_batch(clips), serial)
    np.testing.assert_array_equal(featurize_corpus(clips, jobs=2), serial)


def test_time_shift_robustness():
    word = sine(330.0, seconds=0.6, amp=0.3).samples * np.hanning(9600)
    base = AudioClip(word)
    early = featurize(pad_with_leading(base, 1000))
    late = featurize(pad_with_leading(base, 14000))
    for name, _ in BLOCKS:
        a, b = early.block(name), late.block(name)
        assert np.linalg.norm(a - b) <= 0.1 * np.linalg.norm(a), name
