import numpy as np
import pytest

from echoverb.errors import InvalidInput
from echoverb.stft import Spectrogram, WindowSpec, istft, stft


def test_round_trip_hann(rng):
    x = rng.standard_normal((16000, 3))
    spec = stft(x, WindowSpec("hann", 1024, 256))
    out = istft(spec)
    assert np.linalg.norm(out - x) / np.linalg.norm(x) < 1e-6


def test_round_trip_rectangular(rng):
    x = rng.standard_normal(12345)
    spec = stft(x, WindowSpec("rectangular", 512, 256))
    out = istft(spec)[:, 0]
    assert np.linalg.norm(out - x) / np.linalg.norm(x) < 1e-6


def test_frame_count_formula():
    w = WindowSpec("hann", 1024, 256)
    for n in (1, 255, 256, 16000, 100001):
        spec = stft(np.ones(n), w)
        expected = int(np.ceil((n + w.length - w.hop) / w.hop))
        assert spec.num_frames == expected


def test_dc_signal_energy_in_bin_zero():
    # rectangular window: the frame sum lands entirely in bin 0
    w = WindowSpec("rectangular", 512, 256)
    spec = stft(np.ones(8192), w)
    interior = spec.data[4:-4, :, 0]  # frames seeing the full window
    win_sum = w.array().sum()
    assert np.allclose(np.abs(interior[:, 0]), win_sum, rtol=1e-9)
    assert np.max(np.abs(interior[:, 1:])) < 1e-6 * win_sum


def test_dc_signal_hann_window():
    # periodic Hann leaks only into bins +/-1; bin 0 carries the window sum
    w = WindowSpec("hann", 1024, 256)
    spec = stft(np.ones(8192), w)
    interior = spec.data[8:-8, :, 0]
    win_sum = w.array().sum()
    assert np.allclose(np.abs(interior[:, 0]), win_sum, rtol=1e-9)
    assert np.max(np.abs(interior[:, 2:])) < 1e-6 * win_sum
    assert np.all(np.argmax(np.abs(interior), axis=1) == 0)


def test_sinusoid_hits_center_bin():
    # bin-16 center frequency of a 1024-point window at 16 kHz
    w = WindowSpec("hann", 1024, 256)
    fs = 16000
    freq = 16 * fs / w.length
    t = np.arange(fs) / fs
    spec = stft(np.sin(2 * np.pi * freq * t), w, fs)
    interior = np.abs(spec.data[8:-8, :, 0])
    assert np.all(np.argmax(interior, axis=1) == 16)

    # oracle: direct DFT of one windowed frame
    frame = np.sin(2 * np.pi * freq * (np.arange(w.length) + 10 * w.hop - (w.length - w.hop)) / fs)
    direct = np.abs(np.fft.rfft(frame * w.array()))
    assert np.argmax(direct) == 16
    np.testing.assert_allclose(np.abs(spec.data[10, :, 0]), direct, atol=1e-9)


def test_linearity(rng):
    w = WindowSpec("hann", 1024, 256)
    x = rng.standard_normal((5000, 2))
    y = rng.standard_normal((5000, 2))
    a, b = 1.7, -0.3
    lhs = stft(a * x + b * y, w).data
    rhs = a * stft(x, w).data + b * stft(y, w).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_parseval_per_frame(rng):
    w = WindowSpec("hann", 1024, 256)
    x = rng.standard_normal(4096)
    spec = stft(x, w).data[:, :, 0]
    lead = w.length - w.hop
    padded = np.zeros((spec.shape[0] - 1) * w.hop + w.length)
    padded[lead:lead + x.size] = x
    for n in range(spec.shape[0]):
        frame = padded[n * w.hop:n * w.hop + w.length] * w.array()
        time_energy = np.sum(frame ** 2)
        freq_energy = (np.abs(spec[n, 0]) ** 2
                       + 2 * np.sum(np.abs(spec[n, 1:-1]) ** 2)
                       + np.abs(spec[n, -1]) ** 2) / w.length
        assert abs(freq_energy - time_energy) <= 1e-6 * max(time_energy, 1e-12)


def test_zero_spectrogram_inverts_to_zero():
    w = WindowSpec("hann", 1024, 256)
    spec = Spectrogram(np.zeros((12, w.num_bins, 2), dtype=complex), 16000, w)
    out = istft(spec)
    assert np.all(out == 0.0)


def test_istft_linearity(rng):
    w = WindowSpec("hann", 1024, 256)
    a = rng.standard_normal((9, w.num_bins, 1)) + 1j * rng.standard_normal((9, w.num_bins, 1))
    b = rng.standard_normal((9, w.num_bins, 1)) + 1j * rng.standard_normal((9, w.num_bins, 1))
    sa = Spectrogram(a, 16000, w)
    sb = Spectrogram(b, 16000, w)
    sab = Spectrogram(a + b, 16000, w)
    np.testing.assert_allclose(istft(sab), istft(sa) + istft(sb), atol=1e-9)


def test_empty_signal_rejected():
    with pytest.raises(InvalidInput):
        stft(np.zeros(0), WindowSpec())


def test_invalid_windows_rejected():
    with pytest.raises(InvalidInput):
        WindowSpec("hann", 1024, 2048)  # hop > length
    with pytest.raises(InvalidInput):
        WindowSpec("hamming", 1024, 256)  # unknown kind
    with pytest.raises(InvalidInput):
        WindowSpec("hann", 0, 0)
