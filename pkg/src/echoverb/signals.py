"""Deterministic source-material generators for synthetic scenes."""

import numpy as np
from scipy.signal import lfilter


def speech_like(duration, sample_rate=16000, seed=0):
    """Synthetic speech: voiced harmonics plus breath noise, modulated.

    A drifting-pitch harmonic excitation (sustained correlations like
    voiced speech) and an unvoiced noise floor are shaped by an AR(2)
    formant-style filter and a syllabic random envelope with pauses.
    Peak normalized to 0.5.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate

    # fundamental wanders around ~120 Hz at a few Hz
    n_knots = max(int(duration * 3) + 2, 2)
    f0_knots = rng.uniform(90.0, 160.0, n_knots)
    f0 = np.interp(np.arange(n), np.linspace(0, n - 1, n_knots), f0_knots)
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    voiced = np.zeros(n)
    for k in range(1, 11):
        voiced += np.cos(k * phase + rng.uniform(0, 2 * np.pi)) / k
    unvoiced = 0.6 * rng.standard_normal(n)
    colored = lfilter([1.0], [1.0, -1.7, 0.72], voiced + unvoiced)

    # ~4 Hz random envelope, squared to carve syllable-like gaps
    n_env = max(int(duration * 4) + 2, 2)
    knots = rng.uniform(0.0, 1.0, n_env) ** 2
    env = np.interp(np.arange(n), np.linspace(0, n - 1, n_env), knots)
    sig = colored * env
    peak = np.max(np.abs(sig))
    return 0.5 * sig / peak if peak > 0 else sig


def pink_noise(duration, sample_rate=16000, seed=0):
    """1/f noise via spectral shaping, peak normalized to 0.5."""
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    spec[1:] /= np.sqrt(freqs[1:])
    spec[0] = 0.0
    sig = np.fft.irfft(spec, n=n)
    return 0.5 * sig / np.max(np.abs(sig))


def white_noise(duration, sample_rate=16000, seed=0):
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    sig = rng.standard_normal(n)
    return 0.5 * sig / np.max(np.abs(sig))
