"""STFT analysis/synthesis used by every other module.

Conventions: waveforms are float arrays of shape [T] or [T, M] (channel
last), spectrograms are complex arrays of shape [N, F, M] with N time
frames, F = length/2 + 1 frequency bins and M channels.  The forward FFT
is unnormalized, the inverse carries the 1/length factor.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import check_NOLA, get_window

from .errors import InvalidInput

WINDOW_KINDS = ("hann", "rectangular")


@dataclass(frozen=True)
class WindowSpec:
    """Analysis window: kind, length and hop in samples."""

    kind: str = "hann"
    length: int = 1024
    hop: int = 256

    def __post_init__(self):
        if self.kind not in WINDOW_KINDS:
            raise InvalidInput(f"unknown window kind {self.kind!r}")
        if self.length <= 0 or self.hop <= 0 or self.hop > self.length:
            raise InvalidInput(
                f"need 0 < hop <= length, got length={self.length} hop={self.hop}"
            )
        if not check_NOLA(self.array(), self.length, self.length - self.hop):
            raise InvalidInput(
                f"window ({self.kind}, {self.length}, {self.hop}) does not "
                "satisfy the overlap-add condition required by istft"
            )

    def array(self):
        if self.kind == "rectangular":
            return np.ones(self.length)
        return get_window("hann", self.length, fftbins=True)

    @property
    def num_bins(self):
        return self.length // 2 + 1

    def num_frames(self, n_samples):
        """Frame count for an n_samples-long signal (final frame zero-padded)."""
        return int(np.ceil((n_samples + self.length - self.hop) / self.hop))


@dataclass
class Spectrogram:
    """Complex STFT tensor [N, F, M] plus the metadata needed to invert it."""

    data: np.ndarray
    sample_rate: int
    window: WindowSpec
    n_samples: int | None = None

    @property
    def num_frames(self):
        return self.data.shape[0]

    @property
    def num_bins(self):
        return self.data.shape[1]

    @property
    def num_channels(self):
        return self.data.shape[2]


def stft(signal, window, sample_rate=16000):
    """Short-time Fourier transform of a real waveform.

    Parameters
    ----------
    signal : array, shape [T] or [T, M]
        Real waveform, assumed zero outside its support.
    window : WindowSpec
    sample_rate : int

    Returns
    -------
    Spectrogram with data of shape [N, F, M].
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim == 1:
        signal = signal[:, None]
    if signal.ndim != 2 or signal.shape[0] == 0:
        raise InvalidInput("signal must be a non-empty [T] or [T, M] array")

    n_samples, n_ch = signal.shape
    length, hop = window.length, window.hop
    n_frames = window.num_frames(n_samples)
    lead = length - hop
    total = (n_frames - 1) * hop + length
    padded = np.zeros((total, n_ch))
    padded[lead:lead + n_samples] = signal

    idx = np.arange(length)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = padded[idx] * window.array()[None, :, None]  # [N, length, M]
    data = np.fft.rfft(frames, axis=1)
    return Spectrogram(data, sample_rate, window, n_samples)


def istft(spec, num_samples=None):
    """Least-squares overlap-add inverse of stft.

    The synthesis window is the analysis window divided by the
    accumulated squared-window sum, which inverts any NOLA window
    exactly.

    Parameters
    ----------
    spec : Spectrogram
    num_samples : int, optional
        Truncate/extend the output to this many samples.  Defaults to
        ``spec.n_samples`` when recorded, else the full frame span.

    Returns
    -------
    array, shape [T, M]
    """
    window = spec.window
    win = window.array()
    length, hop = window.length, window.hop
    data = np.asarray(spec.data)
    if data.ndim != 3:
        raise InvalidInput("spectrogram data must have shape [N, F, M]")
    n_frames, n_bins, n_ch = data.shape
    if n_bins != window.num_bins:
        raise InvalidInput(
            f"bin count {n_bins} does not match window length {length}"
        )

    frames = np.fft.irfft(data, n=length, axis=1)  # [N, length, M]
    frames *= win[None, :, None]

    total = (n_frames - 1) * hop + length
    out = np.zeros((total, n_ch))
    wsum = np.zeros(total)
    win_sq = win * win
    for n in range(n_frames):
        start = n * hop
        out[start:start + length] += frames[n]
        wsum[start:start + length] += win_sq
    out /= np.maximum(wsum, 1e-12)[:, None]

    lead = length - hop
    out = out[lead:]
    if num_samples is None:
        num_samples = spec.n_samples if spec.n_samples is not None else out.shape[0]
    if num_samples <= out.shape[0]:
        return out[:num_samples].copy()
    return np.vstack([out, np.zeros((num_samples - out.shape[0], n_ch))])
