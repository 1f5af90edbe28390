"""Multichannel WAV file I/O (PCM 16-bit or IEEE float32)."""

import numpy as np
from scipy.io import wavfile

from .errors import InvalidInput


def read_wav(path, expected_rate=None):
    """Read a WAV file as a float64 array of shape [T, M].

    PCM 16-bit data is scaled to [-1, 1).  The toolkit operates at a
    single rate, so a mismatching header rate is an error (no
    resampling).
    """
    rate, data = wavfile.read(path)
    if expected_rate is not None and rate != expected_rate:
        raise InvalidInput(
            f"{path}: sample rate {rate} does not match expected {expected_rate}"
        )
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        data = data.astype(np.float64)
    else:
        raise InvalidInput(f"{path}: unsupported WAV dtype {data.dtype}")
    if data.ndim == 1:
        data = data[:, None]
    return data, rate


def write_wav(path, data, sample_rate):
    """Write a [T] or [T, M] float array as an IEEE float32 WAV file."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2 and data.shape[1] == 1:
        data = data[:, 0]
    wavfile.write(path, sample_rate, data)
