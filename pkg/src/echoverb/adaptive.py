"""Block-adaptive frequency-domain echo canceller.

Provides the initial echo filter H0.  A multiframe per-bin NLMS runs in
the half-overlapping rectangular STFT domain (the partitioned-block
overlap-save structure used by production cancellers: each frame holds
two hops of signal, every tap kernel is constrained to one causal hop,
and the error is formed on the newest hop).  The converged filter is
then converted to a time-domain FIR and re-identified in the Hann
analysis domain used by the rest of the toolkit.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidInput
from .linear import EchoFilter, delayed
from .stft import WindowSpec, stft

_PROBE_SEED = 0x5eed
_NORM_FLOOR = 1e-10


@dataclass(frozen=True)
class AecConfig:
    window: WindowSpec = field(
        default_factory=lambda: WindowSpec("rectangular", 512, 256)
    )
    n_taps: int = 13
    step_base: float = 0.5
    passes: int = 2
    smoothing: float = 0.9
    out_window: WindowSpec = field(default_factory=WindowSpec)
    out_taps: int = 10

    def __post_init__(self):
        if self.n_taps < 1 or self.passes < 1:
            raise InvalidInput("n_taps and passes must be >= 1")
        if not 0.0 <= self.step_base <= 1.0:
            raise InvalidInput("step_base must lie in [0, 1]")
        if self.window.length != 2 * self.window.hop:
            raise InvalidInput("the adaptive stage needs half-overlapping frames")


def _blocks(sig, hop, n_frames):
    """Hop-sized signal blocks aligned with the stft frame layout."""
    padded = np.zeros((n_frames * hop,) + sig.shape[1:])
    padded[:sig.shape[0]] = sig
    return padded.reshape((n_frames, hop) + sig.shape[1:])


def _nlms(d, x, cfg):
    """Adapt the per-bin multiframe filter; returns taps [F, K, M].

    Each tap k holds the frequency response of a hop-length causal
    kernel covering lags [k*hop, (k+1)*hop).  The step size is scaled
    per bin by (1 - |rho|^2) with rho the smoothed normalized
    cross-correlation between the error and the echo estimate.
    """
    hop = cfg.window.hop
    length = cfg.window.length
    n_taps = cfg.n_taps
    lam = cfg.smoothing
    n_ch = d.shape[1]

    x_spec = stft(x, cfg.window).data[:, :, 0]  # frame n = x[n*hop-hop : n*hop+hop]
    n_frames, n_bins = x_spec.shape
    d_blk = _blocks(d, hop, n_frames)           # block n = d[n*hop : n*hop+hop]
    # blocks straddling the signal end mix zero padding with predicted
    # echo tail; adapting on them would corrupt the filter
    n_adapt = min(n_frames, d.shape[0] // hop)

    h = np.zeros((n_bins, n_taps, n_ch), dtype=np.complex128)
    for _ in range(cfg.passes):
        # step statistics reset each pass, the filter carries over
        p_ee = np.zeros((n_bins, n_ch))
        p_yy = np.zeros((n_bins, n_ch))
        p_ey = np.zeros((n_bins, n_ch), dtype=np.complex128)
        xbuf = np.zeros((n_bins, n_taps), dtype=np.complex128)
        for n in range(n_adapt):
            xbuf[:, 1:] = xbuf[:, :-1]
            xbuf[:, 0] = x_spec[n]
            y_freq = np.einsum("fk,fkm->fm", xbuf, h)
            # overlap-save: only the newest hop of the frame is valid
            y_blk = np.fft.irfft(y_freq, n=length, axis=0)[hop:]
            e_blk = d_blk[n] - y_blk
            e_freq = np.fft.rfft(
                np.concatenate([np.zeros((hop, n_ch)), e_blk]), axis=0
            )

            p_ee = lam * p_ee + (1 - lam) * np.abs(e_freq) ** 2
            p_yy = lam * p_yy + (1 - lam) * np.abs(y_freq) ** 2
            p_ey = lam * p_ey + (1 - lam) * e_freq * y_freq.conj()
            rho_sq = np.abs(p_ey) ** 2 / (p_ee * p_yy + _NORM_FLOOR)
            step = cfg.step_base * (1.0 - rho_sq)

            norm = np.sum(np.abs(xbuf) ** 2, axis=1) + _NORM_FLOOR
            h += (step * e_freq / norm[:, None])[:, None, :] \
                * xbuf.conj()[:, :, None]
            # constrain every tap kernel to its causal hop
            kernels = np.fft.irfft(h, n=length, axis=0)
            kernels[hop:] = 0.0
            h = np.fft.rfft(kernels, axis=0)
    return h


def _multiframe_to_fir(h, window):
    """Concatenate the causal tap kernels into one FIR of K*hop samples."""
    n_bins, n_taps, n_ch = h.shape
    kernels = np.fft.irfft(h, n=window.length, axis=0)[:window.hop]
    fir = np.zeros((n_taps * window.hop, n_ch))
    for k in range(n_taps):
        fir[k * window.hop:(k + 1) * window.hop] = kernels[:, k, :]
    return fir


@lru_cache(maxsize=4)
def _probe_basis(window, n_taps, n_probe):
    """Probe signal, its delayed tap stack and the normal matrix.

    These depend only on the analysis configuration, so they are cached
    across conversions.
    """
    rng = np.random.default_rng(_PROBE_SEED)
    probe = rng.standard_normal(n_probe)
    x_spec = stft(probe, window).data[:, :, 0]
    taps = np.stack(
        [delayed(x_spec, k) for k in range(n_taps)], axis=2
    )  # [N, F, K]
    p_mat = np.einsum("nfk,nfl->fkl", taps.conj(), taps)
    return probe, taps, p_mat


def _fir_to_multiframe(fir, window, n_taps, eps=1e-5):
    """Identify the multiframe representation of a FIR in a window domain.

    Runs a seeded white-noise probe through the FIR and solves the
    per-bin per-channel least-squares fit of a K-tap multiframe filter,
    which is agnostic to the analysis domain the FIR came from.
    """
    # the fit transfers to unseen signals only with enough probe frames
    n_probe = max(8 * fir.shape[0], 96000)
    probe, taps, p_mat = _probe_basis(window, n_taps, n_probe)
    n_ch = fir.shape[1]
    echoes = np.stack(
        [fftconvolve(probe, fir[:, m], mode="full")[:n_probe] for m in range(n_ch)],
        axis=1,
    )
    y_spec = stft(echoes, window).data
    rhs = np.einsum("nfk,nfm->fkm", taps.conj(), y_spec)
    n_bins = p_mat.shape[0]
    reg = p_mat + eps * np.eye(n_taps, dtype=p_mat.dtype)
    h = np.linalg.solve(reg, rhs.reshape(n_bins, n_taps, n_ch))
    return EchoFilter(np.ascontiguousarray(h))


def aec_init(d, x, cfg=None):
    """Adapt an echo canceller on waveforms and return H0.

    Parameters
    ----------
    d : array [T, M]
        Microphone mixture.
    x : array [T]
        Far-end reference.
    cfg : AecConfig

    Returns
    -------
    EchoFilter in the ``cfg.out_window`` domain with ``cfg.out_taps``
    taps.
    """
    cfg = cfg or AecConfig()
    d = np.asarray(d, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if d.ndim == 1:
        d = d[:, None]
    if x.ndim != 1 or d.shape[0] != x.shape[0]:
        raise InvalidInput("mixture and far-end must have equal lengths")

    h = _nlms(d, x, cfg)
    if not np.any(h):
        return EchoFilter.zeros(cfg.out_window.num_bins, cfg.out_taps, d.shape[1])
    fir = _multiframe_to_fir(h, cfg.window)
    return _fir_to_multiframe(fir, cfg.out_window, cfg.out_taps)
