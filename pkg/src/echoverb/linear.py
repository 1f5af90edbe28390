"""Long linear filters: multiframe echo cancellation and dereverberation.

Spectrograms are complex arrays [N, F, M]; the far-end signal is [N, F].
The echo filter H holds K taps of M-vectors per bin; the dereverb
filter G holds L taps of MxM matrices per bin applied with a frame
delay.  Signals are taken as zero for frame indices n < 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .linalg import chol_upper, herm_inv, solve_regularized

DEFAULT_EPS = 1e-5


@dataclass
class EchoFilter:
    """Multiframe echo cancellation filter, taps h of shape [F, K, M]."""

    h: np.ndarray

    @property
    def num_taps(self):
        return self.h.shape[1]

    @classmethod
    def zeros(cls, n_bins, n_taps, n_ch):
        return cls(np.zeros((n_bins, n_taps, n_ch), dtype=np.complex128))

    def vectorized(self):
        """Stacked taps [F, K*M], tap-major."""
        n_bins = self.h.shape[0]
        return self.h.reshape(n_bins, -1)


@dataclass
class DereverbFilter:
    """Multiframe dereverberation filter, taps g of shape [F, L, M, M].

    Tap index l covers frame lag delay + l.
    """

    g: np.ndarray
    delay: int = 3

    def __post_init__(self):
        if self.delay < 1:
            raise InvalidInput("dereverberation delay must be >= 1")

    @property
    def num_taps(self):
        return self.g.shape[1]

    @classmethod
    def zeros(cls, n_bins, n_taps, n_ch, delay=3):
        return cls(np.zeros((n_bins, n_taps, n_ch, n_ch), dtype=np.complex128), delay)


def delayed(spec, k):
    """Shift a spectrogram k frames into the past, zero-filling n < 0."""
    if k == 0:
        return spec
    out = np.zeros_like(spec)
    out[k:] = spec[:-k]
    return out


def apply_echo_canceller(d, x, ecf):
    """Subtract the multiframe echo estimate from the mixture.

    y_hat(n,f) = sum_k h(k,f) x(n-k,f);  e = d - y_hat.

    Parameters
    ----------
    d : array [N, F, M]
    x : array [N, F]
    ecf : EchoFilter

    Returns
    -------
    (e, y_hat), both [N, F, M]
    """
    if d.shape[:2] != x.shape or d.shape[1] != ecf.h.shape[0]:
        raise InvalidInput("mixture/far-end/filter shapes are inconsistent")
    y_hat = np.zeros_like(d)
    for k in range(ecf.num_taps):
        y_hat += delayed(x, k)[:, :, None] * ecf.h[None, :, k, :]
    return d - y_hat, y_hat


def dereverb_estimate(w, drf):
    """Late-reverberation estimate sum_l G(l,f) w(n-l,f) for l in the tap span."""
    if w.shape[1] != drf.g.shape[0] or w.shape[2] != drf.g.shape[2]:
        raise InvalidInput("signal/filter shapes are inconsistent")
    est = np.zeros_like(w)
    for j in range(drf.num_taps):
        est += np.einsum("fab,nfb->nfa", drf.g[:, j], delayed(w, drf.delay + j))
    return est


def apply_dereverb(e, drf):
    """Subtract the late-reverberation estimate: r = e - e_l_hat.

    Returns (r, e_l_hat), both [N, F, M].
    """
    e_l_hat = dereverb_estimate(e, drf)
    return e - e_l_hat, e_l_hat


def dereverberated_farend_taps(x, drf, n_taps):
    """Dereverberated far-end tap tensor for the echo-filter update.

    X_r(n-k,f) = x(n-k,f) I - sum_l x(n-k-l,f) G(l,f) stacks over
    k = 0..K-1 into a tensor of shape [N, F, M, M*K].
    """
    n_frames, n_bins = x.shape
    n_ch = drf.g.shape[2]
    eye = np.eye(n_ch, dtype=np.complex128)
    xr = x[:, :, None, None] * eye[None, None]
    for j in range(drf.num_taps):
        xr -= delayed(x, drf.delay + j)[:, :, None, None] * drf.g[None, :, j]
    stacked = np.zeros((n_frames, n_bins, n_ch, n_ch * n_taps), dtype=np.complex128)
    for k in range(n_taps):
        stacked[:, :, :, k * n_ch:(k + 1) * n_ch] = delayed(xr, k)
    return stacked


def plain_farend_taps(x, n_ch, n_taps):
    """Far-end taps without dereverberation: X(n-k,f) = x(n-k,f) I."""
    drf = DereverbFilter.zeros(x.shape[1], 0, n_ch, delay=1)
    return dereverberated_farend_taps(x, drf, n_taps)


def dereverberated_mixture(d, drf):
    """Apply the dereverberation filter to the raw mixture: r_d = d - G*d."""
    return apply_dereverb(d, drf)[0]


_CHUNK_BINS = 64


def update_echo_filter(x_taps, r_d, r_dd, eps=DEFAULT_EPS, r_dd_inv=None):
    """Closed-form ML update of the echo cancellation filter.

    Per bin, solves (P + eps I) h = p with
    P(f) = sum_n X^H(n,f) R_dd^-1(n,f) X(n,f) and
    p(f) = sum_n X^H(n,f) R_dd^-1(n,f) r_d(n,f).

    Parameters
    ----------
    x_taps : array [N, F, M, M*K]
        Dereverberated far-end tap tensor.
    r_d : array [N, F, M]
        Dereverberated mixture.
    r_dd : array [N, F, M, M]
        Mixture covariance (Hermitian PD after flooring).
    eps : float
    r_dd_inv : array, optional
        Precomputed inverse of r_dd.

    Returns
    -------
    EchoFilter with taps [F, K, M].
    """
    n_frames, n_bins, n_ch, mk = x_taps.shape
    n_taps = mk // n_ch
    rinv = herm_inv(r_dd) if r_dd_inv is None else r_dd_inv
    s_up = chol_upper(rinv)  # R_dd^-1 = S^H S

    p_mat = np.empty((n_bins, mk, mk), dtype=np.complex128)
    p_vec = np.empty((n_bins, mk), dtype=np.complex128)
    for lo in range(0, n_bins, _CHUNK_BINS):
        hi = min(lo + _CHUNK_BINS, n_bins)
        sx = s_up[:, lo:hi] @ x_taps[:, lo:hi]
        sr = (s_up[:, lo:hi] @ r_d[:, lo:hi, :, None])[..., 0]
        sx = sx.transpose(1, 0, 2, 3).reshape(hi - lo, n_frames * n_ch, mk)
        sr = sr.transpose(1, 0, 2).reshape(hi - lo, n_frames * n_ch, 1)
        sxh = sx.conj().transpose(0, 2, 1)
        p_mat[lo:hi] = sxh @ sx
        p_vec[lo:hi] = (sxh @ sr)[..., 0]
    h_vec = solve_regularized(p_mat, p_vec, eps)
    return EchoFilter(h_vec.reshape(n_bins, n_taps, n_ch))


def update_dereverb_filter(tap_source, target, r_dd, n_taps, delay,
                           eps=DEFAULT_EPS, r_dd_inv=None):
    """Closed-form ML update of the dereverberation filter.

    Per bin, solves (Q + eps I) g = q where the regressors are the
    Kronecker-structured delayed frames of ``tap_source`` and the
    regressand is ``target``; the vectorized filter interleaves
    channels within taps as [g_1(l)^T .. g_M(l)^T] per lag l.

    Parameters
    ----------
    tap_source : array [N, F, M]
        Signal providing the delayed regressor frames (the
        echo-cancelled signal, or the raw mixture for the parallel
        topology).
    target : array [N, F, M]
    r_dd : array [N, F, M, M]
    n_taps, delay : int
    eps : float

    Returns
    -------
    DereverbFilter with taps [F, L, M, M].
    """
    n_frames, n_bins, n_ch = tap_source.shape
    if n_taps == 0:
        return DereverbFilter.zeros(n_bins, 0, n_ch, delay=delay)
    rinv = herm_inv(r_dd) if r_dd_inv is None else r_dd_inv
    s_up = chol_upper(rinv)  # R_dd^-1 = S^H S
    lagged = np.stack(
        [delayed(tap_source, delay + j) for j in range(n_taps)], axis=2
    )  # [N, F, L, M]
    rt = np.einsum("nfab,nfb->nfa", rinv, target)

    dim = n_ch * n_ch * n_taps
    # the regressor has one nonzero block per output channel, so the
    # S-weighted stack factors into S[c, m] * lagged[(l, i)]
    q_vec = np.einsum("nfli,nfm->flmi", lagged.conj(), rt).reshape(n_bins, dim)
    q_mat = np.empty((n_bins, dim, dim), dtype=np.complex128)
    for lo in range(0, n_bins, _CHUNK_BINS):
        hi = min(lo + _CHUNK_BINS, n_bins)
        v = (s_up[:, lo:hi, :, None, :, None]
             * lagged[:, lo:hi, None, :, None, :])  # [N, C, c, l, m, i]
        v = v.transpose(1, 0, 2, 3, 4, 5).reshape(
            hi - lo, n_frames * n_ch, dim
        )
        q_mat[lo:hi] = v.conj().transpose(0, 2, 1) @ v
    g_vec = solve_regularized(q_mat, q_vec, eps)
    return DereverbFilter(g_vec.reshape(n_bins, n_taps, n_ch, n_ch), delay)


def wpe_dereverb_filter(e, n_taps, delay, n_iters=3, eps=DEFAULT_EPS):
    """Estimate a dereverberation filter by iterated WPE.

    Spectral-model-free variant: the per-bin weights are the mean
    channel power of the current dereverberated signal (identity
    spatial constraint), re-estimated over ``n_iters`` rounds.
    """
    n_ch = e.shape[2]
    eye = np.eye(n_ch, dtype=np.complex128)
    drf = DereverbFilter.zeros(e.shape[1], n_taps, n_ch, delay=delay)
    r = e
    for _ in range(n_iters):
        lam = np.maximum(np.mean(np.abs(r) ** 2, axis=2), 1e-12)
        r_dd = lam[:, :, None, None] * eye[None, None]
        drf = update_dereverb_filter(e, e, r_dd, n_taps, delay, eps)
        r, _ = apply_dereverb(e, drf)
    return drf
