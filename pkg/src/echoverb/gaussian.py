"""Local Gaussian source model, Wiener postfilter and EM statistics.

Each source c is modeled as a zero-mean complex Gaussian with
covariance v_c(n,f) R_c(f): a nonnegative PSD [N, F] and a Hermitian
spatial covariance matrix [F, M, M] with trace M.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import herm_eigmin, herm_inv, herm_logdet, hermitize

SOURCES = ("s_e", "s_r", "z_r", "b_r")

DEFAULT_EPS = 1e-5
PSD_FLOOR = 1e-12


@dataclass
class SourceStats:
    """PSDs and SCMs of the modeled sources, keyed by source name."""

    psd: dict
    scm: dict

    @property
    def names(self):
        return tuple(self.psd.keys())

    @classmethod
    def with_identity_scms(cls, psd, n_ch):
        """Pair given PSDs with identity SCMs (the standard initialization)."""
        n_bins = next(iter(psd.values())).shape[1]
        eye = np.tile(np.eye(n_ch, dtype=np.complex128), (n_bins, 1, 1))
        return cls(dict(psd), {name: eye.copy() for name in psd})


def mixture_covariance(stats, eps=DEFAULT_EPS):
    """R_dd(n,f) = sum_c v_c(n,f) R_c(f), floored to keep it invertible.

    eps*I is added at every (n,f) whose smallest eigenvalue falls below
    eps.

    Returns
    -------
    array [N, F, M, M]
    """
    names = stats.names
    v = np.stack([stats.psd[c] for c in names])
    r = np.stack([stats.scm[c] for c in names])
    r_dd = np.einsum("cnf,cfab->nfab", v, r)
    floor_mask = herm_eigmin(r_dd) < eps
    if np.any(floor_mask):
        n_ch = r_dd.shape[-1]
        r_dd[floor_mask] += eps * np.eye(n_ch, dtype=r_dd.dtype)
    return r_dd


def wiener_filter(stats, r_dd, name, r_dd_inv=None):
    """Multichannel Wiener filter W_c = v_c R_c R_dd^-1, shape [N, F, M, M]."""
    rinv = herm_inv(r_dd) if r_dd_inv is None else r_dd_inv
    return np.einsum(
        "nf,fab,nfbc->nfac", stats.psd[name], stats.scm[name], rinv
    )


def estimate_source(w_c, r):
    """E-step posterior mean c_hat(n,f) = W_c(n,f) r(n,f)."""
    return np.einsum("nfab,nfb->nfa", w_c, r)


def posterior_moment(c_hat, w_c, v_c, r_c):
    """Second-order posterior moment of a source.

    R_hat = c_hat c_hat^H + (I - W_c) v_c R_c, shape [N, F, M, M].
    """
    n_ch = w_c.shape[-1]
    outer = c_hat[..., :, None] * c_hat[..., None, :].conj()
    prior = v_c[..., None, None] * r_c[None]
    eye = np.eye(n_ch, dtype=w_c.dtype)
    return outer + (eye - w_c) @ prior


def update_scm(post_moments, psd, weights, eps=DEFAULT_EPS):
    """Weighted M-step update of a spatial covariance matrix.

    R_c(f) = (sum_n w)^-1 sum_n (w/v) R_hat(n,f), then symmetrized and
    rescaled to trace M.  Passing weights = psd gives the weighted
    update used in the iterative algorithm; weights = 1 recovers the
    exact EM update.

    Returns
    -------
    array [F, M, M]
    """
    v = np.maximum(psd, PSD_FLOOR)
    num = np.einsum("nf,nfab->fab", weights / v, post_moments)
    den = np.maximum(weights.sum(axis=0), eps)
    r_c = hermitize(num / den[:, None, None])
    n_ch = r_c.shape[-1]
    trace = np.einsum("faa->f", r_c).real
    healthy = trace > 1e-12 * n_ch
    scale = np.where(healthy, n_ch / np.where(healthy, trace, 1.0), 1.0)
    r_c *= scale[:, None, None]
    # degenerate bins (all-zero statistics) fall back to identity
    if not np.all(healthy):
        r_c[~healthy] = np.eye(n_ch, dtype=r_c.dtype)
    return r_c


def unconstrained_psd(r_c, post_moments, eps=DEFAULT_EPS):
    """Unconstrained ML PSD v^unc(n,f) = tr(R_c^-1 R_hat)/M, clamped at 0."""
    n_ch = r_c.shape[-1]
    rinv = herm_inv(r_c + eps * np.eye(n_ch, dtype=r_c.dtype))
    v = np.einsum("fab,nfba->nf", rinv, post_moments).real / n_ch
    return np.maximum(v, 0.0)


def log_likelihood(r, r_dd, r_dd_inv=None):
    """Gaussian log-likelihood of the residual under the mixture covariance.

    sum_{n,f} log N_C(r(n,f); 0, R_dd(n,f)) with the convention that the
    residual equals the observation minus its conditional mean.
    """
    n_ch = r.shape[-1]
    rinv = herm_inv(r_dd) if r_dd_inv is None else r_dd_inv
    quad = np.einsum("nfa,nfab,nfb->nf", r.conj(), rinv, r).real
    logdet = herm_logdet(r_dd)
    n_bins_frames = r.shape[0] * r.shape[1]
    return float(
        -n_bins_frames * n_ch * np.log(np.pi) - logdet.sum() - quad.sum()
    )
