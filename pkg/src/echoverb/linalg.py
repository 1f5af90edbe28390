"""Batched Hermitian linear algebra helpers.

All routines operate on stacks of small matrices shaped [..., M, M].
Analytic expressions handle M = 1 and M = 2 (the common desk-scale
cases) without LAPACK round trips.
"""

import numpy as np

from .errors import SingularSystem


def herm_inv(mats):
    """Invert a stack of Hermitian positive-definite matrices."""
    m = mats.shape[-1]
    if m == 1:
        return 1.0 / mats
    if m == 2:
        a = mats[..., 0, 0].real
        d = mats[..., 1, 1].real
        b = mats[..., 0, 1]
        det = a * d - (b * b.conj()).real
        inv = np.empty_like(mats)
        inv[..., 0, 0] = d / det
        inv[..., 1, 1] = a / det
        inv[..., 0, 1] = -b / det
        inv[..., 1, 0] = -b.conj() / det
        return inv
    return np.linalg.inv(mats)


def herm_logdet(mats):
    """log-determinant of a stack of Hermitian PD matrices (real output)."""
    m = mats.shape[-1]
    if m == 1:
        return np.log(mats[..., 0, 0].real)
    if m == 2:
        a = mats[..., 0, 0].real
        d = mats[..., 1, 1].real
        b = mats[..., 0, 1]
        return np.log(a * d - (b * b.conj()).real)
    _, logdet = np.linalg.slogdet(mats)
    return logdet


def hermitize(mats):
    """(A + A^H)/2, killing accumulated asymmetry drift."""
    return 0.5 * (mats + np.swapaxes(mats, -1, -2).conj())


def herm_eigmin(mats):
    """Smallest eigenvalue of a stack of Hermitian matrices."""
    m = mats.shape[-1]
    if m == 1:
        return mats[..., 0, 0].real
    if m == 2:
        a = mats[..., 0, 0].real
        d = mats[..., 1, 1].real
        b = mats[..., 0, 1]
        half_span = np.sqrt(0.25 * (a - d) ** 2 + (b * b.conj()).real)
        return 0.5 * (a + d) - half_span
    return np.linalg.eigvalsh(mats)[..., 0]


def chol_upper(mats):
    """Upper factor S with A = S^H S for a stack of Hermitian PD matrices.

    Weighted least-squares sums A-weighted Gram matrices as
    (S X)^H (S X), turning the accumulation into plain products.
    """
    m = mats.shape[-1]
    if m == 1:
        return np.sqrt(mats.real).astype(mats.dtype)
    if m == 2:
        a = np.sqrt(mats[..., 0, 0].real)
        s = np.zeros_like(mats)
        s[..., 0, 0] = a
        s[..., 0, 1] = mats[..., 1, 0].conj() / a
        s[..., 1, 1] = np.sqrt(
            np.maximum(mats[..., 1, 1].real
                       - (s[..., 0, 1] * s[..., 0, 1].conj()).real, 0.0)
        )
        return s
    return np.swapaxes(np.linalg.cholesky(mats), -1, -2).conj()


def solve_regularized(mats, rhs, eps):
    """Solve (A + eps*I) z = b for a batch of Hermitian systems.

    Parameters
    ----------
    mats : array [F, D, D]
    rhs : array [F, D]
    eps : float
        Tikhonov diagonal added before the solve.

    Falls back to a pseudo-inverse on a singular bin; raises
    SingularSystem with the bin index if even that fails.
    """
    n_dim = mats.shape[-1]
    reg = mats + eps * np.eye(n_dim, dtype=mats.dtype)
    try:
        sol = np.linalg.solve(reg, rhs[..., None])[..., 0]
        if np.all(np.isfinite(sol)):
            return sol
    except np.linalg.LinAlgError:
        pass
    # retry bin by bin so one bad bin does not poison the batch
    sol = np.empty_like(rhs)
    for f in range(mats.shape[0]):
        try:
            sol[f] = np.linalg.solve(reg[f], rhs[f])
        except np.linalg.LinAlgError:
            try:
                sol[f] = np.linalg.pinv(reg[f]) @ rhs[f]
            except np.linalg.LinAlgError:
                raise SingularSystem(
                    f"normal equations unsolvable at bin {f}", bin_index=f
                ) from None
        if not np.all(np.isfinite(sol[f])):
            raise SingularSystem(
                f"normal equations unsolvable at bin {f}", bin_index=f
            )
    return sol
