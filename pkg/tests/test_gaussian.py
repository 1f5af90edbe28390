import numpy as np
import pytest

from echoverb.gaussian import (
    SOURCES,
    SourceStats,
    estimate_source,
    log_likelihood,
    mixture_covariance,
    posterior_moment,
    unconstrained_psd,
    update_scm,
    wiener_filter,
)
from echoverb.linalg import herm_eigmin

N, F, M = 40, 6, 2


def random_stats(rng, n_frames=N, n_bins=F, n_ch=M, names=SOURCES):
    psd = {c: rng.uniform(0.1, 2.0, (n_frames, n_bins)) for c in names}
    scm = {}
    for c in names:
        a = rng.standard_normal((n_bins, n_ch, n_ch)) \
            + 1j * rng.standard_normal((n_bins, n_ch, n_ch))
        r = a @ a.conj().swapaxes(-1, -2) + 0.1 * np.eye(n_ch)
        trace = np.einsum("faa->f", r).real
        scm[c] = n_ch * r / trace[:, None, None]
    return SourceStats(psd, scm)


class TestMixtureCovariance:
    def test_single_identity_source(self):
        eye = np.tile(np.eye(M, dtype=complex), (F, 1, 1))
        psd = {c: np.zeros((N, F)) for c in SOURCES}
        psd["s_e"] = np.ones((N, F))
        stats = SourceStats(psd, {c: eye.copy() for c in SOURCES})
        r_dd = mixture_covariance(stats, eps=1e-5)
        np.testing.assert_allclose(
            r_dd, np.broadcast_to(np.eye(M), r_dd.shape), atol=1e-12
        )

    def test_two_identity_sources(self):
        eye = np.tile(np.eye(M, dtype=complex), (F, 1, 1))
        psd = {c: np.zeros((N, F)) for c in SOURCES}
        psd["s_e"] = np.ones((N, F))
        psd["b_r"] = np.ones((N, F))
        stats = SourceStats(psd, {c: eye.copy() for c in SOURCES})
        r_dd = mixture_covariance(stats, eps=1e-5)
        np.testing.assert_allclose(
            r_dd, np.broadcast_to(2.0 * np.eye(M), r_dd.shape), atol=1e-12
        )

    def test_hermitian_and_psd(self, rng):
        r_dd = mixture_covariance(random_stats(rng))
        np.testing.assert_allclose(
            r_dd, r_dd.conj().swapaxes(-1, -2), atol=1e-12
        )
        assert herm_eigmin(r_dd).min() >= -1e-10

    def test_flooring_keeps_invertibility(self):
        psd = {c: np.zeros((N, F)) for c in SOURCES}
        eye = np.tile(np.eye(M, dtype=complex), (F, 1, 1))
        stats = SourceStats(psd, {c: eye.copy() for c in SOURCES})
        r_dd = mixture_covariance(stats, eps=1e-5)
        assert herm_eigmin(r_dd).min() >= 1e-5 - 1e-12


class TestWienerFilter:
    def test_partition_of_identity(self, rng):
        stats = random_stats(rng)
        r_dd = mixture_covariance(stats, eps=0.0)
        total = sum(wiener_filter(stats, r_dd, c) for c in SOURCES)
        np.testing.assert_allclose(
            total, np.broadcast_to(np.eye(M), total.shape), atol=1e-10
        )

    def test_single_active_source_is_identity(self):
        eye = np.tile(np.eye(M, dtype=complex), (F, 1, 1))
        psd = {c: np.zeros((N, F)) for c in SOURCES}
        psd["s_e"] = np.ones((N, F))
        stats = SourceStats(psd, {c: eye.copy() for c in SOURCES})
        r_dd = mixture_covariance(stats, eps=0.0)
        w = wiener_filter(stats, r_dd, "s_e")
        np.testing.assert_allclose(
            w, np.broadcast_to(np.eye(M), w.shape), atol=1e-10
        )

    def test_scalar_half_gain(self):
        eye = np.tile(np.eye(1, dtype=complex), (F, 1, 1))
        psd = {c: np.zeros((N, F)) for c in SOURCES}
        psd["s_e"] = np.ones((N, F))
        psd["b_r"] = np.ones((N, F))
        stats = SourceStats(psd, {c: eye.copy() for c in SOURCES})
        r_dd = mixture_covariance(stats, eps=0.0)
        w = wiener_filter(stats, r_dd, "s_e")
        np.testing.assert_allclose(w, 0.5, atol=1e-12)

    def test_estimates_sum_to_input(self, rng):
        stats = random_stats(rng)
        r_dd = mixture_covariance(stats, eps=0.0)
        r = rng.standard_normal((N, F, M)) + 1j * rng.standard_normal((N, F, M))
        total = sum(
            estimate_source(wiener_filter(stats, r_dd, c), r) for c in SOURCES
        )
        np.testing.assert_allclose(total, r, atol=1e-9)


class TestPosteriorAndScm:
    def test_identity_filter_keeps_outer_product(self, rng):
        c_hat = rng.standard_normal((N, F, M)) + 1j * rng.standard_normal((N, F, M))
        w = np.tile(np.eye(M, dtype=complex), (N, F, 1, 1))
        r_c = np.tile(np.eye(M, dtype=complex), (F, 1, 1))
        moment = posterior_moment(c_hat, w, np.ones((N, F)), r_c)
        outer = c_hat[..., :, None] * c_hat[..., None, :].conj()
        np.testing.assert_allclose(moment, outer, atol=1e-12)

    def test_posterior_moment_hermitian(self, rng):
        stats = random_stats(rng)
        r_dd = mixture_covariance(stats, eps=0.0)
        r = rng.standard_normal((N, F, M)) + 1j * rng.standard_normal((N, F, M))
        w = wiener_filter(stats, r_dd, "s_e")
        c_hat = estimate_source(w, r)
        moment = posterior_moment(c_hat, w, stats.psd["s_e"], stats.scm["s_e"])
        np.testing.assert_allclose(
            moment, moment.conj().swapaxes(-1, -2), atol=1e-10
        )

    def test_update_scm_weighting_cancels(self, rng):
        # R_hat(n,f) = v(n,f) A  ->  normalized A regardless of weights
        a = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
        a = a @ a.conj().T + np.eye(M)
        v = rng.uniform(0.5, 2.0, (N, F))
        moments = v[:, :, None, None] * a[None, None]
        r_c = update_scm(moments, v, v)
        expected = M * a / np.trace(a).real
        np.testing.assert_allclose(r_c, np.broadcast_to(expected, (F, M, M)),
                                   atol=1e-10)

    def test_update_scm_equals_direct_formula(self, rng):
        stats = random_stats(rng)
        r_dd = mixture_covariance(stats, eps=0.0)
        r = rng.standard_normal((N, F, M)) + 1j * rng.standard_normal((N, F, M))
        w = wiener_filter(stats, r_dd, "s_e")
        c_hat = estimate_source(w, r)
        v = stats.psd["s_e"]
        moments = posterior_moment(c_hat, w, v, stats.scm["s_e"])
        r_c = update_scm(moments, v, v)
        # with w_c = v_c the update reduces to sum R_hat / sum v, normalized
        direct = moments.sum(axis=0) / v.sum(axis=0)[:, None, None]
        direct = 0.5 * (direct + direct.conj().swapaxes(-1, -2))
        trace = np.einsum("faa->f", direct).real
        direct *= (M / trace)[:, None, None]
        np.testing.assert_allclose(r_c, direct, atol=1e-10)

    def test_chained_updates_keep_contract(self, rng):
        stats = random_stats(rng)
        r_dd = mixture_covariance(stats, eps=0.0)
        r = rng.standard_normal((N, F, M)) + 1j * rng.standard_normal((N, F, M))
        r_c = stats.scm["s_e"]
        v = stats.psd["s_e"]
        for _ in range(10):
            w = wiener_filter(stats, r_dd, "s_e")
            c_hat = estimate_source(w, r)
            moments = posterior_moment(c_hat, w, v, r_c)
            r_c = update_scm(moments, v, v)
        trace = np.einsum("faa->f", r_c).real
        np.testing.assert_allclose(trace, M, atol=1e-9)
        np.testing.assert_allclose(r_c, r_c.conj().swapaxes(-1, -2), atol=1e-12)
        assert herm_eigmin(r_c).min() >= -1e-10


class TestUnconstrainedPsd:
    def test_identity_case(self):
        r_c = np.tile(np.eye(3, dtype=complex), (F, 1, 1))
        moments = np.tile(3.0 * np.eye(3, dtype=complex), (N, F, 1, 1))
        v = unconstrained_psd(r_c, moments, eps=0.0)
        np.testing.assert_allclose(v, 3.0, atol=1e-12)

    def test_consistency(self, rng):
        stats = random_stats(rng)
        v_true = rng.uniform(0.5, 3.0, (N, F))
        moments = v_true[:, :, None, None] * stats.scm["s_e"][None]
        v = unconstrained_psd(stats.scm["s_e"], moments, eps=0.0)
        np.testing.assert_allclose(v, v_true, atol=1e-9)

    def test_nonnegative_on_random_psd_inputs(self, rng):
        stats = random_stats(rng)
        a = rng.standard_normal((N, F, M, M)) + 1j * rng.standard_normal((N, F, M, M))
        moments = a @ a.conj().swapaxes(-1, -2)
        v = unconstrained_psd(stats.scm["s_e"], moments)
        assert np.all(v >= 0.0)


def test_log_likelihood_matches_direct_gaussian(rng):
    stats = random_stats(rng)
    r_dd = mixture_covariance(stats, eps=0.0)
    r = rng.standard_normal((N, F, M)) + 1j * rng.standard_normal((N, F, M))
    direct = 0.0
    for n in range(N):
        for f in range(F):
            cov = r_dd[n, f]
            quad = r[n, f].conj() @ np.linalg.solve(cov, r[n, f])
            direct += (-M * np.log(np.pi)
                       - np.log(np.linalg.det(cov).real) - quad.real)
    assert abs(log_likelihood(r, r_dd) - direct) < 1e-6 * abs(direct)
