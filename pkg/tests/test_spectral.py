import numpy as np
import pytest

from echoverb.errors import InvalidInput
from echoverb.gaussian import SOURCES
from echoverb.linear import DereverbFilter, EchoFilter
from echoverb.nnjt import load_archive, save_archive
from echoverb.scenes import RoomConfig, SceneConfig, render_scene
from echoverb.signals import speech_like
from echoverb.spectral import (
    LstmWeights,
    ground_truth_target_pipeline,
    kl_divergence,
    lstm_forward,
    oracle_latents,
    oracle_psds,
    scene_spectra,
    type_i_features,
    type_ii_features,
)
from echoverb.stft import WindowSpec

from conftest import make_scene


class TestOraclePsds:
    def test_zero_component(self):
        v = oracle_psds({"s_e": np.zeros((5, 4, 2), dtype=complex)})
        assert np.all(v["s_e"] == 0.0)

    def test_unit_norm_case(self):
        c = np.zeros((1, 1, 2), dtype=complex)
        c[0, 0] = [1.0, 1j]
        v = oracle_psds({"c": c})
        np.testing.assert_allclose(v["c"], 1.0)

    def test_matches_naive_loop(self, rng):
        c = rng.standard_normal((6, 5, 3)) + 1j * rng.standard_normal((6, 5, 3))
        v = oracle_psds({"c": c})["c"]
        for n in range(6):
            for f in range(5):
                expected = sum(abs(c[n, f, m]) ** 2 for m in range(3)) / 3
                assert abs(v[n, f] - expected) < 1e-12


class TestFeatures:
    def _signals(self, rng, n=7, f=5, m=2):
        x = rng.standard_normal((n, f)) + 1j * rng.standard_normal((n, f))
        multis = [
            rng.standard_normal((n, f, m)) + 1j * rng.standard_normal((n, f, m))
            for _ in range(5)
        ]
        return x, multis

    def test_type_i_shape_and_order(self, rng):
        x, multis = self._signals(rng)
        feats = type_i_features(x, *multis)
        assert feats.shape == (7, 30)
        np.testing.assert_allclose(feats[:, :5], np.abs(x))
        d = multis[0]
        np.testing.assert_allclose(
            feats[:, 5:10], np.sqrt(np.mean(np.abs(d) ** 2, axis=2))
        )

    def test_type_i_zero_inputs(self):
        z1 = np.zeros((4, 3), dtype=complex)
        zm = np.zeros((4, 3, 2), dtype=complex)
        feats = type_i_features(z1, zm, zm, zm, zm, zm)
        assert np.all(feats == 0.0)

    def test_identical_channels_collapse_to_single(self, rng):
        x = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        d = np.stack([x, x], axis=2)
        feats = type_i_features(x, d, d, d, d, d)
        np.testing.assert_allclose(feats[:, 3:6], np.abs(x), atol=1e-12)

    def test_type_ii_sqrt_and_order(self):
        v = {c: np.full((3, 2), 4.0) for c in SOURCES}
        v["s_e"] = np.zeros((3, 2))
        feats = type_ii_features(v)
        assert feats.shape == (3, 8)
        assert np.all(feats[:, :2] == 0.0)
        assert np.all(feats[:, 2:] == 2.0)


class TestLstmForward:
    def test_zero_weights_give_relu_bias(self):
        w = LstmWeights.random(6, 4, 3, seed=0, scale=0.0)
        w.head_b = np.array([0.5, -0.5, 0.0], dtype=np.float32)
        out = lstm_forward(w, np.ones((7, 6)))
        assert out.shape == (7, 3)
        np.testing.assert_allclose(out, np.tile([0.5, 0.0, 0.0], (7, 1)))

    def test_output_nonnegative(self, rng):
        w = LstmWeights.random(10, 8, 6, seed=1)
        out = lstm_forward(w, rng.uniform(0, 2, (20, 10)))
        assert out.shape == (20, 6)
        assert np.all(out >= 0.0)

    def test_frame_causality(self, rng):
        w = LstmWeights.random(5, 4, 2, seed=2)
        feats = rng.uniform(0, 1, (15, 5))
        full = lstm_forward(w, feats)
        half = lstm_forward(w, feats[:8])
        np.testing.assert_array_equal(full[:8], half)

    def test_dimension_mismatch_rejected(self, rng):
        w = LstmWeights.random(5, 4, 2, seed=3)
        with pytest.raises(InvalidInput):
            lstm_forward(w, np.ones((3, 6)))

    def test_archive_round_trip(self, tmp_path, rng):
        w = LstmWeights.random(5, 4, 2, seed=4)
        save_archive(tmp_path / "w.nnjt", w.to_archive())
        loaded = LstmWeights.from_archive(load_archive(tmp_path / "w.nnjt"))
        feats = rng.uniform(0, 1, (9, 5))
        np.testing.assert_array_equal(
            lstm_forward(w, feats), lstm_forward(loaded, feats)
        )


class TestKlDivergence:
    def test_zero_at_equality(self, rng):
        t = rng.uniform(0, 3, (6, 8))
        assert kl_divergence(t, t) == 0.0

    def test_hand_value_one_two(self):
        val = kl_divergence(np.array([[1.0]]), np.array([[2.0]]))
        assert abs(val - (1.0 - np.log(2.0))) < 1e-12

    def test_zero_target_limit(self):
        val = kl_divergence(np.zeros((1, 2)), np.array([[0.3, 0.0]]))
        # 0 log 0 -> 0; contributions reduce to the prediction mass
        assert abs(val - (0.3 + 1e-12) / 2) < 1e-9

    def test_nonnegative_random(self, rng):
        for _ in range(50):
            t = rng.uniform(0, 2, (4, 5))
            p = rng.uniform(0, 2, (4, 5))
            assert kl_divergence(t, p) >= 0.0


@pytest.fixture(scope="module")
def gt_scene():
    return make_scene(seed=1, period_len=1.0)


@pytest.fixture(scope="module")
def gt_window():
    return WindowSpec("hann", 1024, 256)


class TestGroundTruthPipeline:

    def test_zero_filters_reproduce_raw_components(self, gt_scene, gt_window):
        spectra = scene_spectra(gt_scene, gt_window)
        n_bins = gt_window.num_bins
        ecf = EchoFilter.zeros(n_bins, 10, gt_scene.num_channels)
        drf = DereverbFilter.zeros(n_bins, 10, gt_scene.num_channels, delay=3)
        latents = oracle_latents(spectra, ecf, drf)
        np.testing.assert_array_equal(latents["s_r"], spectra["s_l"])
        np.testing.assert_array_equal(latents["z_r"], spectra["y"])
        np.testing.assert_array_equal(latents["b_r"], spectra["b"])

    def test_z_r_energy_non_increasing(self, gt_scene, gt_window):
        result = ground_truth_target_pipeline(gt_scene, gt_window, n_iters=3)
        energies = result.z_r_energy
        assert len(energies) == 4
        for prev, cur in zip(energies, energies[1:]):
            assert cur <= prev * (1.0 + 1e-9)

    def test_targets_shapes_and_masks(self, gt_scene, gt_window):
        result = ground_truth_target_pipeline(gt_scene, gt_window, n_iters=2)
        n_frames = scene_spectra(gt_scene, gt_window)["d"].shape[0]
        for name in SOURCES:
            assert result.psd[name].shape == (n_frames, gt_window.num_bins)
            assert np.all(result.psd[name] >= 0.0)

    def test_degenerate_scene_targets(self, gt_window):
        # anechoic near-end, no echo, no noise: all residual targets ~ 0
        room = RoomConfig(rt60=0.05, rir_length=41, direct_delay=40, seed=5)
        cfg = SceneConfig(ser_db=None, snr_db=None, clip_level=None,
                          period_len=0.5, room=room)
        fs = cfg.sample_rate
        u = speech_like(1.0, seed=1)
        scene = render_scene(cfg, u, np.zeros(fs), np.zeros(2 * fs))
        assert np.all(scene.y == 0.0) and np.all(scene.b == 0.0)
        assert np.all(scene.s_l == 0.0)
        result = ground_truth_target_pipeline(scene, gt_window, n_iters=2)
        e_se = result.psd["s_e"].mean()
        for name in ("s_r", "z_r", "b_r"):
            assert result.psd[name].mean() <= 0.01 * e_se
        expected = oracle_psds({"s_e": scene_spectra(scene, gt_window)["s_e"]})
        np.testing.assert_allclose(result.psd["s_e"], expected["s_e"],
                                   atol=1e-12)
