import numpy as np
import pytest
from scipy.signal import coherence, fftconvolve

from echoverb.errors import InvalidInput
from echoverb.scenes import (
    PERIOD_LABELS,
    RoomConfig,
    SceneConfig,
    apply_loudspeaker_nonlinearity,
    load_scene,
    measured_ser_db,
    measured_snr_db,
    render_scene,
    save_scene,
    split_rir,
    synth_diffuse_noise,
    synth_rir,
)
from echoverb.signals import pink_noise, speech_like

from conftest import make_scene

FS = 16000


class TestSynthRir:
    def test_deterministic(self):
        room = RoomConfig(seed=42)
        a = synth_rir(room, 3)
        b = synth_rir(room, 3)
        assert np.array_equal(a.taps, b.taps)

    def test_distinct_sources_differ(self):
        room = RoomConfig(seed=42)
        assert not np.array_equal(synth_rir(room, 0).taps, synth_rir(room, 1).taps)

    def test_direct_path_position(self):
        room = RoomConfig(direct_delay=40, seed=0)
        rir = synth_rir(room, 0)
        assert np.all(rir.taps[:, :40] == 0.0)
        assert np.all(rir.taps[:, 40] != 0.0)

    def test_decay_matches_rt60(self):
        room = RoomConfig(rt60=0.5, rir_length=9000, seed=5)
        rir = synth_rir(room, 0)
        tail = rir.taps[0, room.direct_delay + 1:]
        smoothed = np.convolve(tail ** 2, np.ones(128) / 128, mode="valid")
        db = 10 * np.log10(smoothed)
        slope = np.polyfit(np.arange(db.size), db, 1)[0]  # dB per sample
        per_rt60 = slope * room.rt60 * FS
        assert -66.0 < per_rt60 < -54.0  # -60 dB per rt60, +/-10%

    def test_too_short_rejected(self):
        with pytest.raises(InvalidInput):
            RoomConfig(rir_length=10, direct_delay=40)
        room = RoomConfig(direct_delay=40)
        with pytest.raises(InvalidInput):
            synth_rir(room, 0, length=20)


class TestSplitRir:
    def test_partition_is_exact(self):
        rir = synth_rir(RoomConfig(seed=1), 0)
        early, late = split_rir(rir, 0.064, FS)
        assert np.array_equal(early.taps + late.taps, rir.taps)

    def test_split_index_64ms(self):
        rir = synth_rir(RoomConfig(seed=1), 0)
        early, late = split_rir(rir, 0.064, FS)
        assert np.all(early.taps[:, 1024:] == 0.0)
        assert np.all(late.taps[:, :1024] == 0.0)
        assert np.any(late.taps[:, 1024] != 0.0)

    def test_te_beyond_span_gives_zero_late(self):
        rir = synth_rir(RoomConfig(rir_length=800, seed=1), 0)
        _, late = split_rir(rir, 10.0, FS)
        assert np.all(late.taps == 0.0)


class TestNonlinearity:
    def test_identity_when_disabled(self, rng):
        x = rng.standard_normal(100)
        np.testing.assert_array_equal(apply_loudspeaker_nonlinearity(x, None), x)
        np.testing.assert_array_equal(
            apply_loudspeaker_nonlinearity(x, np.inf), x
        )

    def test_clamp_values(self):
        out = apply_loudspeaker_nonlinearity(np.array([0.5, -2.0]), 1.0)
        np.testing.assert_array_equal(out, [0.5, -1.0])

    def test_clipped_sine_has_odd_harmonics(self):
        t = np.arange(FS) / FS
        sine = 2.0 * np.sin(2 * np.pi * 100 * t)
        clipped = apply_loudspeaker_nonlinearity(sine, 1.0)
        spec = np.abs(np.fft.rfft(clipped))
        fund = spec[100]
        third = spec[300]
        assert third > 1e-3 * fund > 0


class TestDiffuseNoise:
    def test_zero_in_zero_out(self):
        room = RoomConfig(seed=2)
        out = synth_diffuse_noise(room, np.zeros(1000), 0.064)
        assert out.shape == (1000, room.num_mics)
        assert np.all(out == 0.0)

    def test_lower_coherence_than_point_source(self):
        room = RoomConfig(rt60=0.5, rir_length=8000, num_mics=2, seed=3)
        src = pink_noise(8.0, seed=9)
        diffuse = synth_diffuse_noise(room, src, 0.064)
        rir = synth_rir(room, 7)
        point = np.stack(
            [fftconvolve(src, rir.taps[m], mode="full")[:src.size]
             for m in range(2)], axis=1,
        )
        freqs, coh_d = coherence(diffuse[:, 0], diffuse[:, 1], fs=FS, nperseg=256)
        _, coh_p = coherence(point[:, 0], point[:, 1], fs=FS, nperseg=256)
        # single-bin coherence estimates are noisy: average around 4 kHz
        band = (freqs >= 3500) & (freqs <= 4500)
        assert coh_d[band].mean() < coh_p[band].mean()


class TestRenderScene:
    def test_mixture_identity(self, small_scene):
        sc = small_scene
        resid = sc.d - (sc.s_e + sc.s_l + sc.y + sc.b)
        assert np.max(np.abs(resid)) < 1e-9

    def test_period_layout(self, small_scene):
        labels = [lab for (_, _, lab) in small_scene.periods]
        assert tuple(labels) == PERIOD_LABELS
        # periods tile the utterance
        assert small_scene.periods[0][0] == 0
        assert small_scene.periods[-1][1] == small_scene.d.shape[0]
        for (s0, e0, _), (s1, _, _) in zip(small_scene.periods, small_scene.periods[1:]):
            assert e0 == s1

    def test_requested_levels_hit(self):
        sc = make_scene(seed=3, ser_db=0.0, snr_db=0.0)
        assert abs(measured_ser_db(sc)) < 0.1
        assert abs(measured_snr_db(sc)) < 0.1

    def test_determinism(self):
        a = make_scene(seed=8)
        b = make_scene(seed=8)
        assert np.array_equal(a.d, b.d)

    def test_zero_noise_with_snr_disabled(self):
        room = RoomConfig(seed=4)
        cfg = SceneConfig(ser_db=-10.0, snr_db=None, room=room, period_len=1.0)
        u = speech_like(2.0, seed=1)
        x = speech_like(2.0, seed=2)
        sc = render_scene(cfg, u, x, np.zeros(4 * FS))
        assert np.array_equal(sc.d, sc.s_e + sc.s_l + sc.y)
        assert np.all(sc.b == 0.0)

    def test_echo_silent_before_far_end_activity(self, small_scene):
        dt_start = small_scene.periods[2][0]
        assert np.max(np.abs(small_scene.y[:dt_start])) == 0.0

    def test_short_sources_rejected(self):
        cfg = SceneConfig(room=RoomConfig(seed=0), period_len=1.0)
        with pytest.raises(InvalidInput):
            render_scene(cfg, np.zeros(100), speech_like(2.0), pink_noise(4.0))

    def test_config_ranges_validated(self):
        with pytest.raises(InvalidInput):
            SceneConfig(ser_db=-60.0)
        with pytest.raises(InvalidInput):
            SceneConfig(snr_db=30.0)


def test_save_load_round_trip(tmp_path, small_scene):
    save_scene(small_scene, tmp_path / "scene")
    loaded = load_scene(tmp_path / "scene")
    assert loaded.periods == small_scene.periods
    assert loaded.sample_rate == small_scene.sample_rate
    assert loaded.d.shape == small_scene.d.shape
    # float32 storage keeps ~1e-7 relative accuracy
    np.testing.assert_allclose(loaded.d, small_scene.d, atol=1e-6)
    np.testing.assert_allclose(loaded.x, small_scene.x, atol=1e-6)


def test_load_missing_component_fails(tmp_path, small_scene):
    save_scene(small_scene, tmp_path / "scene")
    (tmp_path / "scene" / "x.wav").unlink()
    with pytest.raises(InvalidInput):
        load_scene(tmp_path / "scene")
