import numpy as np
import pytest

from echoverb.scenes import RoomConfig, SceneConfig, render_scene
from echoverb.signals import pink_noise, speech_like
from echoverb.stft import WindowSpec


def make_scene(seed=0, ser_db=-10.0, snr_db=5.0, rt60=0.5, period_len=1.0,
               num_mics=2, clip_level=0.9, rir_length=8000,
               echo_rir_length=None):
    """Small deterministic scene for tests (1 s periods by default)."""
    room = RoomConfig(
        rt60=rt60, rir_length=rir_length, num_mics=num_mics,
        seed=seed, echo_rir_length=echo_rir_length,
    )
    cfg = SceneConfig(
        ser_db=ser_db, snr_db=snr_db, clip_level=clip_level,
        period_len=period_len, room=room, seed=seed,
    )
    u = speech_like(2.0 * period_len, seed=[seed, 0])
    # far-end plays at full scale so the loudspeaker clipping engages
    x = 2.0 * speech_like(2.0 * period_len, seed=[seed, 1])
    noise = pink_noise(4.0 * period_len, seed=[seed, 2])
    return render_scene(cfg, u, x, noise)


@pytest.fixture(scope="session")
def small_scene():
    return make_scene(seed=11)


@pytest.fixture(scope="session")
def hann_window():
    return WindowSpec("hann", 1024, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
