"""Synthetic multichannel scene generation with exact ground truth.

A scene is an 8 s (by default) utterance laid out as four equal periods:
noise only, near-end talk, double talk, far-end talk.  Every component
of the mixture (early/late near-end speech, nonlinear echo, diffuse
noise) is rendered separately so the toolkit can evaluate against exact
references.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidInput
from .wavio import read_wav, write_wav

NOISE_ONLY = "noise_only"
NEAR_END_TALK = "near_end_talk"
DOUBLE_TALK = "double_talk"
FAR_END_TALK = "far_end_talk"
PERIOD_LABELS = (NOISE_ONLY, NEAR_END_TALK, DOUBLE_TALK, FAR_END_TALK)

COMPONENT_WAVS = ("d", "x", "u", "s_e", "s_l", "y", "b")

# source ids reserved by render_scene
_NEAR_END_SRC = 0
_ECHO_SRC = 1
_NOISE_SRCS = (2, 3)

# expected tail-to-direct energy ratio of synthesized RIRs
_DIRECT_TO_REVERB_DB = -3.0


@dataclass(frozen=True)
class RoomConfig:
    """Parameters of the simulated acoustic environment."""

    rt60: float = 0.5
    rir_length: int = 8000
    num_mics: int = 2
    direct_delay: int = 40
    seed: int = 0
    sample_rate: int = 16000
    echo_rir_length: int | None = None  # shorter echo path when set

    def __post_init__(self):
        if self.rt60 <= 0:
            raise InvalidInput("rt60 must be positive")
        if self.rir_length < self.direct_delay + 1:
            raise InvalidInput("rir_length too short for direct_delay")


@dataclass
class Rir:
    """Room impulse response, taps of shape [M, rir_length]."""

    taps: np.ndarray


@dataclass(frozen=True)
class SceneConfig:
    ser_db: float | None = -10.0
    snr_db: float | None = 5.0
    clip_level: float | None = 0.9
    t_e: float = 0.064
    period_len: float = 2.0
    sample_rate: int = 16000
    room: RoomConfig = field(default_factory=RoomConfig)
    seed: int = 0

    def __post_init__(self):
        if self.ser_db is not None and not -45.0 <= self.ser_db <= 6.0:
            raise InvalidInput("ser_db outside supported range [-45, +6]")
        if self.snr_db is not None and not -21.0 <= self.snr_db <= 24.0:
            raise InvalidInput("snr_db outside supported range [-21, +24]")
        if self.t_e <= 0:
            raise InvalidInput("t_e must be positive")


@dataclass
class Scene:
    """Rendered utterance with all ground-truth components.

    ``d``, ``s_e``, ``s_l``, ``y``, ``b`` have shape [T, M]; the far-end
    signal ``x`` and the anechoic near-end ``u`` have shape [T].
    ``periods`` is a list of (start, end, label) in samples.
    """

    x: np.ndarray
    u: np.ndarray
    s_e: np.ndarray
    s_l: np.ndarray
    y: np.ndarray
    b: np.ndarray
    d: np.ndarray
    periods: list
    sample_rate: int
    t_e: float
    config: SceneConfig | None = None

    @property
    def num_channels(self):
        return self.d.shape[1]

    def periods_labeled(self, *labels):
        return [(s, e, lab) for (s, e, lab) in self.periods if lab in labels]


def synth_rir(room, source_id, length=None):
    """Synthesize an RIR as direct impulse plus exponentially decaying noise.

    Deterministic given (room.seed, source_id).  The squared-tap
    envelope of the tail decays by 60 dB per rt60 seconds; the tail is
    scaled so its expected energy sits 3 dB above the direct path.
    """
    n_taps = int(length if length is not None else room.rir_length)
    if n_taps < room.direct_delay + 1:
        raise InvalidInput("rir_length too short for direct_delay")
    rng = np.random.default_rng([room.seed, source_id])
    fs = room.sample_rate
    dd = room.direct_delay

    taps = np.zeros((room.num_mics, n_taps))
    taps[:, dd] = 1.0
    n_tail = n_taps - dd - 1
    if n_tail > 0:
        tau = np.arange(1, n_tail + 1)
        envelope = 10.0 ** (-3.0 * tau / (room.rt60 * fs))
        scale = np.sqrt(
            10.0 ** (-_DIRECT_TO_REVERB_DB / 10.0) / np.sum(envelope ** 2)
        )
        noise = rng.standard_normal((room.num_mics, n_tail))
        taps[:, dd + 1:] = scale * noise * envelope[None, :]
    return Rir(taps)


def split_rir(rir, t_e, sample_rate):
    """Split an RIR into early (tap index < round(t_e*fs)) and late parts.

    The two parts sum to the input exactly.
    """
    split = int(round(t_e * sample_rate))
    early = rir.taps.copy()
    late = rir.taps.copy()
    if split < rir.taps.shape[1]:
        early[:, split:] = 0.0
    late[:, :max(split, 0)] = 0.0
    if split >= rir.taps.shape[1]:
        late[:] = 0.0
    return Rir(early), Rir(late)


def apply_loudspeaker_nonlinearity(x, clip_level):
    """Hard-clip a waveform at +/- clip_level (None disables clipping)."""
    x = np.asarray(x, dtype=np.float64)
    if clip_level is None or not np.isfinite(clip_level):
        return x.copy()
    if clip_level <= 0:
        raise InvalidInput("clip_level must be positive")
    return np.clip(x, -clip_level, clip_level)


def _convolve_multichannel(signal, taps, offset=0, total=None):
    """Convolve a [T] signal with [M, L] taps -> [total, M].

    The result is placed at ``offset``; samples before it stay exactly
    zero (a causal render of a source that starts there).
    """
    total = total if total is not None else signal.shape[0]
    out = np.zeros((total, taps.shape[0]))
    span = min(total - offset, signal.shape[0] + taps.shape[1] - 1)
    for m in range(taps.shape[0]):
        out[offset:offset + span, m] = fftconvolve(signal, taps[m],
                                                   mode="full")[:span]
    return out


def synth_diffuse_noise(room, noise_src, t_e, source_ids=_NOISE_SRCS):
    """Approximate diffuse noise: convolve with averaged late RIR tails.

    Two distinct RIRs are generated from the room; the per-channel
    average of their late tails decorrelates the channels.
    """
    noise_src = np.asarray(noise_src, dtype=np.float64)
    tails = []
    for sid in source_ids:
        rir = synth_rir(room, sid)
        _, late = split_rir(rir, t_e, room.sample_rate)
        tails.append(late.taps)
    avg_tail = 0.5 * (tails[0] + tails[1])
    return _convolve_multichannel(noise_src, avg_tail)


def _energy(sig, start, end):
    return float(np.sum(sig[start:end] ** 2))


def render_scene(cfg, u_src, x_src, noise_src):
    """Render a four-period scene from raw source material.

    Components are scaled so the measured SER over double-talk and SNR
    over the whole utterance match the configuration, then summed into
    the mixture.
    """
    fs = cfg.sample_rate
    p_len = int(round(cfg.period_len * fs))
    total = 4 * p_len
    u_src = np.asarray(u_src, dtype=np.float64)
    x_src = np.asarray(x_src, dtype=np.float64)
    noise_src = np.asarray(noise_src, dtype=np.float64)
    if u_src.shape[0] < 2 * p_len or x_src.shape[0] < 2 * p_len:
        raise InvalidInput("speech sources must cover two periods")
    if noise_src.shape[0] < total:
        raise InvalidInput("noise source must cover the whole utterance")

    # period layout: noise only / near-end / double talk / far-end
    periods = [(i * p_len, (i + 1) * p_len, PERIOD_LABELS[i]) for i in range(4)]
    u_seg = u_src[:2 * p_len]
    x_seg = x_src[:2 * p_len]
    u_full = np.zeros(total)
    u_full[p_len:3 * p_len] = u_seg
    x_full = np.zeros(total)
    x_full[2 * p_len:4 * p_len] = x_seg

    a_s = synth_rir(cfg.room, _NEAR_END_SRC)
    a_y = synth_rir(cfg.room, _ECHO_SRC, length=cfg.room.echo_rir_length)
    early, late = split_rir(a_s, cfg.t_e, fs)
    # render each source from its activity onset so silence stays exact
    s_e = _convolve_multichannel(u_seg, early.taps, offset=p_len, total=total)
    s_l = _convolve_multichannel(u_seg, late.taps, offset=p_len, total=total)

    # clipping feeds the acoustic path: clip, then convolve
    y = _convolve_multichannel(
        apply_loudspeaker_nonlinearity(x_seg, cfg.clip_level), a_y.taps,
        offset=2 * p_len, total=total,
    )
    b = synth_diffuse_noise(cfg.room, noise_src[:total], cfg.t_e)

    dt_start, dt_end = 2 * p_len, 3 * p_len
    if cfg.ser_db is not None:
        e_y = _energy(y, dt_start, dt_end)
        if e_y > 0:
            target = _energy(s_e, dt_start, dt_end) / 10.0 ** (cfg.ser_db / 10.0)
            y *= np.sqrt(target / e_y)
    if cfg.snr_db is not None:
        e_b = _energy(b, 0, total)
        if e_b > 0:
            target = _energy(s_e, 0, total) / 10.0 ** (cfg.snr_db / 10.0)
            b *= np.sqrt(target / e_b)

    d = s_e + s_l + y + b
    return Scene(
        x=x_full, u=u_full, s_e=s_e, s_l=s_l, y=y, b=b, d=d,
        periods=periods, sample_rate=fs, t_e=cfg.t_e, config=cfg,
    )


def measured_ser_db(scene):
    """SER = 10 log10(sum ||s_e||^2 / sum ||y||^2) over double-talk."""
    (start, end, _) = scene.periods_labeled(DOUBLE_TALK)[0]
    return 10.0 * np.log10(
        _energy(scene.s_e, start, end) / _energy(scene.y, start, end)
    )


def measured_snr_db(scene):
    """SNR = 10 log10(sum ||s_e||^2 / sum ||b||^2) over the utterance."""
    return 10.0 * np.log10(
        float(np.sum(scene.s_e ** 2)) / float(np.sum(scene.b ** 2))
    )


def save_scene(scene, directory):
    """Write the scene wavs plus manifest.json into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fs = scene.sample_rate
    for name in COMPONENT_WAVS:
        write_wav(directory / f"{name}.wav", getattr(scene, name), fs)
    cfg = scene.config
    manifest = {
        "sample_rate": fs,
        "M": scene.num_channels,
        "ser_db": cfg.ser_db if cfg else None,
        "snr_db": cfg.snr_db if cfg else None,
        "t_e_ms": scene.t_e * 1000.0,
        "seed": cfg.seed if cfg else None,
        "periods": [
            {"start_ms": s * 1000.0 / fs, "end_ms": e * 1000.0 / fs, "label": lab}
            for (s, e, lab) in scene.periods
        ],
    }
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_scene(directory):
    """Read a scene directory written by save_scene."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise InvalidInput(f"{directory}: missing manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    fs = int(manifest["sample_rate"])

    waves = {}
    for name in COMPONENT_WAVS:
        path = directory / f"{name}.wav"
        if not path.exists():
            raise InvalidInput(f"{directory}: missing {name}.wav")
        waves[name], _ = read_wav(path, expected_rate=fs)
    periods = [
        (int(round(p["start_ms"] * fs / 1000.0)),
         int(round(p["end_ms"] * fs / 1000.0)),
         p["label"])
        for p in manifest["periods"]
    ]
    return Scene(
        x=waves["x"][:, 0], u=waves["u"][:, 0],
        s_e=waves["s_e"], s_l=waves["s_l"], y=waves["y"], b=waves["b"],
        d=waves["d"], periods=periods, sample_rate=fs,
        t_e=manifest["t_e_ms"] / 1000.0,
    )
