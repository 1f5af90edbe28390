"""Full enhancement pipelines.

Implements the joint block-coordinate-ascent algorithm plus the
Cascade, NN-parallel and NN-cascade baselines.  All pipelines take the
mixture and far-end waveforms, estimate the echo cancellation filter H,
the dereverberation filter G and a multichannel Wiener postfilter, and
return the early near-end estimate.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .adaptive import AecConfig, aec_init
from .errors import InvalidInput, NumericalFailure
from .gaussian import (
    SOURCES,
    SourceStats,
    estimate_source,
    log_likelihood,
    mixture_covariance,
    posterior_moment,
    update_scm,
    wiener_filter,
)
from .linalg import herm_inv
from .linear import (
    DereverbFilter,
    apply_dereverb,
    apply_echo_canceller,
    dereverberated_farend_taps,
    dereverberated_mixture,
    plain_farend_taps,
    update_dereverb_filter,
    update_echo_filter,
    wpe_dereverb_filter,
)
from .spectral import (
    LstmPsdProvider,
    OraclePsdProvider,
    UnconstrainedPsdProvider,
)
from .stft import WindowSpec, istft, stft

TOPOLOGIES = ("joint", "parallel", "cascade", "nn_cascade")

ECHO_ONLY_SOURCES = ("s", "z_r", "b_r")


@dataclass(frozen=True)
class PipelineConfig:
    n_echo_taps: int = 10       # K
    n_reverb_taps: int = 10     # L
    delay: int = 3              # frame delay of the dereverb filter
    n_iters: int = 3            # I
    window: WindowSpec = field(default_factory=WindowSpec)
    eps: float = 1e-5
    psd_provider: object = "oracle"
    wpe_iters: int = 3
    aec: AecConfig = field(default_factory=AecConfig)

    def __post_init__(self):
        if self.n_iters < 1:
            raise InvalidInput("need at least one iteration")


@dataclass
class PipelineOutput:
    s_e_hat: np.ndarray          # waveform [T, M]
    s_e_hat_spec: np.ndarray     # [N, F, M]
    ecf: object
    drf: object
    wiener: np.ndarray           # final W_se [N, F, M, M]
    loglik: list
    e: np.ndarray
    r: np.ndarray
    topology: str
    timings: dict = field(default_factory=dict)


@dataclass
class BcaState:
    """Snapshot of the filtered signals handed to PSD providers."""

    d: np.ndarray
    x: np.ndarray
    ecf: object
    drf: object
    y_hat: np.ndarray
    e: np.ndarray
    e_l_hat: np.ndarray
    r: np.ndarray
    stats: object = None
    post_moments: object = None


def _filter_signals(d, x, ecf, drf, topology):
    """Run the linear stage; the parallel topology dereverberates d."""
    e, y_hat = apply_echo_canceller(d, x, ecf)
    if topology == "parallel":
        e_l_hat = d - dereverberated_mixture(d, drf)
        r = e - e_l_hat
    else:
        r, e_l_hat = apply_dereverb(e, drf)
    return y_hat, e, e_l_hat, r


def _check_finite(arr, stage):
    if not np.all(np.isfinite(arr)):
        raise NumericalFailure(f"non-finite values after {stage}", stage=stage)


def _resolve_provider(cfg, scene, source_set):
    kind = cfg.psd_provider
    if callable(kind):
        return kind
    if kind == "oracle":
        if scene is None:
            raise InvalidInput("the oracle PSD provider requires the scene")
        return OraclePsdProvider(scene, cfg.window, source_set)
    if kind == "unconstrained":
        names = ECHO_ONLY_SOURCES if source_set == "echo_only" else SOURCES
        return UnconstrainedPsdProvider(names, cfg.eps)
    if isinstance(kind, str) and kind.startswith("lstm:"):
        if source_set == "echo_only":
            raise InvalidInput(
                "the LSTM provider only covers the four-source model; use "
                "oracle or unconstrained PSDs for the NN-cascade echo stage"
            )
        return LstmPsdProvider(kind[len("lstm:"):], cfg.eps)
    raise InvalidInput(f"unknown PSD provider {kind!r}")


def _bca_loop(d, x, cfg, provider, ecf, drf, topology, names, target):
    """Block-coordinate ascent over H, G and the source statistics.

    Runs cfg.n_iters full iterations plus one more pass over the filter
    updates to derive the final filters; the target estimate comes from
    the Wiener filter of that final pass.
    """
    n_ch = d.shape[2]
    y_hat, e, e_l_hat, r = _filter_signals(d, x, ecf, drf, topology)
    state = BcaState(d, x, ecf, drf, y_hat, e, e_l_hat, r)
    stats = SourceStats.with_identity_scms(provider(state, 0), n_ch)
    trace = []

    for it in range(cfg.n_iters + 1):
        r_dd = mixture_covariance(stats, cfg.eps)
        rinv = herm_inv(r_dd)
        entry = {"start": log_likelihood(r, r_dd, rinv)}

        # maximize over the echo cancellation filter
        if topology == "parallel":
            x_taps = plain_farend_taps(x, n_ch, cfg.n_echo_taps)
        else:
            x_taps = dereverberated_farend_taps(x, drf, cfg.n_echo_taps)
        r_d = dereverberated_mixture(d, drf)
        ecf = update_echo_filter(x_taps, r_d, r_dd, cfg.eps, rinv)
        _check_finite(ecf.h, "update_H")
        del x_taps
        y_hat, e, e_l_hat, r = _filter_signals(d, x, ecf, drf, topology)
        entry["after_H"] = log_likelihood(r, r_dd, rinv)

        # maximize over the dereverberation filter
        if cfg.n_reverb_taps > 0:
            tap_source = d if topology == "parallel" else e
            drf = update_dereverb_filter(
                tap_source, e, r_dd, cfg.n_reverb_taps, cfg.delay, cfg.eps, rinv
            )
            _check_finite(drf.g, "update_G")
            y_hat, e, e_l_hat, r = _filter_signals(d, x, ecf, drf, topology)
        entry["after_G"] = log_likelihood(r, r_dd, rinv)
        trace.append(entry)

        state = BcaState(d, x, ecf, drf, y_hat, e, e_l_hat, r, stats)
        if it == cfg.n_iters:
            # final pass: derive the postfilter, no further updates
            w_target = wiener_filter(stats, r_dd, target, rinv)
            s_hat = estimate_source(w_target, r)
            _check_finite(s_hat, "wiener")
            return s_hat, w_target, ecf, drf, e, r, trace

        # spatial EM step (E-step + weighted M-step on the SCMs)
        post = {}
        for name in names:
            w_c = wiener_filter(stats, r_dd, name, rinv)
            c_hat = estimate_source(w_c, r)
            post[name] = posterior_moment(
                c_hat, w_c, stats.psd[name], stats.scm[name]
            )
        scm = {
            name: update_scm(post[name], stats.psd[name], stats.psd[name],
                             cfg.eps)
            for name in names
        }
        stats = SourceStats(stats.psd, scm)

        # spectral update
        state = BcaState(d, x, ecf, drf, y_hat, e, e_l_hat, r, stats, post)
        psd = provider(state, it + 1)
        for name in names:
            _check_finite(psd[name], "spectral")
        stats = SourceStats(psd, stats.scm)


def _postfilter_em(d, x, cfg, provider, ecf, drf, topology, names, target):
    """EM for the Wiener postfilter only; the linear filters stay fixed."""
    n_ch = d.shape[2]
    y_hat, e, e_l_hat, r = _filter_signals(d, x, ecf, drf, topology)
    state = BcaState(d, x, ecf, drf, y_hat, e, e_l_hat, r)
    stats = SourceStats.with_identity_scms(provider(state, 0), n_ch)
    trace = []

    for it in range(cfg.n_iters):
        r_dd = mixture_covariance(stats, cfg.eps)
        rinv = herm_inv(r_dd)
        trace.append({"start": log_likelihood(r, r_dd, rinv)})
        post = {}
        for name in names:
            w_c = wiener_filter(stats, r_dd, name, rinv)
            c_hat = estimate_source(w_c, r)
            post[name] = posterior_moment(
                c_hat, w_c, stats.psd[name], stats.scm[name]
            )
        scm = {
            name: update_scm(post[name], stats.psd[name], stats.psd[name],
                             cfg.eps)
            for name in names
        }
        stats = SourceStats(stats.psd, scm)
        state = BcaState(d, x, ecf, drf, y_hat, e, e_l_hat, r, stats, post)
        psd = provider(state, it + 1)
        for name in names:
            _check_finite(psd[name], "spectral")
        stats = SourceStats(psd, stats.scm)

    r_dd = mixture_covariance(stats, cfg.eps)
    rinv = herm_inv(r_dd)
    trace.append({"start": log_likelihood(r, r_dd, rinv)})
    w_target = wiener_filter(stats, r_dd, target, rinv)
    s_hat = estimate_source(w_target, r)
    _check_finite(s_hat, "wiener")
    return s_hat, w_target, ecf, drf, e, r, trace


def _prepare(d, x, cfg):
    d = np.asarray(d, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if d.ndim == 1:
        d = d[:, None]
    if x.ndim == 2:
        x = x[:, 0]
    if d.shape[0] != x.shape[0]:
        raise InvalidInput("mixture and far-end lengths differ")
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(x))):
        raise InvalidInput("input waveforms contain non-finite samples")
    d_stft = stft(d, cfg.window)
    x_stft = stft(x, cfg.window)
    return d, x, d_stft, x_stft.data[:, :, 0]


def _output(s_hat_spec, d_stft, parts, topology, timings):
    w_target, ecf, drf, e, r, trace = parts
    spec = d_stft
    wave = istft(
        type(spec)(s_hat_spec, spec.sample_rate, spec.window, spec.n_samples)
    )
    return PipelineOutput(
        s_e_hat=wave, s_e_hat_spec=s_hat_spec, ecf=ecf, drf=drf,
        wiener=w_target, loglik=trace, e=e, r=r, topology=topology,
        timings=timings,
    )


def run_nn_joint(d, x, cfg=None, scene=None, h0=None):
    """Joint NN-supported BCA pipeline (the proposed approach)."""
    cfg = cfg or PipelineConfig()
    d, x, d_stft, x_spec = _prepare(d, x, cfg)
    provider = _resolve_provider(cfg, scene, "joint")
    timings = {}

    t0 = time.perf_counter()
    ecf = h0 if h0 is not None else aec_init(d, x, cfg.aec)
    _check_finite(ecf.h, "aec_init")
    e0, _ = apply_echo_canceller(d_stft.data, x_spec, ecf)
    drf = wpe_dereverb_filter(
        e0, cfg.n_reverb_taps, cfg.delay, cfg.wpe_iters, cfg.eps
    )
    _check_finite(drf.g, "wpe_init")
    timings["init"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    s_hat, *parts = _bca_loop(
        d_stft.data, x_spec, cfg, provider, ecf, drf, "joint", SOURCES, "s_e"
    )
    timings["bca"] = time.perf_counter() - t0
    return _output(s_hat, d_stft, parts, "joint", timings)


def run_nn_parallel(d, x, cfg=None, scene=None, h0=None):
    """BCA variant applying H and G in parallel on the mixture."""
    cfg = cfg or PipelineConfig()
    d, x, d_stft, x_spec = _prepare(d, x, cfg)
    provider = _resolve_provider(cfg, scene, "parallel")
    timings = {}

    t0 = time.perf_counter()
    ecf = h0 if h0 is not None else aec_init(d, x, cfg.aec)
    _check_finite(ecf.h, "aec_init")
    drf = wpe_dereverb_filter(
        d_stft.data, cfg.n_reverb_taps, cfg.delay, cfg.wpe_iters, cfg.eps
    )
    _check_finite(drf.g, "wpe_init")
    timings["init"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    s_hat, *parts = _bca_loop(
        d_stft.data, x_spec, cfg, provider, ecf, drf, "parallel", SOURCES, "s_e"
    )
    timings["bca"] = time.perf_counter() - t0
    return _output(s_hat, d_stft, parts, "parallel", timings)


def run_cascade(d, x, cfg=None, scene=None, h0=None):
    """Cascade baseline: fixed H0 and G0, EM for the postfilter only."""
    cfg = cfg or PipelineConfig()
    d, x, d_stft, x_spec = _prepare(d, x, cfg)
    provider = _resolve_provider(cfg, scene, "joint")
    timings = {}

    t0 = time.perf_counter()
    ecf = h0 if h0 is not None else aec_init(d, x, cfg.aec)
    _check_finite(ecf.h, "aec_init")
    e0, _ = apply_echo_canceller(d_stft.data, x_spec, ecf)
    drf = wpe_dereverb_filter(
        e0, cfg.n_reverb_taps, cfg.delay, cfg.wpe_iters, cfg.eps
    )
    _check_finite(drf.g, "wpe_init")
    timings["init"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    s_hat, *parts = _postfilter_em(
        d_stft.data, x_spec, cfg, provider, ecf, drf, "joint", SOURCES, "s_e"
    )
    timings["em"] = time.perf_counter() - t0
    return _output(s_hat, d_stft, parts, "cascade", timings)


def run_nn_cascade(d, x, cfg=None, scene=None, h0=None):
    """Cascade with an NN-supported echo stage.

    Stage 1 fixes H with an echo-only BCA variant, stage 2 fixes G with
    WPE on the echo-cancelled signal, stage 3 runs the postfilter EM.
    """
    cfg = cfg or PipelineConfig()
    d, x, d_stft, x_spec = _prepare(d, x, cfg)
    timings = {}

    t0 = time.perf_counter()
    ecf0 = h0 if h0 is not None else aec_init(d, x, cfg.aec)
    _check_finite(ecf0.h, "aec_init")
    timings["init"] = time.perf_counter() - t0

    # stage 1: echo-only BCA (no dereverberation, 3-source model)
    t0 = time.perf_counter()
    echo_cfg = replace(cfg, n_reverb_taps=0)
    provider1 = _resolve_provider(echo_cfg, scene, "echo_only")
    drf0 = DereverbFilter.zeros(
        cfg.window.num_bins, 0, d.shape[1], delay=cfg.delay
    )
    _, _, ecf, _, _, _, trace1 = _bca_loop(
        d_stft.data, x_spec, echo_cfg, provider1, ecf0, drf0, "joint",
        ECHO_ONLY_SOURCES, "s",
    )
    timings["echo_stage"] = time.perf_counter() - t0

    # stage 2: WPE dereverberation on the echo-cancelled signal
    t0 = time.perf_counter()
    e1, _ = apply_echo_canceller(d_stft.data, x_spec, ecf)
    drf = wpe_dereverb_filter(
        e1, cfg.n_reverb_taps, cfg.delay, cfg.wpe_iters, cfg.eps
    )
    timings["wpe_stage"] = time.perf_counter() - t0

    # stage 3: Wiener postfilter EM with both filters fixed
    t0 = time.perf_counter()
    provider3 = _resolve_provider(cfg, scene, "joint")
    s_hat, *parts = _postfilter_em(
        d_stft.data, x_spec, cfg, provider3, ecf, drf, "joint", SOURCES, "s_e"
    )
    timings["em"] = time.perf_counter() - t0
    out = _output(s_hat, d_stft, parts, "nn_cascade", timings)
    out.loglik = trace1 + out.loglik
    return out


RUNNERS = {
    "joint": run_nn_joint,
    "parallel": run_nn_parallel,
    "cascade": run_cascade,
    "nn_cascade": run_nn_cascade,
}


def run_pipeline(topology, d, x, cfg=None, scene=None, h0=None):
    if topology not in RUNNERS:
        raise InvalidInput(f"unknown topology {topology!r}")
    return RUNNERS[topology](d, x, cfg=cfg, scene=scene, h0=h0)


def enhance_with_filters(d, x, ecf, drf, wiener, topology="joint"):
    """Apply already-estimated filters to spectrogram inputs.

    The full map is jointly linear in (d, x), which makes the
    superposition of component inputs testable.
    """
    _, _, _, r = _filter_signals(d, x, ecf, drf, topology)
    return estimate_source(wiener, r)
