"""Spectral models of the four sources.

Provides oracle ground-truth PSDs, the unconstrained-ML fallback, LSTM
inference from an exported weight archive, the NN feature extractors
and the iterative ground-truth target pipeline used to produce training
targets.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .gaussian import (
    SOURCES,
    SourceStats,
    estimate_source,
    mixture_covariance,
    posterior_moment,
    unconstrained_psd,
    update_scm,
    wiener_filter,
)
from .linear import (
    DereverbFilter,
    EchoFilter,
    apply_dereverb,
    apply_echo_canceller,
    dereverb_estimate,
    dereverberated_farend_taps,
    dereverberated_mixture,
    update_dereverb_filter,
    update_echo_filter,
)
from .nnjt import load_archive
from .stft import stft

GATE_NAMES = ("W_i", "W_f", "W_c", "W_o", "U_i", "U_f", "U_c", "U_o",
              "b_i", "b_f", "b_c", "b_o")


def oracle_psds(components):
    """Ground-truth PSDs v_c(n,f) = ||c(n,f)||^2 / M.

    Parameters
    ----------
    components : dict of name -> array [N, F, M]

    Returns
    -------
    dict of name -> array [N, F]
    """
    return {
        name: np.sum(np.abs(c) ** 2, axis=2) / c.shape[2]
        for name, c in components.items()
    }


def channel_collapsed_magnitude(spec):
    """|c~(n,f)| = sqrt(||c(n,f)||^2 / M) for a [N, F, M] spectrogram."""
    return np.sqrt(np.sum(np.abs(spec) ** 2, axis=2) / spec.shape[2])


def type_i_features(x, d, y_hat, e, e_l_hat, r):
    """Magnitude-spectra inputs, concatenated to [N, 6F].

    Order: |x|, |d~|, |y~|, |e~|, |e_l~|, |r~| where the multichannel
    signals are collapsed to a single channel by RMS over microphones.
    """
    mats = [np.abs(x)] + [
        channel_collapsed_magnitude(s) for s in (d, y_hat, e, e_l_hat, r)
    ]
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise InvalidInput("type-I feature inputs are misaligned")
    return np.concatenate(mats, axis=1)


def type_ii_features(v_unc):
    """sqrt of the unconstrained PSDs, concatenated in source order [N, 4F]."""
    return np.concatenate([np.sqrt(v_unc[c]) for c in SOURCES], axis=1)


@dataclass
class LstmWeights:
    """Two stacked LSTM layers plus a ReLU output projection.

    Per layer: input kernels W_* [D_in, H], recurrent kernels U_*
    [H, H] and biases b_* [H] for the input/forget/cell/output gates.
    """

    layers: list
    head_w: np.ndarray
    head_b: np.ndarray

    @property
    def input_size(self):
        return self.layers[0]["W_i"].shape[0]

    @property
    def output_size(self):
        return self.head_w.shape[1]

    @property
    def hidden_size(self):
        return self.layers[0]["W_i"].shape[1]

    @classmethod
    def from_archive(cls, tensors):
        layers = []
        for idx in (1, 2):
            prefix = f"lstm{idx}."
            layer = {}
            for gate in GATE_NAMES:
                key = prefix + gate
                if key not in tensors:
                    raise InvalidInput(f"weight archive is missing {key}")
                layer[gate] = np.asarray(tensors[key], dtype=np.float32)
            layers.append(layer)
        if "head.W" not in tensors or "head.b" not in tensors:
            raise InvalidInput("weight archive is missing the output head")
        return cls(layers,
                   np.asarray(tensors["head.W"], dtype=np.float32),
                   np.asarray(tensors["head.b"], dtype=np.float32))

    def to_archive(self):
        tensors = {}
        for idx, layer in enumerate(self.layers, start=1):
            for gate in GATE_NAMES:
                tensors[f"lstm{idx}.{gate}"] = layer[gate]
        tensors["head.W"] = self.head_w
        tensors["head.b"] = self.head_b
        return tensors

    @classmethod
    def random(cls, input_size, hidden_size, output_size, seed=0, scale=0.1):
        """Small random weights for tests and toy runs."""
        rng = np.random.default_rng(seed)

        def mk(shape):
            return (scale * rng.standard_normal(shape)).astype(np.float32)

        layers = []
        for d_in in (input_size, hidden_size):
            layer = {}
            for gate in ("i", "f", "c", "o"):
                layer[f"W_{gate}"] = mk((d_in, hidden_size))
                layer[f"U_{gate}"] = mk((hidden_size, hidden_size))
                layer[f"b_{gate}"] = mk(hidden_size)
            layers.append(layer)
        return cls(layers, mk((hidden_size, output_size)), mk(output_size))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_forward(weights, features):
    """Stateful full-utterance LSTM inference.

    Standard sigmoid-gate / tanh-candidate cells, two layers, followed
    by a dense ReLU head.  Returns the nonnegative sqrt-PSD outputs
    [N, 4F]; square them to obtain PSDs.
    """
    feats = np.asarray(features, dtype=np.float32)
    if feats.ndim != 2 or feats.shape[1] != weights.input_size:
        raise InvalidInput(
            f"feature size {feats.shape} does not match NN input "
            f"size {weights.input_size}"
        )
    n_frames = feats.shape[0]
    hidden = weights.hidden_size

    current = feats
    for layer in weights.layers:
        h = np.zeros(hidden, dtype=np.float32)
        c = np.zeros(hidden, dtype=np.float32)
        out = np.empty((n_frames, hidden), dtype=np.float32)
        for n in range(n_frames):
            xt = current[n]
            gi = _sigmoid(xt @ layer["W_i"] + h @ layer["U_i"] + layer["b_i"])
            gf = _sigmoid(xt @ layer["W_f"] + h @ layer["U_f"] + layer["b_f"])
            gc = np.tanh(xt @ layer["W_c"] + h @ layer["U_c"] + layer["b_c"])
            go = _sigmoid(xt @ layer["W_o"] + h @ layer["U_o"] + layer["b_o"])
            c = gf * c + gi * gc
            h = go * np.tanh(c)
            out[n] = h
        current = out
    return np.maximum(current @ weights.head_w + weights.head_b, 0.0)


def kl_divergence(target_sqrt, pred_sqrt, floor=1e-12):
    """Kullback-Leibler training loss between sqrt-PSD spectra.

    (1/size) * sum(t log(t/p) - t + p) with natural log, the prediction
    floored at 1e-12 and 0 log 0 taken as 0.
    """
    t = np.asarray(target_sqrt, dtype=np.float64)
    p = np.maximum(np.asarray(pred_sqrt, dtype=np.float64), floor)
    logterm = np.zeros_like(t)
    pos = t > 0
    logterm[pos] = t[pos] * np.log(t[pos] / p[pos])
    return float(np.sum(logterm - t + p) / t.size)


# ---------------------------------------------------------------------------
# scene spectra and oracle latent components


def scene_spectra(scene, window):
    """STFT of every scene component, plus the reverberant near-end s."""
    fs = scene.sample_rate
    spectra = {
        "d": stft(scene.d, window, fs).data,
        "x": stft(scene.x, window, fs).data[:, :, 0],
        "s_e": stft(scene.s_e, window, fs).data,
        "s_l": stft(scene.s_l, window, fs).data,
        "y": stft(scene.y, window, fs).data,
        "b": stft(scene.b, window, fs).data,
    }
    spectra["s"] = spectra["s_e"] + spectra["s_l"]
    return spectra


def oracle_latents(spectra, ecf, drf, topology="joint"):
    """Ground-truth latent residual components under the current filters.

    For the joint topology the dereverberation filter acts on the
    echo-cancelled components (s, z, b); for the parallel topology it
    acts on the raw mixture components (s, y, b).
    """
    _, y_hat = apply_echo_canceller(spectra["d"], spectra["x"], ecf)
    z = spectra["y"] - y_hat
    s_r = spectra["s_l"] - dereverb_estimate(spectra["s"], drf)
    if topology == "parallel":
        z_r = z - dereverb_estimate(spectra["y"], drf)
    else:
        z_r = z - dereverb_estimate(z, drf)
    b_r = spectra["b"] - dereverb_estimate(spectra["b"], drf)
    return {"s_e": spectra["s_e"], "s_r": s_r, "z_r": z_r, "b_r": b_r}


def oracle_latents_echo_only(spectra, ecf):
    """Latents of the echo-only variant: full near-end, residual echo, noise."""
    _, y_hat = apply_echo_canceller(spectra["d"], spectra["x"], ecf)
    return {"s": spectra["s"], "z_r": spectra["y"] - y_hat, "b_r": spectra["b"]}


# ---------------------------------------------------------------------------
# ground-truth target pipeline (training targets)


@dataclass
class GroundTruthResult:
    """Output of the iterative ground-truth PSD pipeline."""

    psd: dict
    latents: dict
    ecf: EchoFilter
    drf: DereverbFilter
    stats: SourceStats
    z_r_energy: list
    signals: dict = field(default_factory=dict)


def ground_truth_target_pipeline(scene, window, n_echo_taps=10,
                                 n_reverb_taps=10, delay=3, n_iters=3,
                                 eps=1e-5):
    """Derive ground-truth PSD targets by iterating the filter updates.

    The linear filters start from zero, so the latent residuals start
    at (s_l, y, b) exactly.  Each iteration refines the echo and
    dereverberation filters against the current oracle statistics,
    refilters the ground-truth components, and replaces the spectral
    update by the oracle PSDs while the SCMs follow the exact
    (unweighted) EM update.
    """
    spectra = scene_spectra(scene, window)
    d, x = spectra["d"], spectra["x"]
    n_frames, n_bins, n_ch = d.shape

    ecf = EchoFilter.zeros(n_bins, n_echo_taps, n_ch)
    drf = DereverbFilter.zeros(n_bins, n_reverb_taps, n_ch, delay=delay)
    latents = oracle_latents(spectra, ecf, drf)
    stats = SourceStats.with_identity_scms(oracle_psds(latents), n_ch)
    z_r_energy = [float(np.sum(np.abs(latents["z_r"]) ** 2))]

    for _ in range(n_iters):
        r_dd = mixture_covariance(stats, eps)
        x_taps = dereverberated_farend_taps(x, drf, n_echo_taps)
        r_d = dereverberated_mixture(d, drf)
        ecf = update_echo_filter(x_taps, r_d, r_dd, eps)
        e, _ = apply_echo_canceller(d, x, ecf)
        drf = update_dereverb_filter(e, e, r_dd, n_reverb_taps, delay, eps)

        latents = oracle_latents(spectra, ecf, drf)
        z_r_energy.append(float(np.sum(np.abs(latents["z_r"]) ** 2)))
        r, _ = apply_dereverb(e, drf)

        # oracle EM: exact (unweighted) SCM update, PSDs from the latents
        ones = np.ones((n_frames, n_bins))
        post = {}
        for name in SOURCES:
            w_c = wiener_filter(stats, r_dd, name)
            c_hat = estimate_source(w_c, r)
            post[name] = posterior_moment(
                c_hat, w_c, stats.psd[name], stats.scm[name]
            )
        for name in SOURCES:
            stats.scm[name] = update_scm(post[name], stats.psd[name], ones, eps)
        stats = SourceStats(oracle_psds(latents), stats.scm)

    e, y_hat = apply_echo_canceller(d, x, ecf)
    r, e_l_hat = apply_dereverb(e, drf)
    post = {}
    v_unc = {}
    r_dd = mixture_covariance(stats, eps)
    for name in SOURCES:
        w_c = wiener_filter(stats, r_dd, name)
        c_hat = estimate_source(w_c, r)
        post[name] = posterior_moment(c_hat, w_c, stats.psd[name], stats.scm[name])
        v_unc[name] = unconstrained_psd(stats.scm[name], post[name], eps)
    signals = {
        "x": x, "d": d, "y_hat": y_hat, "e": e, "e_l_hat": e_l_hat, "r": r,
        "v_unc": v_unc,
    }
    return GroundTruthResult(
        psd=stats.psd, latents=latents, ecf=ecf, drf=drf, stats=stats,
        z_r_energy=z_r_energy, signals=signals,
    )


# ---------------------------------------------------------------------------
# PSD providers


class OraclePsdProvider:
    """PSDs from the scene's ground-truth components under current filters."""

    def __init__(self, scene, window, source_set="joint"):
        self.spectra = scene_spectra(scene, window)
        self.source_set = source_set

    def __call__(self, state, iteration):
        if self.source_set == "echo_only":
            latents = oracle_latents_echo_only(self.spectra, state.ecf)
        else:
            latents = oracle_latents(
                self.spectra, state.ecf, state.drf, topology=self.source_set
            )
        return oracle_psds(latents)


class UnconstrainedPsdProvider:
    """Spectral-model-free PSDs from the unconstrained ML estimate."""

    def __init__(self, names=SOURCES, eps=1e-5):
        self.names = tuple(names)
        self.eps = eps

    def __call__(self, state, iteration):
        if state.post_moments is None:
            # nothing estimated yet: split the residual power evenly
            share = (
                np.sum(np.abs(state.r) ** 2, axis=2)
                / (state.r.shape[2] * len(self.names))
            )
            return {name: share.copy() for name in self.names}
        return {
            name: unconstrained_psd(
                state.stats.scm[name], state.post_moments[name], self.eps
            )
            for name in self.names
        }


class LstmPsdProvider:
    """PSDs from pretrained LSTMs (NN_0 at init, NN_i afterwards).

    ``path`` points at a JSON manifest {"nn0": ..., "nn1": ...,
    "nn2": ...} with archive paths (relative entries resolve against
    the manifest), or at a directory containing nn0.nnjt, nn1.nnjt,
    ...  Iterations without a dedicated entry reuse the highest
    available NN_i.
    """

    def __init__(self, path, eps=1e-5):
        self.eps = eps
        self._weights = {}
        path = Path(path)
        if path.is_dir():
            for child in sorted(path.glob("nn*.nnjt")):
                idx = int(child.stem[2:])
                self._weights[idx] = LstmWeights.from_archive(load_archive(child))
        elif path.suffix == ".json":
            with open(path) as fh:
                manifest = json.load(fh)
            for key, value in manifest.items():
                idx = int(key[2:])
                target = Path(value)
                if not target.is_absolute():
                    target = path.parent / target
                self._weights[idx] = LstmWeights.from_archive(load_archive(target))
        else:
            raise InvalidInput(
                f"{path}: expected a weight directory or JSON manifest"
            )
        if 0 not in self._weights or 1 not in self._weights:
            raise InvalidInput("LSTM provider needs at least nn0 and nn1 weights")

    def _select(self, iteration):
        candidates = [idx for idx in self._weights if idx <= iteration]
        return self._weights[max(candidates)]

    def __call__(self, state, iteration):
        feats = type_i_features(
            state.x, state.d, state.y_hat, state.e, state.e_l_hat, state.r
        )
        if iteration > 0:
            v_unc = {
                name: unconstrained_psd(
                    state.stats.scm[name], state.post_moments[name], self.eps
                )
                for name in SOURCES
            }
            feats = np.concatenate([feats, type_ii_features(v_unc)], axis=1)
        weights = self._select(iteration)
        sqrt_psd = lstm_forward(weights, feats)
        n_bins = state.d.shape[1]
        return {
            name: np.asarray(sqrt_psd[:, i * n_bins:(i + 1) * n_bins],
                             dtype=np.float64) ** 2
            for i, name in enumerate(SOURCES)
        }
