import numpy as np
import pytest

from evtrainer.nnjt import save_archive


def write_toy_dataset(root, n_utterances=32, n_frames=96, f_bins=4, seed=0):
    """Synthetic learnable dataset in the exchange layout.

    Targets are a fixed nonnegative linear readout of the features,
    scaled so a small LSTM reaches their range within a few epochs of
    Adam at its default step size.
    """
    rng = np.random.default_rng(seed)
    d_type1, d_type2 = 6 * f_bins, 4 * f_bins
    d_out = 4 * f_bins
    readout = rng.standard_normal((d_type1 + d_type2, d_out))
    readout /= np.linalg.norm(readout, axis=0, keepdims=True)
    for i in range(n_utterances):
        utt = root / f"utt_{i:03d}"
        utt.mkdir(parents=True)
        base = rng.uniform(0.0, 1.0, (n_frames, d_type1 + d_type2))
        # smooth over time like spectral envelopes
        for _ in range(2):
            base[1:] = 0.5 * (base[1:] + base[:-1])
        feats = base.astype(np.float32)
        # positive targets: common scale plus a readout-driven variation
        variation = (base - base.mean(axis=0)) @ readout
        variation /= max(variation.std(), 1e-9)
        targets = 0.2 * (1.0 + 0.3 * np.clip(variation, -2.0, 2.0))
        save_archive(utt / "features.nnjt", {
            "type1": feats[:, :d_type1], "type2": feats[:, d_type1:],
        })
        save_archive(utt / "targets.nnjt", {"sqrt_psd": targets.astype(np.float32)})
    return root


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("toyset")
    return write_toy_dataset(root)
