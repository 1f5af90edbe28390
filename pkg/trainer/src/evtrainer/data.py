"""Feature/target archive loading and sequence batching."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nnjt import load_archive


@dataclass
class Utterance:
    name: str
    features: np.ndarray      # [N, D]
    targets_sqrt: np.ndarray  # [N, 4F]


def load_dataset(features_dir, targets_dir, input_kind="type1+type2"):
    """Pair up feature and target archives by file stem.

    ``input_kind`` selects the NN input layout: "type1" (6F) or
    "type1+type2" (10F).
    """
    features_dir = Path(features_dir)
    targets_dir = Path(targets_dir)
    utterances = []
    for feat_path in sorted(features_dir.glob("**/features.nnjt")):
        rel = feat_path.parent.relative_to(features_dir)
        target_path = targets_dir / rel / "targets.nnjt"
        if not target_path.exists():
            raise FileNotFoundError(f"no targets for {feat_path}: {target_path}")
        feats = load_archive(feat_path)
        targets = load_archive(target_path)["sqrt_psd"]
        if input_kind == "type1":
            mat = feats["type1"]
        elif input_kind == "type1+type2":
            mat = np.concatenate([feats["type1"], feats["type2"]], axis=1)
        else:
            raise ValueError(f"unknown input kind {input_kind!r}")
        if mat.shape[0] != targets.shape[0]:
            raise ValueError(
                f"{feat_path}: {mat.shape[0]} feature frames vs "
                f"{targets.shape[0]} target frames"
            )
        utterances.append(Utterance(str(rel), mat, targets))
    if not utterances:
        raise FileNotFoundError(f"no features.nnjt under {features_dir}")
    return utterances


def split_train_val(utterances, val_fraction=0.2, seed=0):
    """Deterministic utterance-level split (at least one of each side)."""
    order = np.random.default_rng(seed).permutation(len(utterances))
    n_val = max(1, int(round(val_fraction * len(utterances))))
    n_val = min(n_val, len(utterances) - 1)
    val_idx = set(order[:n_val].tolist())
    train = [u for i, u in enumerate(utterances) if i not in val_idx]
    val = [u for i, u in enumerate(utterances) if i in val_idx]
    return train, val


def make_sequences(utterances, seq_len):
    """Chop utterances into non-overlapping fixed-length windows."""
    feats, targets = [], []
    for utt in utterances:
        n_full = utt.features.shape[0] // seq_len
        for i in range(n_full):
            rows = slice(i * seq_len, (i + 1) * seq_len)
            feats.append(utt.features[rows])
            targets.append(utt.targets_sqrt[rows])
    if not feats:
        raise ValueError(f"no full {seq_len}-frame sequences in the dataset")
    return (np.stack(feats).astype(np.float32),
            np.stack(targets).astype(np.float32))
