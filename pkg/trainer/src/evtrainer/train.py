"""Training loop and command-line entry point."""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import load_dataset, make_sequences, split_train_val
from .model import SpectralLstm, export_weights, kl_loss
from .nnjt import save_archive


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16     # sequences per minibatch
    seq_len: int = 32        # frames per sequence
    grad_clip: float = 1.0
    patience: int = 5        # early-stop epochs without val improvement
    hidden_size: int = 1026
    layers: int = 2
    epochs: int = 100
    val_fraction: float = 0.2
    seed: int = 0
    loss_eps: float = 1e-5   # training-loss regularization

    def __post_init__(self):
        for name in ("batch_size", "seq_len", "patience", "hidden_size",
                     "layers", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _epoch_loss(model, feats, targets, batch_size, eps):
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for lo in range(0, feats.shape[0], batch_size):
            fb = torch.from_numpy(feats[lo:lo + batch_size])
            tb = torch.from_numpy(targets[lo:lo + batch_size])
            total += float(kl_loss(tb, model(fb), eps)) * fb.shape[0]
            count += fb.shape[0]
    return total / count


def train(features_dir, targets_dir, cfg=None, input_kind="type1+type2",
          log=print):
    """Train the spectral LSTM; returns (weights dict, history dict).

    Adam with default settings, gradient-norm clipping, early stopping
    on the validation KL; the returned weights are the best-validation
    checkpoint in the shared NNJT tensor naming.
    """
    cfg = cfg or TrainConfig()
    torch.manual_seed(cfg.seed)
    utterances = load_dataset(features_dir, targets_dir, input_kind)
    train_utts, val_utts = split_train_val(utterances, cfg.val_fraction,
                                           cfg.seed)
    train_feats, train_targets = make_sequences(train_utts, cfg.seq_len)
    val_feats, val_targets = make_sequences(val_utts, cfg.seq_len)
    log(f"training on {len(train_utts)} utterances "
        f"({train_feats.shape[0]} sequences), validating on "
        f"{len(val_utts)} ({val_feats.shape[0]} sequences)")

    model = SpectralLstm(train_feats.shape[2], train_targets.shape[2],
                         cfg.hidden_size, cfg.layers)
    optimizer = torch.optim.Adam(model.parameters())
    rng = np.random.default_rng(cfg.seed)

    history = {"train": [], "val": []}
    best_val = np.inf
    best_state = export_weights(model)
    stale_epochs = 0
    for epoch in range(cfg.epochs):
        model.train()
        order = rng.permutation(train_feats.shape[0])
        running, seen = 0.0, 0
        for lo in range(0, order.size, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            fb = torch.from_numpy(train_feats[idx])
            tb = torch.from_numpy(train_targets[idx])
            optimizer.zero_grad()
            loss = kl_loss(tb, model(fb), cfg.loss_eps)
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            running += float(loss.detach()) * fb.shape[0]
            seen += fb.shape[0]
        train_loss = running / seen
        val_loss = _epoch_loss(model, val_feats, val_targets, cfg.batch_size,
                               cfg.loss_eps)
        history["train"].append(train_loss)
        history["val"].append(val_loss)
        log(f"epoch {epoch + 1:3d}: train KL {train_loss:.6f}  "
            f"val KL {val_loss:.6f}")

        if val_loss < best_val:
            best_val = val_loss
            best_state = export_weights(model)
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= cfg.patience:
                log(f"validation loss stopped improving for {cfg.patience} "
                    "epochs; stopping")
                break
    return best_state, history


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="echoverb-train",
        description="Train the LSTM spectral model on NNJT archives",
    )
    parser.add_argument("--features", required=True)
    parser.add_argument("--targets", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--epochs", type=int, default=100)
    parser.add_argument("--hidden", type=int, default=1026)
    parser.add_argument("--seq-len", type=int, default=32)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--patience", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--inputs", choices=["type1", "type1+type2"],
                        default="type1+type2",
                        help="type1 trains the 6F initialization network")
    args = parser.parse_args(argv)

    cfg = TrainConfig(
        batch_size=args.batch_size, seq_len=args.seq_len,
        patience=args.patience, hidden_size=args.hidden,
        epochs=args.epochs, seed=args.seed,
    )
    try:
        weights, history = train(args.features, args.targets, cfg,
                                 input_kind=args.inputs)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_archive(out, weights)
    with open(out.with_suffix(".log.json"), "w") as fh:
        json.dump(history, fh, indent=2)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
