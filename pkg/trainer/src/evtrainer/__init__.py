"""LSTM spectral-model trainer for the enhancement toolkit."""

from .data import load_dataset, make_sequences, split_train_val
from .model import SpectralLstm, evaluate_loss, export_weights, import_weights, kl_loss
from .nnjt import load_archive, save_archive
from .train import TrainConfig, train

__version__ = "0.1.0"
