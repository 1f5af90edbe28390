"""LSTM spectral model and the KL training loss."""

import numpy as np
import torch
from torch import nn

GATES = ("i", "f", "c", "o")  # torch stacks gates in this order (c == g)

KL_FLOOR = 1e-12


class SpectralLstm(nn.Module):
    """Two stacked LSTM layers with a nonnegative dense output head."""

    def __init__(self, input_size, output_size, hidden_size=1026, layers=2):
        super().__init__()
        self.lstm = nn.LSTM(input_size, hidden_size, num_layers=layers,
                            batch_first=True)
        self.head = nn.Linear(hidden_size, output_size)
        # start the rectified head in its active region so no output
        # unit is born dead
        nn.init.constant_(self.head.bias, 0.1)

    def forward(self, features):
        out, _ = self.lstm(features)
        return torch.relu(self.head(out))


def kl_loss(target_sqrt, pred_sqrt, eps=0.0):
    """Kullback-Leibler divergence between sqrt-PSD spectra.

    With eps = 0 this matches the enhancement toolkit's evaluation
    formula (natural log, prediction floored at 1e-12, 0 log 0 taken as
    0).  Training passes eps = 1e-5, which shifts both arguments and
    keeps gradients alive where the ReLU head outputs zero.
    """
    if eps > 0.0:
        target_sqrt = target_sqrt + eps
        pred_sqrt = pred_sqrt + eps
    pred = torch.clamp(pred_sqrt, min=KL_FLOOR)
    logterm = torch.where(
        target_sqrt > 0,
        target_sqrt * (torch.log(target_sqrt.clamp(min=KL_FLOOR))
                       - torch.log(pred)),
        torch.zeros_like(target_sqrt),
    )
    return (logterm - target_sqrt + pred).mean()


def export_weights(model):
    """Model parameters as the shared NNJT tensor naming.

    Per layer: input kernels W_* [D_in, H], recurrent kernels U_*
    [H, H], combined biases b_* [H]; the head as [H, D_out] plus bias.
    """
    hidden = model.lstm.hidden_size
    tensors = {}
    for layer in range(model.lstm.num_layers):
        w_ih = getattr(model.lstm, f"weight_ih_l{layer}").detach().numpy()
        w_hh = getattr(model.lstm, f"weight_hh_l{layer}").detach().numpy()
        b_ih = getattr(model.lstm, f"bias_ih_l{layer}").detach().numpy()
        b_hh = getattr(model.lstm, f"bias_hh_l{layer}").detach().numpy()
        for g, gate in enumerate(GATES):
            rows = slice(g * hidden, (g + 1) * hidden)
            prefix = f"lstm{layer + 1}."
            tensors[prefix + f"W_{gate}"] = w_ih[rows].T.copy()
            tensors[prefix + f"U_{gate}"] = w_hh[rows].T.copy()
            tensors[prefix + f"b_{gate}"] = b_ih[rows] + b_hh[rows]
    tensors["head.W"] = model.head.weight.detach().numpy().T.copy()
    tensors["head.b"] = model.head.bias.detach().numpy().copy()
    return {k: np.asarray(v, dtype=np.float32) for k, v in tensors.items()}


def import_weights(tensors):
    """Rebuild a SpectralLstm from an NNJT tensor dict."""
    input_size, hidden = tensors["lstm1.W_i"].shape
    output_size = tensors["head.W"].shape[1]
    layers = 1 + sum(1 for k in tensors if k.startswith("lstm2.W_i"))
    model = SpectralLstm(input_size, output_size, hidden, layers)
    state = {}
    for layer in range(layers):
        prefix = f"lstm{layer + 1}."
        w_ih = np.concatenate(
            [tensors[prefix + f"W_{gate}"].T for gate in GATES], axis=0
        )
        w_hh = np.concatenate(
            [tensors[prefix + f"U_{gate}"].T for gate in GATES], axis=0
        )
        bias = np.concatenate(
            [tensors[prefix + f"b_{gate}"] for gate in GATES], axis=0
        )
        state[f"lstm.weight_ih_l{layer}"] = torch.from_numpy(w_ih.copy())
        state[f"lstm.weight_hh_l{layer}"] = torch.from_numpy(w_hh.copy())
        state[f"lstm.bias_ih_l{layer}"] = torch.from_numpy(bias.copy())
        state[f"lstm.bias_hh_l{layer}"] = torch.zeros(bias.shape[0])
    state["head.weight"] = torch.from_numpy(tensors["head.W"].T.copy())
    state["head.bias"] = torch.from_numpy(tensors["head.b"].copy())
    model.load_state_dict(state)
    return model


def evaluate_loss(tensors, features, targets_sqrt):
    """KL loss of an exported weight set on one feature/target pair."""
    model = import_weights(tensors)
    model.eval()
    with torch.no_grad():
        pred = model(torch.from_numpy(
            np.asarray(features, dtype=np.float32)
        ).unsqueeze(0))[0]
        return float(kl_loss(
            torch.from_numpy(np.asarray(targets_sqrt, dtype=np.float32)), pred
        ))
