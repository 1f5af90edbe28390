"""Produce NN training material: features and ground-truth PSD targets.

The iterative target pipeline starts from zero filters, refines them
against oracle statistics, and refilters the ground-truth components;
the exported archives feed the external LSTM trainer, whose weight
files plug back in through the lstm PSD provider.
"""

import numpy as np

from echoverb import save_archive
from echoverb.scenes import RoomConfig, SceneConfig, render_scene
from echoverb.signals import pink_noise, speech_like
from echoverb.spectral import (
    ground_truth_target_pipeline,
    type_i_features,
    type_ii_features,
)
from echoverb.stft import WindowSpec

room = RoomConfig(rt60=0.5, rir_length=8000, num_mics=2, seed=31)
cfg = SceneConfig(ser_db=-10.0, snr_db=5.0, period_len=1.0, room=room)
scene = render_scene(cfg, speech_like(2.0, seed=7),
                     2.0 * speech_like(2.0, seed=8), pink_noise(4.0, seed=9))

window = WindowSpec("hann", 1024, 256)
result = ground_truth_target_pipeline(scene, window, n_iters=3)

print("dereverberated residual echo energy per iteration:")
for i, energy in enumerate(result.z_r_energy):
    print(f"  iteration {i}: {energy:12.1f}")

sig = result.signals
type1 = type_i_features(sig["x"], sig["d"], sig["y_hat"], sig["e"],
                        sig["e_l_hat"], sig["r"])
type2 = type_ii_features(sig["v_unc"])
targets = np.concatenate(
    [np.sqrt(result.psd[c]) for c in ("s_e", "s_r", "z_r", "b_r")], axis=1
)
print(f"type-I features  {type1.shape}  (6F magnitudes)")
print(f"type-II features {type2.shape}  (sqrt unconstrained PSDs)")
print(f"targets          {targets.shape}  (sqrt ground-truth PSDs)")

save_archive("demo_features.nnjt", {"type1": type1, "type2": type2})
save_archive("demo_targets.nnjt", {"sqrt_psd": targets})
print("wrote demo_features.nnjt and demo_targets.nnjt")
print("train with:  echoverb-train --features . --targets . --out nn1.nnjt")
