"""Run the joint enhancement pipeline on one scene, end to end.

Shows the block-coordinate ascent at work: the log-likelihood trace
never decreases across the echo and dereverberation filter updates,
and the evaluation metrics improve sharply over the raw mixture.
"""

from echoverb import PipelineConfig, run_nn_joint, write_wav
from echoverb.metrics import evaluate
from echoverb.scenes import RoomConfig, SceneConfig, render_scene
from echoverb.signals import pink_noise, speech_like

room = RoomConfig(rt60=0.5, rir_length=8000, num_mics=2, seed=11)
cfg = SceneConfig(ser_db=-12.0, snr_db=6.0, period_len=2.0, room=room)
scene = render_scene(cfg, speech_like(4.0, seed=1),
                     2.0 * speech_like(4.0, seed=2), pink_noise(8.0, seed=3))

out = run_nn_joint(scene.d, scene.x, PipelineConfig(), scene=scene)

print("log-likelihood trace (start / after H / after G):")
for i, entry in enumerate(out.loglik):
    print(f"  pass {i}: {entry['start']:14.1f}  {entry['after_H']:14.1f}  "
          f"{entry['after_G']:14.1f}")

before = evaluate(scene.d, scene).averages
after = evaluate(out.s_e_hat, scene).averages
print(f"\n{'metric':8s} {'mixture':>9s} {'enhanced':>9s}")
for name in ("si_sdr", "erle", "ser", "elr", "snr", "si_sar"):
    print(f"{name:8s} {before.get(name, float('nan')):9.2f} "
          f"{after.get(name, float('nan')):9.2f}")

write_wav("demo_enhanced.wav", out.s_e_hat, scene.sample_rate)
print("\nwrote demo_enhanced.wav")
