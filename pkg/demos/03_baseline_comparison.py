"""Compare the four pipelines on the same scene.

The joint topology couples the echo and dereverberation filter updates;
the parallel variant applies them side by side; the cascades estimate
everything stage by stage.  The adaptive-canceller initialization is
shared so the comparison isolates the optimization strategy.
"""

from echoverb import PipelineConfig
from echoverb.adaptive import aec_init
from echoverb.metrics import evaluate
from echoverb.pipelines import RUNNERS
from echoverb.scenes import RoomConfig, SceneConfig, render_scene
from echoverb.signals import pink_noise, speech_like

room = RoomConfig(rt60=0.5, rir_length=8000, num_mics=3, seed=23)
scene_cfg = SceneConfig(ser_db=-15.0, snr_db=5.0, period_len=1.0, room=room)
scene = render_scene(scene_cfg, speech_like(2.0, seed=4),
                     2.0 * speech_like(2.0, seed=5), pink_noise(4.0, seed=6))

cfg = PipelineConfig()
h0 = aec_init(scene.d, scene.x, cfg.aec)

rows = [("mixture", evaluate(scene.d, scene).averages)]
for name in ("cascade", "nn_cascade", "parallel", "joint"):
    out = RUNNERS[name](scene.d, scene.x, cfg, scene=scene, h0=h0)
    rows.append((name, evaluate(out.s_e_hat, scene).averages))

print(f"{'pipeline':12s} {'SI-SDR':>8s} {'ERLE':>8s} {'ELR':>8s} "
      f"{'SNR':>8s} {'SI-SAR':>8s}")
for name, avg in rows:
    print(f"{name:12s} {avg['si_sdr']:8.2f} {avg['erle']:8.2f} "
          f"{avg['elr']:8.2f} {avg['snr']:8.2f} {avg['si_sar']:8.2f}")
