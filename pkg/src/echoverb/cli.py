"""Command-line front end: scene synthesis, enhancement, evaluation.

Subcommands: synth, run, eval, export-features, bench.  Exit codes:
0 on success, 2 on input or I/O errors, 3 on numerical failures.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .adaptive import AecConfig
from .errors import InvalidInput, NumericalFailure, SingularSystem
from .metrics import METRIC_NAMES, evaluate
from .nnjt import save_archive
from .pipelines import PipelineConfig, run_pipeline
from .scenes import RoomConfig, SceneConfig, load_scene, render_scene, save_scene
from .signals import pink_noise, speech_like
from .spectral import ground_truth_target_pipeline, type_i_features, type_ii_features
from .stft import WindowSpec
from .wavio import read_wav, write_wav

# flat config schema: key -> (type, default)
CONFIG_SCHEMA = {
    "sample_rate": (int, 16000),
    "period_len": (float, 2.0),
    "t_e_ms": (float, 64.0),
    "clip_level": (float, 0.9),
    "ser_min": (float, -20.0),
    "ser_max": (float, 0.0),
    "snr_min": (float, 0.0),
    "snr_max": (float, 10.0),
    "rt60": (float, 0.5),
    "rir_length": (int, 8000),
    "num_mics": (int, 2),
    "direct_delay": (int, 40),
    "echo_rir_length": (int, None),
    "n_echo_taps": (int, 10),
    "n_reverb_taps": (int, 10),
    "delay": (int, 3),
    "iters": (int, 3),
    "eps": (float, 1e-5),
    "wpe_iters": (int, 3),
    "aec_step": (float, 0.5),
    "aec_passes": (int, 2),
    "window_length": (int, 1024),
    "window_hop": (int, 256),
    "topology": (str, "joint"),
    "psd_provider": (str, "oracle"),
    "seed": (int, 0),
    "workers": (int, None),
}


def load_config(path=None, overrides=None):
    """Resolve the run configuration: defaults, config file, CLI flags."""
    config = {key: default for key, (_, default) in CONFIG_SCHEMA.items()}
    if path:
        for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInput(f"{path}:{line_no}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_SCHEMA:
                raise InvalidInput(f"{path}:{line_no}: unknown key {key!r}")
            caster = CONFIG_SCHEMA[key][0]
            try:
                parsed = json.loads(value)
            except json.JSONDecodeError:
                parsed = value.strip("\"'")
            try:
                config[key] = caster(parsed) if parsed is not None else None
            except (TypeError, ValueError):
                raise InvalidInput(
                    f"{path}:{line_no}: cannot read {value!r} as "
                    f"{caster.__name__}"
                ) from None
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in CONFIG_SCHEMA:
                raise InvalidInput(f"unknown config key {key!r}")
            config[key] = value
    return config


def _pipeline_config(config):
    window = WindowSpec("hann", config["window_length"], config["window_hop"])
    aec = AecConfig(
        step_base=config["aec_step"],
        passes=config["aec_passes"],
        out_window=window,
        out_taps=config["n_echo_taps"],
    )
    return PipelineConfig(
        n_echo_taps=config["n_echo_taps"],
        n_reverb_taps=config["n_reverb_taps"],
        delay=config["delay"],
        n_iters=config["iters"],
        window=window,
        eps=config["eps"],
        psd_provider=config["psd_provider"],
        wpe_iters=config["wpe_iters"],
        aec=aec,
    )


def _scene_config(config, index):
    rng = np.random.default_rng([config["seed"], index])
    ser = float(rng.uniform(config["ser_min"], config["ser_max"]))
    snr = float(rng.uniform(config["snr_min"], config["snr_max"]))
    room = RoomConfig(
        rt60=config["rt60"],
        rir_length=config["rir_length"],
        num_mics=config["num_mics"],
        direct_delay=config["direct_delay"],
        seed=int(rng.integers(0, 2**63 - 1)),
        sample_rate=config["sample_rate"],
        echo_rir_length=config["echo_rir_length"],
    )
    return SceneConfig(
        ser_db=ser, snr_db=snr, clip_level=config["clip_level"],
        t_e=config["t_e_ms"] / 1000.0, period_len=config["period_len"],
        sample_rate=config["sample_rate"], room=room,
        seed=config["seed"] + index,
    )


def synth_one_scene(config, index):
    cfg = _scene_config(config, index)
    dur = 2.0 * config["period_len"]
    u = speech_like(dur, cfg.sample_rate, seed=[config["seed"], index, 0])
    # far-end plays at full scale so the loudspeaker clipping engages
    x = 2.0 * speech_like(dur, cfg.sample_rate, seed=[config["seed"], index, 1])
    noise = pink_noise(4.0 * config["period_len"], cfg.sample_rate,
                       seed=[config["seed"], index, 2])
    return render_scene(cfg, u, x, noise)


def cmd_synth(args):
    config = load_config(args.config, _overrides(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def make(i):
        scene = synth_one_scene(config, i)
        save_scene(scene, out / f"scene_{i:04d}")
        return i

    workers = config["workers"] or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(make, range(args.count)))
    print(f"wrote {args.count} scenes to {out}")
    return 0


def cmd_run(args):
    config = load_config(args.config, _overrides(args))
    scene = load_scene(args.scene_dir)
    pipeline_cfg = _pipeline_config(config)
    topology = config["topology"].replace("-", "_")

    t0 = time.perf_counter()
    result = run_pipeline(topology, scene.d, scene.x, cfg=pipeline_cfg,
                          scene=scene)
    elapsed = time.perf_counter() - t0

    out = Path(args.out) if args.out else Path(args.scene_dir) / f"enhanced_{topology}"
    out.mkdir(parents=True, exist_ok=True)
    write_wav(out / "s_e_hat.wav", result.s_e_hat, scene.sample_rate)
    save_archive(out / "filters.nnjt", {
        "H.real": result.ecf.h.real, "H.imag": result.ecf.h.imag,
        "G.real": result.drf.g.real, "G.imag": result.drf.g.imag,
        "loglik": np.array(
            [[entry.get("start", np.nan), entry.get("after_H", np.nan),
              entry.get("after_G", np.nan)] for entry in result.loglik]
        ),
    })
    report = {
        "config": config,
        "topology": topology,
        "psd_provider": str(config["psd_provider"]),
        "iterations": pipeline_cfg.n_iters,
        "loglik": result.loglik,
        "timings": {**result.timings, "total": elapsed},
    }
    with open(out / "run_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"enhanced {args.scene_dir} -> {out}")
    return 0


def _eval_pairs(args):
    scene_dirs = [Path(p) for p in args.scene_dirs]
    if args.enhanced:
        if len(scene_dirs) != 1:
            raise InvalidInput("--enhanced requires exactly one scene dir")
        return [(scene_dirs[0], Path(args.enhanced))]
    return [(sd, sd / args.enhanced_name) for sd in scene_dirs]


def cmd_eval(args):
    pairs = _eval_pairs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    all_rows = []
    for scene_dir, wav_path in pairs:
        scene = load_scene(scene_dir)
        if not wav_path.exists():
            raise InvalidInput(f"missing enhanced wav {wav_path}")
        enhanced, _ = read_wav(wav_path, expected_rate=scene.sample_rate)
        if enhanced.shape != scene.d.shape:
            raise InvalidInput(
                f"{wav_path}: enhanced shape {enhanced.shape} does not match "
                f"scene {scene.d.shape}"
            )
        report = evaluate(enhanced, scene)
        for row in report.rows:
            all_rows.append({"utterance_id": scene_dir.name, **row})

    csv_path = out / "metrics.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["utterance_id", "period_label", "channel",
                            *METRIC_NAMES]
        )
        writer.writeheader()
        for row in all_rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})

    summary = {"num_utterances": len(pairs), "metrics": {}}
    for name in METRIC_NAMES:
        vals = np.array([r[name] for r in all_rows if r[name] is not None])
        if vals.size:
            half = (1.96 * vals.std(ddof=1) / np.sqrt(vals.size)
                    if vals.size > 1 else 0.0)
            summary["metrics"][name] = {
                "mean": float(vals.mean()),
                "ci95_half_width": float(half),
                "count": int(vals.size),
            }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"wrote {csv_path} and summary.json ({len(all_rows)} rows)")
    return 0


def cmd_export_features(args):
    config = load_config(args.config, _overrides(args))
    scene = load_scene(args.scene_dir)
    window = WindowSpec("hann", config["window_length"], config["window_hop"])
    result = ground_truth_target_pipeline(
        scene, window,
        n_echo_taps=config["n_echo_taps"],
        n_reverb_taps=config["n_reverb_taps"],
        delay=config["delay"], n_iters=config["iters"], eps=config["eps"],
    )
    sig = result.signals
    type1 = type_i_features(sig["x"], sig["d"], sig["y_hat"], sig["e"],
                            sig["e_l_hat"], sig["r"])
    type2 = type_ii_features(sig["v_unc"])
    targets = np.concatenate(
        [np.sqrt(result.psd[name]) for name in ("s_e", "s_r", "z_r", "b_r")],
        axis=1,
    )
    out = Path(args.out) if args.out else Path(args.scene_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_archive(out / "features.nnjt", {"type1": type1, "type2": type2})
    save_archive(out / "targets.nnjt", {"sqrt_psd": targets})
    print(f"wrote features/targets for {args.scene_dir} -> {out}")
    return 0


def cmd_bench(args):
    config = load_config(args.config, _overrides(args))
    scene = synth_one_scene(config, 0)
    pipeline_cfg = _pipeline_config(config)
    timings = {}
    for topology in ("joint", "parallel", "cascade", "nn_cascade"):
        t0 = time.perf_counter()
        run_pipeline(topology, scene.d, scene.x, cfg=pipeline_cfg, scene=scene)
        timings[topology] = time.perf_counter() - t0
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench.json", "w") as fh:
        json.dump({"config": config, "seconds": timings}, fh, indent=2)
    for topology, seconds in timings.items():
        print(f"{topology:12s} {seconds:7.2f} s")
    return 0


def _overrides(args):
    mapping = {
        "seed": getattr(args, "seed", None),
        "topology": getattr(args, "topology", None),
        "psd_provider": getattr(args, "psd_provider", None),
        "iters": getattr(args, "iters", None),
        "workers": getattr(args, "workers", None),
        "aec_step": getattr(args, "aec_step", None),
        "aec_passes": getattr(args, "aec_passes", None),
    }
    return {k: v for k, v in mapping.items() if v is not None}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="echoverb",
        description="Joint multichannel echo, reverberation and noise reduction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--iters", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--aec-step", dest="aec_step", type=float)
        p.add_argument("--aec-passes", dest="aec_passes", type=int)
        p.add_argument(
            "--topology",
            choices=["joint", "parallel", "cascade", "nn-cascade", "nn_cascade"],
        )
        p.add_argument("--psd-provider", dest="psd_provider",
                       help="oracle, unconstrained, or lstm:PATH")

    p_synth = sub.add_parser("synth", help="render synthetic scenes")
    common(p_synth)
    p_synth.add_argument("--count", type=int, default=1)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="enhance one scene")
    common(p_run)
    p_run.add_argument("scene_dir")
    p_run.add_argument("--out")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="score enhanced audio against a scene")
    common(p_eval)
    p_eval.add_argument("scene_dirs", nargs="+")
    p_eval.add_argument("--enhanced", help="explicit enhanced wav (single scene)")
    p_eval.add_argument("--enhanced-name", default="enhanced_joint/s_e_hat.wav",
                        help="per-scene relative path to the enhanced wav")
    p_eval.add_argument("--out", default="eval_out")
    p_eval.set_defaults(func=cmd_eval)

    p_exp = sub.add_parser("export-features",
                           help="export NN feature/target archives")
    common(p_exp)
    p_exp.add_argument("scene_dir")
    p_exp.add_argument("--out")
    p_exp.set_defaults(func=cmd_export_features)

    p_bench = sub.add_parser("bench", help="time the pipelines on one scene")
    common(p_bench)
    p_bench.add_argument("--out")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInput, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, SingularSystem) as exc:
        stage = getattr(exc, "stage", None) or getattr(exc, "bin_index", None)
        print(f"numerical failure ({stage}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
