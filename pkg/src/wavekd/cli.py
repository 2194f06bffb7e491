"""Command-line surface: synth, teacher, distill, eval, export.

Every run resolves its configuration (preset/config file plus flag
overrides), writes the resolved form next to its outputs, and is fully
reproducible from that file alone.  Exit codes: 0 success, 1 usage error,
2 data error, 3 numerical failure.
"""

import argparse
import csv
import hashlib
import json
import sys
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .data import (
    impulse_responses_to_csv,
    load_model,
    load_spectrogram,
    save_history_csv,
    save_model,
    save_spectrogram,
    spectrogram_to_csv,
    synth_sine_dataset,
    synth_vowel_dataset,
    load_wav_dir,
    write_wav,
)
from .distill import TeacherCache, TrainConfig, TrainingDiverged, split_dataset, train
from .metrics import evaluate, impulse_responses, localization_report
from .students import ConvStudent, GaborStudent, MultiresStudent
from .teachers import TeacherSpec, build_teacher

DEFAULT_CONFIG = {
    "teacher": {
        "kind": "synth-cqt",
        "sample_rate": 16000.0,
        "fir_length": 4096,
        "bins_per_octave": 0,  # 0 -> kind default
        "n_octaves": 8,
        "n_filters": 0,
        "f_min": 0.0,
        "f_max": 0.0,
    },
    "model": {
        "kind": "conv",
        "half_length": 512,
        "hop_exponent": 9,
        "f_min": 60.0,
        "f_max": 0.0,
        "level_scaled_init": True,
    },
    "train": {
        "epochs": 100,
        "epoch_size": 8000,
        "excerpt_length": 4096,
        "batch_size": 16,
        "learning_rate": 1e-3,
        "seed": 0,
        "trials": 1,
    },
    "data": {
        "corpus": "synth-sine",
        "count": 64,
        "duration_s": 1.0,
        "seed": 0,
        "wav_dir": "",
    },
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _merge(base, override):
    out = {k: dict(v) for k, v in base.items()}
    for section, values in override.items():
        if section not in out:
            raise UsageError(f"unknown config section [{section}]")
        for key, val in values.items():
            if key not in out[section]:
                raise UsageError(f"unknown config key {section}.{key}")
            out[section][key] = val
    return out


def load_config(preset=None, config_path=None, overrides=()):
    cfg = {k: dict(v) for k, v in DEFAULT_CONFIG.items()}
    if preset:
        ref = resources.files("wavekd").joinpath(f"presets/{preset}.toml")
        if not ref.is_file():
            raise UsageError(f"unknown preset {preset!r}")
        cfg = _merge(cfg, tomllib.loads(ref.read_text()))
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        cfg = _merge(cfg, tomllib.loads(path.read_text()))
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise UsageError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in cfg or key not in cfg[section]:
            raise UsageError(f"unknown config key {dotted}")
        current = cfg[section][key]
        if isinstance(current, bool):
            value = raw.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        else:
            value = raw
        cfg[section][key] = value
    return cfg


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_resolved_config(cfg, path):
    lines = []
    for section, values in cfg.items():
        lines.append(f"[{section}]")
        for key, val in values.items():
            lines.append(f"{key} = {_toml_value(val)}")
        lines.append("")
    Path(path).write_text("\n".join(lines))


def teacher_from_config(cfg):
    t = cfg["teacher"]
    return build_teacher(
        TeacherSpec(
            kind=t["kind"],
            sample_rate=t["sample_rate"],
            fir_length=t["fir_length"],
            bins_per_octave=t["bins_per_octave"] or None,
            n_octaves=t["n_octaves"],
            n_filters=t["n_filters"] or None,
            f_min=t["f_min"] or None,
            f_max=t["f_max"] or None,
        )
    )


def corpus_from_config(cfg, filterbank):
    d = cfg["data"]
    if d["corpus"] == "synth-sine":
        return synth_sine_dataset(filterbank, d["count"], d["duration_s"], d["seed"])
    if d["corpus"] == "synth-vowel":
        return synth_vowel_dataset(
            d["count"], filterbank.sample_rate, d["duration_s"], d["seed"]
        )
    if d["corpus"] == "wav-dir":
        if not d["wav_dir"]:
            raise UsageError("data.corpus = 'wav-dir' requires data.wav_dir")
        try:
            return load_wav_dir(d["wav_dir"], filterbank.sample_rate)
        except (OSError, ValueError) as exc:
            raise DataError(str(exc)) from exc
    raise UsageError(f"unknown corpus kind {d['corpus']!r}")


def model_from_config(cfg, filterbank, random_state):
    m = cfg["model"]
    kind = m["kind"]
    if kind == "conv":
        return ConvStudent(
            n_filters=filterbank.n_filters,
            half_length=m["half_length"],
            hop_exponent=m["hop_exponent"],
            random_state=random_state,
        )
    if kind == "gabor":
        return GaborStudent(
            n_filters=filterbank.n_filters,
            half_length=m["half_length"],
            hop_exponent=m["hop_exponent"],
            sample_rate=filterbank.sample_rate,
            f_min=m["f_min"],
            f_max=m["f_max"] or None,
            random_state=random_state,
        )
    if kind == "multires":
        return MultiresStudent(
            center_freqs=filterbank.center_freqs,
            sample_rate=filterbank.sample_rate,
            hop_exponent=m["hop_exponent"],
            level_scaled_init=m["level_scaled_init"],
            random_state=random_state,
        )
    raise UsageError(f"unknown model kind {kind!r}")


def _prepare_out_dir(path, force):
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not force:
        raise UsageError(f"output directory {out} is not empty (use --force to reuse)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args):
    cfg = load_config(args.preset, args.config, args.set or [])
    if args.count:
        cfg["data"]["count"] = args.count
    if args.seed is not None:
        cfg["data"]["seed"] = args.seed
    out = _prepare_out_dir(args.out, args.force)
    filterbank = teacher_from_config(cfg)
    items = corpus_from_config(cfg, filterbank)
    manifest = [("id", "file", "sha256", "source")]
    for item in items:
        name = f"{item.id}.wav"
        write_wav(out / name, item.signal, bits="float32")
        digest = hashlib.sha256((out / name).read_bytes()).hexdigest()
        manifest.append((item.id, name, digest, item.source))
    with open(out / "manifest.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(manifest)
    write_resolved_config(cfg, out / "resolved-config.toml")
    print(f"wrote {len(items)} files to {out}")
    return 0


def cmd_teacher(args):
    cfg = load_config(args.preset, args.config, args.set or [])
    out = _prepare_out_dir(args.out, args.force)
    filterbank = teacher_from_config(cfg)
    items = corpus_from_config(cfg, filterbank)
    cache = TeacherCache(out)
    from .distill import sample_excerpt

    count = 0
    for item in items:
        try:
            excerpt = sample_excerpt(item.signal, cfg["train"]["excerpt_length"])
        except ValueError:
            continue
        cache.get(filterbank, item, excerpt, cfg["model"]["hop_exponent"])
        count += 1
    write_resolved_config(cfg, out / "resolved-config.toml")
    print(f"cached {count} teacher spectrograms in {out}")
    return 0


def cmd_distill(args):
    cfg = load_config(args.preset, args.config, args.set or [])
    if args.model:
        cfg["model"]["kind"] = args.model
    if args.teacher:
        cfg["teacher"]["kind"] = args.teacher
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    if args.trials is not None:
        cfg["train"]["trials"] = args.trials
    if args.seed is not None:
        cfg["train"]["seed"] = args.seed
    out = _prepare_out_dir(args.out, args.force)
    filterbank = teacher_from_config(cfg)
    items = corpus_from_config(cfg, filterbank)
    tr = cfg["train"]
    cache = TeacherCache(args.cache_dir)
    trial_results = []
    for trial in range(tr["trials"]):
        seed = tr["seed"] + trial
        train_items, val_items, test_items = split_dataset(items, seed=seed)
        model = model_from_config(cfg, filterbank, random_state=seed)
        config = TrainConfig(
            epochs=tr["epochs"],
            epoch_size=tr["epoch_size"],
            excerpt_length=tr["excerpt_length"],
            batch_size=tr["batch_size"],
            learning_rate=tr["learning_rate"],
            seed=seed,
        )
        history = train(model, filterbank, train_items, val_items, config, cache=cache)
        mean, std, _ = evaluate(
            model, filterbank, test_items, excerpt_length=tr["excerpt_length"], cache=cache
        )
        save_model(out / f"model_trial{trial}.wkdm", model)
        save_history_csv(out / f"history_trial{trial}.csv", history)
        trial_results.append({"seed": seed, "test_mean": mean, "test_std": std})
        print(f"trial {trial}: test loss {mean:.4f} +/- {std:.4f}")
    means = np.array([t["test_mean"] for t in trial_results])
    summary = {
        "teacher": cfg["teacher"]["kind"],
        "model": cfg["model"]["kind"],
        "trials": tr["trials"],
        "test_mean": float(means.mean()),
        "test_std": float(means.std()),
        "per_trial": trial_results,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    write_resolved_config(cfg, out / "resolved-config.toml")
    print(f"summary: {summary['test_mean']:.4f} +/- {summary['test_std']:.4f}")
    return 0


def cmd_eval(args):
    cfg = load_config(args.preset, args.config, args.set or [])
    model = load_model(args.checkpoint)
    if args.model and model.kind != args.model:
        raise DataError(
            f"checkpoint holds a {model.kind!r} model but {args.model!r} was requested"
        )
    out = _prepare_out_dir(args.out, args.force)
    filterbank = teacher_from_config(cfg)
    items = corpus_from_config(cfg, filterbank)
    _, _, test_items = split_dataset(items, seed=args.seed if args.seed is not None else cfg["train"]["seed"])
    mean, std, losses = evaluate(
        model, filterbank, test_items, excerpt_length=cfg["train"]["excerpt_length"]
    )
    report = {
        "checkpoint": str(args.checkpoint),
        "model": model.kind,
        "teacher": cfg["teacher"]["kind"],
        "test_mean": mean,
        "test_std": std,
        "n_items": len(losses),
    }
    (out / "eval.json").write_text(json.dumps(report, indent=2))
    if args.export_ir:
        rows = [ir for ir, _ in impulse_responses(model)]
        impulse_responses_to_csv(out / "impulse_responses.csv", rows)
    if args.heisenberg:
        loc = localization_report(model, sample_rate=filterbank.sample_rate)
        loc.to_csv(out / "localization.csv")
        loc.to_quantile_json(out / "localization_quantiles.json")
    write_resolved_config(cfg, out / "resolved-config.toml")
    print(f"test loss {mean:.4f} +/- {std:.4f} over {len(losses)} items")
    return 0


def cmd_export(args):
    src = Path(args.input)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if src.suffix == ".wkds":
        spectrogram_to_csv(out, load_spectrogram(src))
    elif src.suffix == ".wkdm":
        model = load_model(src)
        rows = [ir for ir, _ in impulse_responses(model)]
        impulse_responses_to_csv(out, rows)
    else:
        raise UsageError(f"cannot export {src}: expected a .wkds or .wkdm file")
    print(f"wrote {out}")
    return 0


def _add_common(p):
    p.add_argument("--preset", help="named preset shipped with the package (e.g. desk)")
    p.add_argument("--config", help="TOML config file")
    p.add_argument(
        "--set", action="append", metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable)",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="write into a non-empty directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="wavekd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus as WAV files")
    _add_common(p)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("teacher", help="precompute the teacher spectrogram cache")
    _add_common(p)
    p.set_defaults(func=cmd_teacher)

    p = sub.add_parser("distill", help="train student(s) against a teacher")
    _add_common(p)
    p.add_argument("--model", choices=["conv", "gabor", "multires"])
    p.add_argument("--teacher", choices=["synth-cqt", "gammatone", "vqt", "ansi-third-octave"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--cache-dir", help="teacher spectrogram cache (default: WKD_CACHE_DIR)")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("eval", help="evaluate a checkpoint and export reports")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--model", choices=["conv", "gabor", "multires"])
    p.add_argument("--seed", type=int)
    p.add_argument("--export-ir", action="store_true")
    p.add_argument("--heisenberg", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="convert a binary artifact to CSV")
    p.add_argument("--input", required=True, help=".wkds or .wkdm file")
    p.add_argument("--out", required=True, help="CSV destination")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
