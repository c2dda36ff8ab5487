"""``qbar`` command line: gen | train | calibrate | score | eval.

Machine-readable results go to stdout as one JSON object per line;
diagnostics go to stderr. Settings come from defaults, then the ``--config``
JSON file, then command-line flags (flags win). Unknown config keys are
rejected.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import evaluation, persistence, pipeline, scoring, synthgen
from .errors import ConfigError, MissingCheckpoint, QbarError, UncalibratedModel, UnknownCreator
from .peqad import TrainConfig
from .statevector import BACKEND, AnsatzConfig

log = logging.getLogger("qbar")

DEFAULTS = {
    "seed": 0,
    "seeds": [0, 1, 2, 3, 4],
    "out": "qbar_run",
    "creator": None,
    "quiet": False,
    "manifest": None,
    "checkpoint": None,
    "embedding": None,
    "gen": asdict(synthgen.DatasetPreset()),
    "ansatz": {"n_qubits": 12, "n_layers": 10},
    "train": {k: v for k, v in asdict(TrainConfig()).items() if k != "seed"},
    "scoring": {"shrinkage": scoring.DEFAULT_SHRINKAGE},
    "eval": {"gamma_ablation": False, "robustness": False,
             "noise_sigmas": [0.0, 0.05, 0.1, 0.2], "noise_seed": 0},
}


SECTIONS = ("gen", "ansatz", "train", "scoring", "eval")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {key!r}")
        if key in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            unknown = sorted(set(value) - set(base[key]))
            if unknown:
                raise ConfigError(f"unknown config key(s) in {key!r}: {unknown}")
            out[key].update(copy.deepcopy(value))
        else:
            out[key] = value
    return out


class RunConfig(dict):
    """Fully resolved settings; attribute access for top-level keys."""

    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def out_dir(self) -> Path:
        return Path(self["out"])

    @property
    def manifest_path(self) -> Path:
        return Path(self["manifest"]) if self["manifest"] else self.out_dir / "data" / "manifest.json"

    def preset(self) -> synthgen.DatasetPreset:
        return synthgen.DatasetPreset(**self["gen"])

    def ansatz(self) -> AnsatzConfig:
        return AnsatzConfig(**self["ansatz"])

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(seed=seed, **self["train"])

    def checkpoint_path(self, seed: int, creator_id: str) -> Path:
        return self.out_dir / "models" / f"seed{seed}" / f"{creator_id}.json"


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = copy.deepcopy(DEFAULTS)
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = _merge(cfg, doc)
    flags = {
        "seed": getattr(args, "seed", None),
        "out": getattr(args, "out", None),
        "creator": getattr(args, "creator", None),
        "manifest": getattr(args, "manifest", None),
        "checkpoint": getattr(args, "checkpoint", None),
        "embedding": getattr(args, "embedding", None),
    }
    for key, value in flags.items():
        if value is not None:
            cfg[key] = value
    if getattr(args, "quiet", False):
        cfg["quiet"] = True
    if getattr(args, "seeds", None):
        cfg["seeds"] = [int(s) for s in args.seeds.split(",")]
    elif getattr(args, "seed", None) is not None and args.command != "gen":
        cfg["seeds"] = [args.seed]
    if getattr(args, "epochs", None) is not None:
        cfg["train"]["epochs"] = args.epochs
    if getattr(args, "gamma_ablation", False):
        cfg["eval"]["gamma_ablation"] = True
    if getattr(args, "robustness", False):
        cfg["eval"]["robustness"] = True
    try:
        synthgen.DatasetPreset(**cfg["gen"])
        AnsatzConfig(**cfg["ansatz"])
        TrainConfig(**cfg["train"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return RunConfig(cfg)


def emit(record: dict) -> None:
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    sys.stdout.flush()


def _creators(cfg: RunConfig, manifest) -> list:
    if cfg.creator is None:
        return manifest.creator_ids
    if cfg.creator not in manifest.creator_ids:
        raise UnknownCreator(f"creator {cfg.creator!r} not in {cfg.manifest_path}")
    return [cfg.creator]


# --- commands -------------------------------------------------------------

def cmd_gen(cfg: RunConfig) -> int:
    out = cfg.manifest_path.parent
    result = synthgen.gen_dataset(cfg.preset(), cfg.seed, out)
    m = result.manifest
    counts = {s: {l: 0 for l in persistence.LABELS} for s in persistence.SPLITS}
    for v in m.videos:
        counts[v["split"]][v["label"]] += 1
    first = m.creator_ids[0]
    per_creator = [sum(1 for v in m.videos_for(first, s) if v["label"] == "normal")
                   for s in persistence.SPLITS]
    log.info("dataset %s: %d creators, %d videos", result.manifest_path, len(m.creators), len(m.videos))
    emit({"command": "gen", "status": "written" if result.changed else "unchanged",
          "manifest": str(result.manifest_path), "creators": len(m.creators),
          "videos": len(m.videos), "counts": counts,
          "normals_per_creator": dict(zip(persistence.SPLITS, per_creator)),
          "sensational_corpus": len(m.sensational_corpus)})
    return 0


def cmd_train(cfg: RunConfig) -> int:
    manifest = persistence.load_manifest(cfg.manifest_path)
    ansatz = cfg.ansatz()
    for seed in cfg.seeds:
        for cid in _creators(cfg, manifest):
            det, report = pipeline.train_detector(
                manifest, cid, cfg.train_config(seed), ansatz, cfg["scoring"]["shrinkage"])
            path = cfg.checkpoint_path(seed, cid)
            changed = persistence.save_model(det, path)
            log.info("%s seed %d: loss %.6g -> %.6g (ratio %.4f) in %.1fs, %d parameters",
                     cid, seed, report.initial_loss, report.final_loss, report.ratio,
                     report.wall_time, ansatz.parameter_count)
            emit({"command": "train", "creator": cid, "seed": seed,
                  "parameter_count": ansatz.parameter_count,
                  "initial_loss": report.initial_loss, "final_loss": report.final_loss,
                  "loss_ratio": report.ratio, "epochs": len(report.loss_per_epoch),
                  "wall_time": round(report.wall_time, 3), "checkpoint": str(path),
                  "status": "written" if changed else "unchanged"})
    return 0


def _checkpoint_targets(cfg: RunConfig, manifest):
    if cfg.checkpoint:
        return [(None, Path(cfg.checkpoint))]
    return [(seed, cfg.checkpoint_path(seed, cid))
            for seed in cfg.seeds for cid in _creators(cfg, manifest)]


def _load_checkpoint(path: Path, seed, creator=None):
    if not path.is_file():
        who = f"creator {creator or path.stem}" + ("" if seed is None else f", seed {seed}")
        raise MissingCheckpoint(f"no checkpoint for {who}: {path}")
    return persistence.load_model(path)


def cmd_calibrate(cfg: RunConfig) -> int:
    manifest = persistence.load_manifest(cfg.manifest_path)
    for seed, path in _checkpoint_targets(cfg, manifest):
        det = pipeline.calibrate_detector(_load_checkpoint(path, seed), manifest)
        changed = persistence.save_model(det, path)
        d = det.decision
        log.info("%s: gamma %.1f tau %.6g validation F1 %.4f", det.creator_id, d.gamma, d.tau,
                 d.validation_f1)
        emit({"command": "calibrate", "creator": det.creator_id, "seed": seed,
              "checkpoint": str(path), "gamma": d.gamma,
              "tau": persistence._float_out(d.tau), "validation_f1": d.validation_f1,
              "status": "written" if changed else "unchanged"})
    return 0


def cmd_score(cfg: RunConfig) -> int:
    if not cfg.checkpoint or not cfg.embedding:
        raise ConfigError("score needs --checkpoint and --embedding")
    det = _load_checkpoint(Path(cfg.checkpoint), None)
    if not det.calibrated:
        raise UncalibratedModel(f"{cfg.checkpoint} has not been calibrated")
    record = det.score_file(cfg.embedding).as_dict()
    emit({"command": "score", "creator": det.creator_id, "embedding": str(cfg.embedding),
          **record})
    return 0


RESULT_FIELDS = ["seed", "variant", "creator_id", "tp", "fp", "tn", "fn",
                 "precision", "recall", "f1", "aupr", "fpr", "gamma", "tau"]


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _fmt(x):
    return repr(float(x)) if isinstance(x, float) else x


def evaluate(cfg: RunConfig, manifest) -> dict:
    """Score every creator's test split for every seed; return reports by variant."""
    variants = {"calibrated": None}
    if cfg["eval"]["gamma_ablation"]:
        variants.update({"gamma=0": 0.0, "gamma=1": 1.0})
    reports = {name: [] for name in variants}
    decisions = {}
    detectors_by_seed = {}
    for seed in cfg.seeds:
        rows = {name: {} for name in variants}
        detectors = {}
        for cid in _creators(cfg, manifest):
            det = _load_checkpoint(cfg.checkpoint_path(seed, cid), seed, cid)
            if not det.calibrated:
                raise UncalibratedModel(f"checkpoint for {cid}, seed {seed} is not calibrated")
            detectors[cid] = det
            _, labels, raw = pipeline.split_scores(det, manifest, "test")
            for name, gamma in variants.items():
                d = det if gamma is None else pipeline.calibrate_detector(det, manifest, (gamma,))
                scores = pipeline.final_scores(d, raw)
                preds = [s > d.decision.tau for s in scores]
                rows[name][cid] = (labels, preds, scores)
                decisions[(seed, name, cid)] = d.decision
        detectors_by_seed[seed] = detectors
        for name in variants:
            reports[name].append(evaluation.build_report(seed, rows[name], name))
    return {"reports": reports, "decisions": decisions, "detectors": detectors_by_seed}


def cmd_eval(cfg: RunConfig) -> int:
    manifest = persistence.load_manifest(cfg.manifest_path)
    result = evaluate(cfg, manifest)
    reports, decisions = result["reports"], result["decisions"]
    out = cfg.out_dir / "eval"
    rows, curve_rows, summary = [], [], {}
    for name, reps in reports.items():
        for rep in reps:
            for cid, m in rep.per_creator.items():
                dec = decisions[(rep.seed, name, cid)]
                rows.append([rep.seed, name, cid, m["tp"], m["fp"], m["tn"], m["fn"],
                             *(_fmt(m[k]) for k in ("precision", "recall", "f1", "aupr", "fpr")),
                             _fmt(dec.gamma), _fmt(dec.tau)])
            curve_rows += [[rep.seed, name, _fmt(t), _fmt(p), _fmt(r)] for t, p, r in rep.pr_points]
        fprs = {cid: [rep.per_creator[cid]["fpr"] for rep in reps] for cid in reps[0].per_creator}
        entry = {"seeds": [r.seed for r in reps],
                 "per_creator_fpr_mean": {c: sum(v) / len(v) for c, v in fprs.items()}}
        if len(reps) >= 2:
            agg = evaluation.aggregate_seeds(reps)
            entry.update(mean=agg.mean, std=agg.std,
                         ci95={k: list(v) for k, v in agg.ci95.items()})
        else:
            entry.update(mean={k: reps[0].pooled[k] for k in evaluation.METRICS}, std=None,
                         ci95=None)
        summary[name] = entry
        log.info("%s: F1 %.3f AUPR %.3f over %d seed(s)", name, entry["mean"]["f1"],
                 entry["mean"]["aupr"], len(reps))
        emit({"command": "eval", "variant": name, "seeds": len(reps),
              "mean": entry["mean"], "std": entry["std"]})
    persistence.write_bytes(out / "results.csv", _csv_bytes(RESULT_FIELDS, rows))
    persistence.write_bytes(out / "pr_curve.csv",
                            _csv_bytes(["seed", "variant", "threshold", "precision", "recall"],
                                       curve_rows))
    if cfg["eval"]["robustness"]:
        rob = []
        for seed, dets in result["detectors"].items():
            table = evaluation.robustness_sweep(dets, manifest, cfg["eval"]["noise_sigmas"],
                                                cfg["eval"]["noise_seed"])
            rob += [[seed, _fmt(s), _fmt(f)] for s, f in table]
            emit({"command": "eval", "robustness": [{"sigma": s, "f1": f} for s, f in table],
                  "seed": seed})
        persistence.write_bytes(out / "robustness.csv", _csv_bytes(["seed", "sigma", "f1"], rob))
    persistence.write_bytes(out / "summary.json", persistence.dump_json(summary))
    return 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "calibrate": cmd_calibrate,
            "score": cmd_score, "eval": cmd_eval}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="dataset seed for gen; training seed otherwise")
    common.add_argument("--out", help="output directory (default qbar_run)")
    common.add_argument("--creator", help="restrict to one creator id")
    common.add_argument("--quiet", action="store_true", help="only errors on stderr")
    common.add_argument("--manifest", help="manifest path (default <out>/data/manifest.json)")

    parser = argparse.ArgumentParser(prog="qbar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    p = sub.add_parser("train", parents=[common], help="train per-creator detectors")
    p.add_argument("--seeds", help="comma-separated training seeds")
    p.add_argument("--epochs", type=int)
    p = sub.add_parser("calibrate", parents=[common], help="pick (gamma, tau) on validation")
    p.add_argument("--seeds")
    p.add_argument("--checkpoint")
    p = sub.add_parser("score", parents=[common], help="score one embedding file")
    p.add_argument("--checkpoint")
    p.add_argument("--embedding")
    p = sub.add_parser("eval", parents=[common], help="evaluate test splits over seeds")
    p.add_argument("--seeds")
    p.add_argument("--gamma-ablation", action="store_true")
    p.add_argument("--robustness", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        level = logging.ERROR if cfg.quiet else logging.INFO
        logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr, force=True)
        log.debug("kernel backend: %s", BACKEND)
        return COMMANDS[args.command](cfg)
    except QbarError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
