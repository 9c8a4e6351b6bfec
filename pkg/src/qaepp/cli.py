"""``qaepp`` command line: data preparation, training, attacks, calibration, evaluation, reports.

Every subcommand reads one resolved configuration: built-in defaults, then the
YAML file given with ``--config``, then command-line flags. All artifacts live
under ``out_dir``::

    data/{train,validation,test}.qtc   prepared datasets (raw 28x28 bytes)
    checkpoints/{vqc,qae}.qtc          model checkpoints
    traces/{vqc,qae}.csv               per-epoch training traces
    attacks/<kind>_eps<e>.qtc          attacked evaluation sets
    attacks/mixed.qtc                  mixed clean/adversarial set
    threshold.json                     calibrated rejection threshold
    eval/results.json                  raw evaluation rows
    report/*.csv, report/summary.json  rendered tables

Exit codes: 0 success, 2 data or container error, 3 missing artifact,
4 invalid configuration.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from .attacks import AttackConfig, attack, fgsm_sweep
from .checkpoint import load_model, save_model
from .containers import ContainerError, array_sha256, dumps_json, file_sha256, read_container, write_container
from .data import (
    ATTACK_KINDS,
    EPSILONS,
    IDX_FILES,
    DataError,
    SplitSpec,
    build_mixed_set,
    load_dataset,
    load_idx_raw,
    split,
    subsample,
    write_desk_subset,
)
from .defense import ThresholdSpec, calibrate_threshold, logit_differences, outcome_counts
from .qae import QuantumAutoencoder
from .train import write_trace_csv
from .vqc import VQCClassifier, predict_from_logits

logger = logging.getLogger("qaepp")

DATA_ROOT_ENV = "QAEPP_DATA_ROOT"
DEFENSES = ("none", "qae", "qaepp")
KIND_CODES = {"clean": 0, "fgsm": 1, "pgd": 2}

DEFAULTS = {
    "dataset": "mnist",
    "out_dir": "runs/default",
    "workers": 1,
    "data": {"root": None, "split_seed": 0, "n_validation": 2000, "n_test": 8000, "train_size": None,
             "eval_size": None},
    "vqc": {"n_qubits": 10, "n_layers": 20, "batch_size": 256, "learning_rate": 0.005, "epochs": 20, "seed": 0},
    "qae": {"n_layers": 4, "n_trash": 2, "batch_size": 64, "learning_rate": 0.1, "epochs": 10, "seed": 0},
    "attacks": {"kinds": list(ATTACK_KINDS), "epsilons": list(EPSILONS), "pgd_steps": 10, "pgd_alpha": None},
    "defense": {"modes": list(DEFENSES), "delta": 0.05, "gamma": 0.01, "logit_population": "incorrect"},
    "mixed": {"enabled": True, "seed": 0, "kinds": list(ATTACK_KINDS), "epsilons": list(EPSILONS)},
}


class ConfigError(ValueError):
    pass


class MissingArtifact(FileNotFoundError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where}{key!r} must be a mapping")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def validate_config(cfg: dict) -> dict:
    _check(cfg["dataset"] in ("mnist", "fmnist"), f"dataset must be mnist or fmnist, got {cfg['dataset']!r}")
    _check(isinstance(cfg["workers"], int) and cfg["workers"] >= 1, "workers must be a positive integer")
    for section in ("vqc", "qae"):
        s = cfg[section]
        for key in ("n_layers", "batch_size", "epochs"):
            _check(isinstance(s[key], int) and s[key] >= (0 if key == "n_layers" else 1),
                   f"{section}.{key} must be a positive integer")
        _check(float(s["learning_rate"]) > 0, f"{section}.learning_rate must be > 0")
    _check(1 <= cfg["qae"]["n_trash"] < cfg["vqc"]["n_qubits"], "qae.n_trash must be in [1, n_qubits)")
    for section in ("attacks", "mixed"):
        kinds = cfg[section]["kinds"]
        _check(set(kinds) <= set(ATTACK_KINDS), f"{section}.kinds must be a subset of {ATTACK_KINDS}")
        _check(all(0 < float(e) <= 1 for e in cfg[section]["epsilons"]), f"{section}.epsilons must lie in (0, 1]")
    _check(cfg["attacks"]["pgd_steps"] >= 1, "attacks.pgd_steps must be >= 1")
    _check(set(cfg["defense"]["modes"]) <= set(DEFENSES), f"defense.modes must be a subset of {DEFENSES}")
    _check(cfg["defense"]["logit_population"] in ("incorrect", "all"),
           "defense.logit_population must be incorrect or all")
    d = cfg["data"]
    for key in ("n_validation", "n_test"):
        _check(isinstance(d[key], int) and d[key] >= 1, f"data.{key} must be a positive integer")
    for key in ("train_size", "eval_size"):
        _check(d[key] is None or (isinstance(d[key], int) and d[key] >= 1), f"data.{key} must be null or >= 1")
    return cfg


def _csv_list(cast):
    return lambda text: [cast(t) for t in text.split(",") if t.strip()]


# flag dest -> config path
_OVERRIDES = {
    "dataset": ("dataset",),
    "out_dir": ("out_dir",),
    "workers": ("workers",),
    "data_root": ("data", "root"),
    "n_validation": ("data", "n_validation"),
    "n_test": ("data", "n_test"),
    "train_size": ("data", "train_size"),
    "eval_size": ("data", "eval_size"),
    "vqc_layers": ("vqc", "n_layers"),
    "vqc_epochs": ("vqc", "epochs"),
    "qae_layers": ("qae", "n_layers"),
    "qae_trash": ("qae", "n_trash"),
    "qae_epochs": ("qae", "epochs"),
    "attacks": ("attacks", "kinds"),
    "epsilons": ("attacks", "epsilons"),
    "pgd_steps": ("attacks", "pgd_steps"),
    "defenses": ("defense", "modes"),
    "logit_population": ("defense", "logit_population"),
}


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        loaded = yaml.safe_load(path.read_text()) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        cfg = _merge(cfg, loaded)
    for dest, keys in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            target = cfg
            for k in keys[:-1]:
                target = target[k]
            target[keys[-1]] = value
    if getattr(args, "seed", None) is not None:
        for section, key in (("vqc", "seed"), ("qae", "seed"), ("data", "split_seed"), ("mixed", "seed")):
            cfg[section][key] = args.seed
    if cfg["data"]["root"] is None and os.environ.get(DATA_ROOT_ENV):
        cfg["data"]["root"] = os.environ[DATA_ROOT_ENV]
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# artifact helpers


class Run:
    """Paths and loaders for one output directory."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.out = Path(cfg["out_dir"])

    def path(self, *parts) -> Path:
        return self.out.joinpath(*parts)

    def require(self, path: Path) -> Path:
        if not path.exists():
            raise MissingArtifact(f"missing {path}; run the stage that produces it first")
        return path

    def dataset(self, name: str):
        return load_dataset(self.require(self.path("data", f"{name}.qtc")))

    def train_set(self):
        X, y, _ = self.dataset("train")
        d = self.cfg["data"]
        return subsample(X, y, d["train_size"], d["split_seed"], stream=1)

    def eval_set(self):
        X, y, _ = self.dataset("test")
        d = self.cfg["data"]
        return subsample(X, y, d["eval_size"], d["split_seed"], stream=2)

    def vqc(self):
        model, meta = load_model(self.require(self.path("checkpoints", "vqc.qtc")), "vqc", self.cfg["workers"])
        return model, meta

    def qae(self):
        model, meta = load_model(self.require(self.path("checkpoints", "qae.qtc")), "qae", self.cfg["workers"])
        return model, meta

    def threshold(self) -> ThresholdSpec:
        return ThresholdSpec.load(self.require(self.path("threshold.json")))

    def attack_path(self, kind: str, eps: float) -> Path:
        return self.path("attacks", f"{kind}_eps{eps:.2f}.qtc")


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_data(cfg: dict, args) -> int:
    if args.action == "desk-subset":
        out = Path(args.out or cfg["data"]["root"] or "data/desk")
        paths = write_desk_subset(out, n_test=args.subset_test, seed=args.subset_seed)
        for key, p in paths.items():
            print(f"{key}\t{p}\t{file_sha256(p)}")
        return 0
    if args.action == "inspect":
        for target in args.paths:
            arrays, meta = read_container(target)
            labels = arrays.get("labels")
            print(f"{target}")
            for name, arr in arrays.items():
                print(f"  {name}: dtype={arr.dtype} shape={tuple(arr.shape)}")
            if labels is not None:
                counts = np.bincount(labels.astype(int), minlength=10)
                print(f"  label_counts: {' '.join(str(int(c)) for c in counts)}")
            print(f"  content_sha256: {array_sha256(*arrays.values())}")
            print(f"  file_sha256: {file_sha256(target)}")
            print(f"  meta: {dumps_json(meta)}")
        return 0

    root = cfg["data"]["root"]
    if root is None:
        raise ConfigError(f"no dataset root; pass --data-root or set {DATA_ROOT_ENV}")
    root = Path(root)
    d = cfg["data"]
    train_img, train_lab = load_idx_raw(root / IDX_FILES["train_images"], root / IDX_FILES["train_labels"])
    test_img, test_lab = load_idx_raw(root / IDX_FILES["test_images"], root / IDX_FILES["test_labels"])
    order = np.arange(test_img.shape[0])
    (v_idx, _), (t_idx, _) = split(order, order, SplitSpec(d["split_seed"], d["n_validation"], d["n_test"]))
    sources = {k: file_sha256(_existing(root / v)) for k, v in IDX_FILES.items()}
    base = {"dataset": cfg["dataset"], "split_seed": d["split_seed"], "source_sha256": sources}
    out = {
        "train": (train_img, train_lab),
        "validation": (test_img[v_idx], test_lab[v_idx]),
        "test": (test_img[t_idx], test_lab[t_idx]),
    }
    for name, (img, lab) in out.items():
        path = Run(cfg).path("data", f"{name}.qtc")
        write_container(path, {"pixels": img, "labels": lab.astype(np.int64)},
                        {**base, "split": name, "n_samples": int(img.shape[0]),
                         "content_sha256": array_sha256(img, lab.astype(np.int64))})
        print(f"{name}\t{img.shape[0]}\t{path}")
    return 0


def _existing(path: Path) -> Path:
    if path.exists():
        return path
    gz = path.with_name(path.name + ".gz")
    return gz if gz.exists() else path


def cmd_train_vqc(cfg: dict, args) -> int:
    run = Run(cfg)
    X, y = run.train_set()
    Xe, ye = run.eval_set()
    v = cfg["vqc"]
    n_classes = 10
    model = VQCClassifier(n_qubits=v["n_qubits"], n_layers=v["n_layers"], n_classes=n_classes,
                          batch_size=v["batch_size"], learning_rate=float(v["learning_rate"]), epochs=v["epochs"],
                          seed=v["seed"], n_jobs=cfg["workers"])
    t0 = time.perf_counter()
    model.fit(X, y)
    logger.info("vqc trained in %.1f s", time.perf_counter() - t0)
    acc = float(np.mean(model.predict(Xe) == ye))
    save_model(run.path("checkpoints", "vqc.qtc"), model, dataset=cfg["dataset"], train_sha256=array_sha256(X, y),
               n_train=int(X.shape[0]), test_accuracy=acc)
    run.path("traces").mkdir(parents=True, exist_ok=True)
    write_trace_csv(run.path("traces", "vqc.csv"), model.trace_)
    print(f"vqc test_accuracy {acc:.4f} ({Xe.shape[0]} samples)")
    return 0


def cmd_train_qae(cfg: dict, args) -> int:
    run = Run(cfg)
    X, _ = run.train_set()
    Xe, _ = run.eval_set()
    q = cfg["qae"]
    model = QuantumAutoencoder(n_qubits=cfg["vqc"]["n_qubits"], n_layers=q["n_layers"], n_trash=q["n_trash"],
                               batch_size=q["batch_size"], learning_rate=float(q["learning_rate"]),
                               epochs=q["epochs"], seed=q["seed"], n_jobs=cfg["workers"])
    t0 = time.perf_counter()
    model.fit(X)
    logger.info("qae trained in %.1f s", time.perf_counter() - t0)
    fid = float(model.score_samples(Xe).mean())
    save_model(run.path("checkpoints", "qae.qtc"), model, dataset=cfg["dataset"], train_sha256=array_sha256(X),
               n_train=int(X.shape[0]), test_mean_fidelity=fid)
    run.path("traces").mkdir(parents=True, exist_ok=True)
    write_trace_csv(run.path("traces", "qae.csv"), model.trace_)
    print(f"qae test_mean_fidelity {fid:.4f}")
    return 0


def cmd_attack(cfg: dict, args) -> int:
    run = Run(cfg)
    clf, _ = run.vqc()
    X, y = run.eval_set()
    a = cfg["attacks"]
    source = array_sha256(X, y)
    model_sha = file_sha256(run.path("checkpoints", "vqc.qtc"))
    eps_list = [float(e) for e in a["epsilons"]]
    for kind in a["kinds"]:
        if kind == "fgsm":
            advs = fgsm_sweep(clf, X, y, eps_list)
        else:
            advs = {e: attack(clf, X, y, AttackConfig("pgd", e, a["pgd_steps"], a["pgd_alpha"])) for e in eps_list}
        for eps, adv in advs.items():
            meta = AttackConfig(kind, eps, a["pgd_steps"], a["pgd_alpha"]).metadata()
            path = run.attack_path(kind, eps)
            write_container(path, {"pixels": adv, "labels": y.astype(np.int64)},
                            {**meta, "source_sha256": source, "vqc_sha256": model_sha, "n_samples": int(len(y)),
                             "content_sha256": array_sha256(adv, y.astype(np.int64))})
            print(f"{kind}\t{eps:.2f}\t{path}")
    m = cfg["mixed"]
    if m["enabled"]:
        mixed = build_mixed_set(X, y, clf, seed=m["seed"], epsilons=[float(e) for e in m["epsilons"]],
                                kinds=m["kinds"], pgd_steps=a["pgd_steps"])
        codes = np.array([KIND_CODES[k] for k in mixed.kinds], dtype=np.int64)
        path = run.path("attacks", "mixed.qtc")
        write_container(path, {"pixels": mixed.X, "labels": mixed.y.astype(np.int64), "kind_codes": codes,
                               "epsilons": mixed.epsilons, "source_index": mixed.source_index.astype(np.int64)},
                        {"kind_codes": KIND_CODES, "seed": m["seed"], "source_sha256": source,
                         "vqc_sha256": model_sha, "pgd_steps": a["pgd_steps"], "n_samples": int(len(y))})
        print(f"mixed\t{len(y)}\t{path}")
    return 0


def cmd_thresholds(cfg: dict, args) -> int:
    run = Run(cfg)
    clf, _ = run.vqc()
    qae, _ = run.qae()
    X, y, _ = run.dataset("validation")
    recon, fid = qae.reconstruct(X)
    logits = clf.decision_function(recon)
    d = cfg["defense"]
    spec = calibrate_threshold(fid, logits, y, d["delta"], d["gamma"], d["logit_population"])
    spec.save(run.path("threshold.json"))
    print(f"threshold {spec.value:.6f} (fidelity {spec.fidelity_threshold:.6f}, logit {spec.logit_threshold:.6f})")
    return 0


def _evaluate_set(clf, qae, threshold, X, y) -> dict:
    pred_raw = clf.predict(X)
    recon, fid = qae.reconstruct(X)
    logits = clf.decision_function(recon)
    pred = predict_from_logits(logits)
    gaps = logit_differences(logits)
    accepted = fid + gaps / 2 >= threshold.value
    table = outcome_counts(accepted, y, pred)
    return {
        "accuracy": {"none": float(np.mean(pred_raw == y)), "qae": float(np.mean(pred == y)),
                     "qaepp": table.accuracy},
        "outcomes": table,
        "mean_fidelity": float(fid.mean()),
        "mean_logit_difference": float(gaps.mean()),
    }


def cmd_eval(cfg: dict, args) -> int:
    run = Run(cfg)
    clf, vmeta = run.vqc()
    qae, _ = run.qae()
    threshold = run.threshold()
    X, y = run.eval_set()
    modes = cfg["defense"]["modes"]
    sets = [("none", 0.0, X, y)]
    for kind in cfg["attacks"]["kinds"]:
        for eps in cfg["attacks"]["epsilons"]:
            Xa, ya, _ = load_dataset(run.require(run.attack_path(kind, float(eps))))
            sets.append((kind, float(eps), Xa, ya))
    table1, table2 = [], []
    for kind, eps, Xs, ys in sets:
        r = _evaluate_set(clf, qae, threshold, Xs, ys)
        for mode in modes:
            table1.append({"dataset": cfg["dataset"], "defense": mode, "attack": kind, "epsilon": eps,
                           "accuracy": r["accuracy"][mode], "n_samples": int(len(ys))})
        table2.append({"dataset": cfg["dataset"], "attack": kind, "epsilon": eps, **r["outcomes"].as_dict(),
                       "rejected": r["outcomes"].rejected, "mean_fidelity": r["mean_fidelity"],
                       "mean_logit_difference": r["mean_logit_difference"]})
        logger.info("%s eps=%.2f %s", kind, eps, r["accuracy"])
    table3 = []
    if cfg["mixed"]["enabled"]:
        arrays, _ = read_container(run.require(run.path("attacks", "mixed.qtc")))
        r = _evaluate_set(clf, qae, threshold, arrays["pixels"], arrays["labels"])
        for mode in modes:
            table3.append({"dataset": cfg["dataset"], "defense": mode, "accuracy": r["accuracy"][mode],
                           "n_samples": int(len(arrays["labels"]))})
        table3_outcomes = r["outcomes"].as_dict()
    else:
        table3_outcomes = None
    inputs = {name: file_sha256(run.path(*parts)) for name, parts in
              (("vqc", ("checkpoints", "vqc.qtc")), ("qae", ("checkpoints", "qae.qtc")),
               ("threshold", ("threshold.json",)), ("test", ("data", "test.qtc")))}
    results = {
        "dataset": cfg["dataset"],
        "checkpoint_test_accuracy": vmeta.get("test_accuracy"),
        "threshold": threshold.to_record(),
        "table1": table1,
        "table2": table2,
        "table3": table3,
        "table3_outcomes": table3_outcomes,
        "inputs_sha256": inputs,
    }
    _write_json(run.path("eval", "results.json"), results)
    print(f"eval rows: {len(table1)} accuracy, {len(table2)} outcome, {len(table3)} mixed")
    return 0


TABLE1_COLUMNS = ["dataset", "defense", "attack", "epsilon", "accuracy", "n_samples"]
TABLE2_COLUMNS = ["dataset", "attack", "epsilon", "correct_accept", "incorrect_reject", "incorrect_accept",
                  "correct_reject", "total", "rejected", "accuracy", "mean_fidelity", "mean_logit_difference"]
TABLE3_COLUMNS = ["dataset", "defense", "accuracy", "n_samples"]


def cmd_report(cfg: dict, args) -> int:
    run = Run(cfg)
    results_path = run.require(run.path("eval", "results.json"))
    results = json.loads(results_path.read_text())
    rep = run.path("report")
    table2 = []
    for row in results["table2"]:
        # the reported accuracy is always the one implied by the counts
        counts = [row[k] for k in ("correct_accept", "incorrect_reject", "incorrect_accept", "correct_reject")]
        table2.append({**row, "accuracy": (counts[0] + counts[1]) / sum(counts)})
    _write_csv(rep / "table1.csv", TABLE1_COLUMNS, results["table1"])
    _write_csv(rep / "table2.csv", TABLE2_COLUMNS, table2)
    _write_csv(rep / "table3.csv", TABLE3_COLUMNS, results["table3"])
    for kind in sorted({r["attack"] for r in results["table1"]} - {"none"}):
        clean = {r["defense"]: r["accuracy"] for r in results["table1"] if r["attack"] == "none"}
        rows = []
        for eps in [0.0] + sorted({r["epsilon"] for r in results["table1"] if r["attack"] == kind}):
            row = {"epsilon": eps}
            for mode in cfg["defense"]["modes"]:
                row[mode] = clean[mode] if eps == 0.0 else next(
                    r["accuracy"] for r in results["table1"]
                    if r["attack"] == kind and r["epsilon"] == eps and r["defense"] == mode)
            rows.append(row)
        _write_csv(rep / f"accuracy_vs_eps_{kind}.csv", ["epsilon", *cfg["defense"]["modes"]], rows)
    summary_cfg = {k: v for k, v in cfg.items() if k not in ("out_dir", "workers")}
    inputs = dict(results["inputs_sha256"])
    inputs["results"] = file_sha256(results_path)
    summary = {
        "config": summary_cfg,
        "inputs_sha256": inputs,
        "threshold": results["threshold"],
        "checkpoint_test_accuracy": results["checkpoint_test_accuracy"],
        "clean_accuracy": {r["defense"]: r["accuracy"] for r in results["table1"] if r["attack"] == "none"},
        "mixed_accuracy": {r["defense"]: r["accuracy"] for r in results["table3"]},
    }
    _write_json(rep / "summary.json", summary)
    print(f"report written to {rep}")
    return 0


def cmd_pipeline(cfg: dict, args) -> int:
    for stage in (cmd_train_vqc, cmd_train_qae, cmd_attack, cmd_thresholds, cmd_eval, cmd_report):
        stage(cfg, args)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML experiment config; flags override its values")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--dataset", choices=["mnist", "fmnist"])
    p.add_argument("--data-root", dest="data_root", help=f"directory with the IDX files (default ${DATA_ROOT_ENV})")
    p.add_argument("--workers", type=int, help="worker threads for per-sample work")
    p.add_argument("--seed", type=int, help="set every seed (training, split, mixed set)")
    p.add_argument("--n-validation", dest="n_validation", type=int, help="validation share of the test partition")
    p.add_argument("--n-test", dest="n_test", type=int, help="evaluation share of the test partition")
    p.add_argument("--train-size", dest="train_size", type=int)
    p.add_argument("--eval-size", dest="eval_size", type=int)
    p.add_argument("--vqc-layers", dest="vqc_layers", type=int)
    p.add_argument("--vqc-epochs", dest="vqc_epochs", type=int)
    p.add_argument("--qae-layers", dest="qae_layers", type=int)
    p.add_argument("--qae-trash", dest="qae_trash", type=int)
    p.add_argument("--qae-epochs", dest="qae_epochs", type=int)
    p.add_argument("--attacks", type=_csv_list(str), help="comma list of fgsm,pgd")
    p.add_argument("--epsilons", type=_csv_list(float), help="comma list of attack budgets")
    p.add_argument("--pgd-steps", dest="pgd_steps", type=int)
    p.add_argument("--defenses", type=_csv_list(str), help="comma list of none,qae,qaepp")
    p.add_argument("--logit-population", dest="logit_population", choices=["incorrect", "all"])
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qaepp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("data", help="prepare, inspect or export datasets")
    p.add_argument("action", choices=["prepare", "inspect", "desk-subset"])
    p.add_argument("paths", nargs="*", help="containers to inspect")
    p.add_argument("--out", help="desk-subset output directory")
    p.add_argument("--subset-test", dest="subset_test", type=int, default=1500, help="desk-subset test partition size")
    p.add_argument("--subset-seed", dest="subset_seed", type=int, default=0)
    _common(p)
    for name, help_text in (
        ("train-vqc", "train the classifier"),
        ("train-qae", "train the autoencoder"),
        ("attack", "write attacked evaluation sets and the mixed set"),
        ("thresholds", "calibrate the rejection threshold on validation data"),
        ("eval", "evaluate every defense on clean and attacked sets"),
        ("report", "render CSV tables and the JSON summary"),
        ("pipeline", "train-vqc, train-qae, attack, thresholds, eval and report in order"),
    ):
        _common(sub.add_parser(name, help=help_text))
    return parser


COMMANDS = {
    "data": cmd_data,
    "train-vqc": cmd_train_vqc,
    "train-qae": cmd_train_qae,
    "attack": cmd_attack,
    "thresholds": cmd_thresholds,
    "eval": cmd_eval,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (DataError, ContainerError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
