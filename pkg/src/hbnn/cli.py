"""Command-line driver: gen, train, eval, verify, bench, flops.

Configuration comes from an optional key=value text file (one pair per
line, # comments) given as --config=PATH, overridden by --key=value flags.
Every key is validated against the command's schema; unknown keys are hard
errors.  Exit codes: 0 ok, 1 property failure, 2 config error, 3 numeric
error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .costs import FC_KINDS, MLR_KINDS, flop_count, param_count
from .datasets import load_csv, make_blobs, make_tree, save_csv
from .errors import NumericError, UsageError
from .serialize import load_params, save_params
from .trainer import (
    HEAD_KINDS,
    EmbedConfig,
    OptimConfig,
    evaluate,
    make_head,
    train,
)
from .verify import SUITES, format_report, run_suites

_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _parse_value(key: str, spec: tuple, text: str):
    kind = spec[0]
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            return _BOOL[text.lower()]
        if kind == "ints":
            return tuple(int(part) for part in text.split(",") if part != "")
        return text
    except (ValueError, KeyError):
        raise UsageError(f"bad value for {key!r}: {text!r} (expected {kind})") from None


_SCHEMAS = {
    "gen": {
        "kind": ("str", None, ("blobs", "tree")),
        "classes": ("int", 2, None),
        "points": ("int", 200, None),
        "n": ("int", 2, None),
        "seed": ("int", 0, None),
        "out": ("str", None, None),
        "radius": ("float", 2.0, None),
        "spread": ("float", 0.35, None),
        "depth": ("int", 4, None),
        "step": ("float", 1.0, None),
        "noise": ("float", 0.25, None),
    },
    "train": {
        "data": ("str", None, None),
        "head": ("str", "bmlr_lorentz", HEAD_KINDS),
        "k": ("float", -1.0, None),
        "clip_r": ("float", 1.0, None),
        "algorithm": ("str", "adam", ("sgd", "adam")),
        "lr": ("float", 1e-2, None),
        "weight_decay": ("float", 0.0, None),
        "momentum": ("float", 0.9, None),
        "epochs": ("int", 200, None),
        "batch_size": ("int", 32, None),
        "milestones": ("ints", (), None),
        "gamma": ("float", 0.1, None),
        "seed": ("int", 0, None),
        "out_dir": ("str", "run", None),
    },
    "eval": {
        "model": ("str", None, None),
        "data": ("str", None, None),
        "out": ("str", "", None),
    },
    "verify": {
        "suite": ("str", "all", SUITES + ("all",)),
        "seed": ("int", 0, None),
    },
    "bench": {
        "n": ("int", 512, None),
        "classes": ("ints", (100, 1000), None),
        "batch": ("int", 128, None),
        "repeats": ("int", 11, None),
        "seed": ("int", 0, None),
        "k": ("float", -1.0, None),
        "out": ("str", "", None),
    },
    "flops": {
        "n": ("int", 512, None),
        "classes": ("int", 1000, None),
        "m": ("int", 16, None),
    },
}


def _load_config_file(path: str) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def _resolve(command: str, argv: list[str]) -> dict:
    schema = _SCHEMAS[command]
    raw: dict[str, str] = {}
    overrides: dict[str, str] = {}
    for arg in argv:
        if not arg.startswith("--") or "=" not in arg:
            raise UsageError(f"expected --key=value, got {arg!r}")
        key, _, value = arg[2:].partition("=")
        if key == "config":
            raw.update(_load_config_file(value))
        else:
            overrides[key] = value
    raw.update(overrides)
    settings = {}
    for key, value in raw.items():
        if key not in schema:
            raise UsageError(f"unknown key {key!r} for command {command!r}")
        settings[key] = _parse_value(key, schema[key], value)
    for key, spec in schema.items():
        if key not in settings:
            if spec[1] is None:
                raise UsageError(f"missing required key {key!r} for command {command!r}")
            settings[key] = spec[1]
        choices = spec[2]
        if choices is not None and settings[key] not in choices:
            raise UsageError(
                f"{key!r} must be one of {tuple(choices)}, got {settings[key]!r}"
            )
    return settings


def _cmd_gen(cfg: dict) -> int:
    if cfg["kind"] == "blobs":
        X, labels = make_blobs(
            cfg["classes"], cfg["points"], cfg["n"], cfg["seed"],
            radius=cfg["radius"], spread=cfg["spread"],
        )
    else:
        X, labels = make_tree(
            cfg["classes"], cfg["points"], cfg["n"], cfg["seed"],
            depth=cfg["depth"], step=cfg["step"], noise=cfg["noise"],
        )
    save_csv(cfg["out"], X, labels)
    print(f"wrote {X.shape[0]} rows, {cfg['classes']} classes to {cfg['out']}")
    return 0


def _embed_config(params, k: float, clip_r: float) -> EmbedConfig | None:
    if params.kind == "euclidean_mlr":
        return None
    return EmbedConfig(params.model, k, clip_r)


def _cmd_train(cfg: dict) -> int:
    X, labels = load_csv(cfg["data"])
    classes = int(labels.max()) + 1
    params = make_head(cfg["head"], cfg["k"], X.shape[1], classes, seed=cfg["seed"])
    ocfg = OptimConfig(
        algorithm=cfg["algorithm"], lr=cfg["lr"], weight_decay=cfg["weight_decay"],
        momentum=cfg["momentum"], epochs=cfg["epochs"], batch_size=cfg["batch_size"],
        milestones=cfg["milestones"], gamma=cfg["gamma"], seed=cfg["seed"],
    )
    embed_cfg = _embed_config(params, cfg["k"], cfg["clip_r"])
    result = train(params, X, labels, ocfg, embed_cfg)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.jsonl", "w") as fh:
        for entry in result.history:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    with open(out_dir / "timings.jsonl", "w") as fh:
        for epoch, seconds in enumerate(result.timings):
            fh.write(json.dumps({"epoch": epoch, "seconds": seconds}) + "\n")
    save_params(out_dir / "model.hbnn", params, extra={"clip_r": cfg["clip_r"]})
    final = result.history[-1]
    print(json.dumps(final, sort_keys=True))
    return 0


def _cmd_eval(cfg: dict) -> int:
    params, meta = load_params(cfg["model"])
    X, labels = load_csv(cfg["data"])
    clip_r = meta.get("extra", {}).get("clip_r", 1.0)
    embed_cfg = _embed_config(params, params.k, clip_r)
    report = evaluate(params, X, labels, embed_cfg)
    text = json.dumps(report, sort_keys=True)
    print(text)
    if cfg["out"]:
        Path(cfg["out"]).write_text(text + "\n")
    return 0


def _cmd_verify(cfg: dict) -> int:
    results = run_suites(cfg["suite"], seed=cfg["seed"])
    print(format_report(results))
    return 0 if all(r.passed for r in results) else 1


def _cmd_bench(cfg: dict) -> int:
    rows = bench_mod.run_bench(
        n=cfg["n"], classes_list=cfg["classes"], batch=cfg["batch"],
        repeats=cfg["repeats"], seed=cfg["seed"], k=cfg["k"],
    )
    text = bench_mod.format_bench(rows)
    print(text)
    if cfg["out"]:
        Path(cfg["out"]).write_text(text + "\n")
    return 0


def _cmd_flops(cfg: dict) -> int:
    n, classes, m = cfg["n"], cfg["classes"], cfg["m"]
    print(f"classification heads at n={n}, C={classes}")
    print(f"{'kind':<34}{'flops':>14}{'params':>14}")
    for kind in MLR_KINDS:
        print(f"{kind:<34}{flop_count(kind, n, classes):>14}{param_count(kind, n, classes):>14}")
    print(f"\nfully connected layers at n={n}, m={m}")
    print(f"{'kind':<34}{'flops':>14}{'params':>14}")
    for kind in FC_KINDS:
        print(f"{kind:<34}{flop_count(kind, n, m):>14}{param_count(kind, n, m):>14}")
    print(f"{'lorentz_tangent_fc':<34}{'-':>14}{param_count('lorentz_tangent_fc', n, m):>14}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "verify": _cmd_verify,
    "bench": _cmd_bench,
    "flops": _cmd_flops,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__.strip())
        print("\ncommands:", ", ".join(_COMMANDS))
        return 0
    command, rest = argv[0], argv[1:]
    if command not in _COMMANDS:
        print(f"error: unknown command {command!r}", file=sys.stderr)
        return 2
    try:
        cfg = _resolve(command, rest)
        return _COMMANDS[command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
