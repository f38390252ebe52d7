"""Microbenchmark for classification-head forward passes.

Times the matmul-style heads against the per-class-loop heads at large
class counts, which is where the loop hurts.  Medians over repeated runs
after warmups; the broadcast variant of the loop heads is timed only while
its (batch, classes, n) transient stays under a float cap, but its size is
always reported.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .layers import baseline_mlr_logits, baseline_mlr_logits_broadcast, broadcast_transient_floats
from .trainer import EmbedConfig, embed, head_logits, make_head

MATMUL_KINDS = (
    "euclidean_mlr",
    "poincare_reparam_mlr",
    "lorentz_hyperplane_mlr",
    "bmlr_poincare",
    "bmlr_lorentz",
)
LOOP_KINDS = ("poincare_hyperplane_mlr", "poincare_pseudo_busemann_mlr")

# 2^24 floats = 128 MiB per transient; the broadcast path allocates a few.
DEFAULT_FLOAT_CAP = 2**24


@dataclass
class BenchRow:
    kind: str
    path: str
    classes: int
    median_s: float | None
    repeats: int
    transient_floats: int | None = None


def _median_time(fn, warmups: int, repeats: int) -> float:
    for _ in range(warmups):
        fn()
    times = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        times.append(time.perf_counter() - started)
    return statistics.median(times)


def run_bench(
    n: int = 512,
    classes_list: tuple = (100, 1000),
    batch: int = 128,
    repeats: int = 11,
    warmups: int = 3,
    seed: int = 0,
    k: float = -1.0,
    float_cap: int = DEFAULT_FLOAT_CAP,
) -> list[BenchRow]:
    if repeats < 11:
        repeats = 11
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((batch, n))
    features /= np.maximum(1.0, np.linalg.norm(features, axis=1, keepdims=True))
    inputs = {
        "euclidean": features,
        "poincare": embed(features, EmbedConfig("poincare", k)),
        "lorentz": embed(features, EmbedConfig("lorentz", k)),
    }
    rows: list[BenchRow] = []
    for classes in classes_list:
        for kind in MATMUL_KINDS:
            params = make_head(kind, k, n, classes, seed=seed)
            X = inputs[getattr(params, "model", "euclidean")]
            med = _median_time(lambda: head_logits(params, X), warmups, repeats)
            rows.append(BenchRow(kind, "matmul", classes, med, repeats))
        for kind in LOOP_KINDS:
            params = make_head(kind, k, n, classes, seed=seed)
            X = inputs["poincare"]
            med = _median_time(lambda: baseline_mlr_logits(params, X), warmups, repeats)
            rows.append(BenchRow(kind, "loop", classes, med, repeats))
            transient = broadcast_transient_floats(batch, classes, n)
            if transient <= float_cap:
                med_b = _median_time(
                    lambda: baseline_mlr_logits_broadcast(params, X), warmups, repeats
                )
            else:
                med_b = None
            rows.append(BenchRow(kind, "broadcast", classes, med_b, repeats, transient))
    return rows


def format_bench(rows: list[BenchRow]) -> str:
    lines = ["kind,path,classes,median_seconds,repeats,transient_floats"]
    for r in rows:
        med = f"{r.median_s:.6f}" if r.median_s is not None else "skipped"
        transient = str(r.transient_floats) if r.transient_floats is not None else ""
        lines.append(f"{r.kind},{r.path},{r.classes},{med},{r.repeats},{transient}")
    return "\n".join(lines)
