"""Replicated simulation experiments: detection rates and test size.

Every replicate ``i`` of an experiment with master seed ``s`` is simulated
from its own seed derived from ``(s, i)``, so replicates can run in any order
or in parallel (``DEPTHSCAN_THREADS`` worker processes, 0 = all cores) and
still aggregate to identical summaries.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import ModelSpec, OutOfRange
from .detect import DetectConfig, detect
from .shapetest import existence_test
from .simulate import generate, replicate_seed

__all__ = [
    "DetectionMetrics",
    "ExperimentResult",
    "SCALES",
    "BENCH_CONFIG",
    "REPRODUCTION_CONFIG",
    "metrics",
    "run_detection_experiment",
    "run_type1_experiment",
    "run_sensitivity_a1",
    "run_sensitivity_a2",
    "benchmark_table",
]

# Shape rule on the full sample, as in the simulation tables.
BENCH_CONFIG = DetectConfig(factor_shape=3.0, magnitude=False)

# Settings under which the published proposed-method rows are matched
# closely: p = 100 grid points and a 1.5 x IQR fence.
REPRODUCTION_CONFIG = DetectConfig(factor_shape=1.5, magnitude=False)
REPRODUCTION_P = 100

SCALES = {
    "desk": {"replicates": 100, "n": 100, "p": 50},
    "paper": {"replicates": 500, "n": 100, "p": 50},
}


@dataclass(frozen=True)
class DetectionMetrics:
    """True/false positive rates of one replicate, in percent.

    ``tpr`` is ``None`` without true outliers and ``fpr`` is ``None``
    without inliers.
    """

    tpr: Optional[float]
    fpr: Optional[float]

    def to_dict(self) -> dict:
        return {"tpr": self.tpr, "fpr": self.fpr}

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionMetrics":
        return cls(d["tpr"], d["fpr"])


def metrics(flags, truth, n: int) -> DetectionMetrics:
    """Percentages of true outliers flagged and of inliers flagged."""
    flags = {int(i) for i in flags}
    truth = {int(i) for i in truth}
    if not flags | truth <= set(range(n)):
        raise OutOfRange("indices must lie in range(n)")
    tpr = 100.0 * len(flags & truth) / len(truth) if truth else None
    fpr = 100.0 * len(flags - truth) / (n - len(truth)) if n > len(truth) else None
    return DetectionMetrics(tpr, fpr)


def _mean_sd(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    mean = math.fsum(values) / len(values)
    if len(values) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


@dataclass(frozen=True)
class ExperimentResult:
    """Per-replicate rates and their mean and sd (``n - 1`` denominator).

    Replicates without true outliers are left out of the TPR summary.
    """

    per_replicate: tuple
    spec: ModelSpec
    replicates: int
    mean_tpr: Optional[float] = field(init=False)
    sd_tpr: Optional[float] = field(init=False)
    mean_fpr: Optional[float] = field(init=False)
    sd_fpr: Optional[float] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "per_replicate", tuple(self.per_replicate))
        mt, st = _mean_sd(m.tpr for m in self.per_replicate)
        mf, sf = _mean_sd(m.fpr for m in self.per_replicate)
        object.__setattr__(self, "mean_tpr", mt)
        object.__setattr__(self, "sd_tpr", st)
        object.__setattr__(self, "mean_fpr", mf)
        object.__setattr__(self, "sd_fpr", sf)

    def to_dict(self) -> dict:
        return {
            "per_replicate": [m.to_dict() for m in self.per_replicate],
            "spec": self.spec.to_dict(),
            "replicates": self.replicates,
            "mean_tpr": self.mean_tpr,
            "sd_tpr": self.sd_tpr,
            "mean_fpr": self.mean_fpr,
            "sd_fpr": self.sd_fpr,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        return cls(
            [DetectionMetrics.from_dict(m) for m in d["per_replicate"]],
            ModelSpec.from_dict(d["spec"]),
            d["replicates"],
        )


def _workers() -> int:
    raw = os.environ.get("DEPTHSCAN_THREADS", "1").strip() or "1"
    count = int(raw)
    return os.cpu_count() or 1 if count <= 0 else count


def _map(fn, items):
    items = list(items)
    workers = min(_workers(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _int_seed(seed: int, index: int) -> int:
    return int(replicate_seed(seed, index).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _detection_replicate(args):
    spec, config, index = args
    rep = spec.replace(seed=_int_seed(spec.seed, index))
    labeled = generate(rep)
    report = detect(labeled.sample, config)
    return metrics(report.outlier_indices, labeled.outlier_indices, labeled.sample.n)


def run_detection_experiment(spec: ModelSpec, replicates: int = 100, seed: int = None,
                             config: DetectConfig = BENCH_CONFIG) -> ExperimentResult:
    """Simulate ``replicates`` samples of ``spec`` and score the detector on each.

    ``seed`` overrides ``spec.seed`` as the master seed.  All flagged curves
    (magnitude and shape) count as detections.
    """
    if replicates < 1:
        raise OutOfRange("replicates must be at least 1")
    if seed is not None:
        spec = spec.replace(seed=int(seed))
    per = _map(_detection_replicate, [(spec, config, i) for i in range(replicates)])
    return ExperimentResult(per, spec, replicates)


def _type1_replicate(args):
    spec, alphas, B, index = args
    rep_seed = _int_seed(spec.seed, index)
    sample = generate(spec.replace(seed=rep_seed)).sample
    results = existence_test(sample, B=B, seed=rep_seed, alphas=alphas)
    return [r.reject for r in results]


def run_type1_experiment(n: int = 100, alpha=0.05, replications: int = 200, B: int = 250,
                         seed: int = 0, p: int = 50, spec: ModelSpec = None):
    """Rejection rate of :func:`existence_test` over simulated samples.

    Samples default to the clean U1 base process (``theta = 0``); pass
    ``spec`` to study power instead.  ``alpha`` may be a sequence, in which
    case a ``{alpha: rate}`` dict is returned from one shared set of
    bootstrap draws per replication.
    """
    if replications < 1:
        raise OutOfRange("replications must be at least 1")
    alphas = [alpha] if np.isscalar(alpha) else list(alpha)
    if spec is None:
        spec = ModelSpec("U1", n=n, p=p, theta=0.0, seed=seed)
    else:
        spec = spec.replace(seed=seed)
    rejects = np.array(_map(_type1_replicate, [(spec, alphas, B, i) for i in range(replications)]))
    rates = {a: float(rejects[:, j].mean()) for j, a in enumerate(alphas)}
    return rates[alphas[0]] if np.isscalar(alpha) else rates


def run_sensitivity_a1(k_values: Sequence[float] = (2, 4, 6), mu_values: Sequence[float] = (0.1, 0.5, 0.7),
                       replicates: int = 100, seed: int = 0, n: int = 100, p: int = 50,
                       config: DetectConfig = BENCH_CONFIG) -> dict:
    """U1 detection rates with outlier covariance ``k exp(-|s-t|^mu)``.

    Returns ``{(k, mu): ExperimentResult}`` ordered mu-major as in the
    published layout.
    """
    out = {}
    for mu in mu_values:
        for k in k_values:
            spec = ModelSpec("U1", n=n, p=p, theta=0.1, seed=seed, overrides={"k": k, "mu": mu, "c": 1.0})
            out[(k, mu)] = run_detection_experiment(spec, replicates, config=config)
    return out


def run_sensitivity_a2(theta_values: Sequence[float] = (0.1, 0.15, 0.2, 0.25, 0.3),
                       models: Sequence[str] = ("U1", "U2", "U3", "U4", "U5"),
                       replicates: int = 100, seed: int = 0, n: int = 100, p: int = 50,
                       config: DetectConfig = BENCH_CONFIG) -> dict:
    """Detection rates per ``(model, theta)`` for increasing contamination."""
    out = {}
    for model in models:
        for theta in theta_values:
            spec = ModelSpec(model, n=n, p=p, theta=theta, seed=seed)
            out[(model, theta)] = run_detection_experiment(spec, replicates, config=config)
    return out


def _cell(mean, sd) -> str:
    if mean is None:
        return "NA"
    return f"{mean:.2f} ({sd:.2f})"


def benchmark_table(table: str, replicates: int = None, scale: str = "desk", seed: int = 0,
                    config: DetectConfig = BENCH_CONFIG, p: int = None, B: int = None,
                    replications: int = None) -> list:
    """Rows (header first) of one results table for the proposed method.

    ``table`` is one of ``"1"``, ``"2"``, ``"3"``, ``"a1"``, ``"a2"``.
    Cells read ``"mean (sd)"`` in percent with two decimals, except the
    type-I table, which lists rejection rates.
    """
    if scale not in SCALES:
        raise OutOfRange(f"scale must be one of {sorted(SCALES)}")
    settings = dict(SCALES[scale])
    if replicates is not None:
        if replicates < 1:
            raise OutOfRange("replicates must be at least 1")
        settings["replicates"] = replicates
    if p is not None:
        settings["p"] = p
    reps, n, grid_p = settings["replicates"], settings["n"], settings["p"]

    if table in ("1", "2"):
        models = ("U1", "U2", "U3", "U4", "U5") if table == "1" else ("M1", "M2", "M3")
        header, row = ["method"], ["proposed"]
        for i, model in enumerate(models, start=1):
            res = run_detection_experiment(ModelSpec(model, n=n, p=grid_p, theta=0.1, seed=seed), reps,
                                           config=config)
            header += [f"Model {i} TPR", f"Model {i} FPR"]
            row += [_cell(res.mean_tpr, res.sd_tpr), _cell(res.mean_fpr, res.sd_fpr)]
        return [header, row]

    if table == "3":
        alphas = (0.01, 0.05, 0.10)
        if scale == "paper":
            sizes, reps3, b = (1000,), 1000, 500
        else:
            sizes, reps3, b = (n,), 200, 250
        reps3 = replications or (replicates if replicates is not None else reps3)
        b = B or b
        rows = [["n"] + [f"alpha={a:.2f}" for a in alphas]]
        for size in sizes:
            rates = run_type1_experiment(size, alphas, reps3, b, seed, p=grid_p)
            rows.append([str(size)] + [f"{rates[a]:.4f}" for a in alphas])
        return rows

    if table == "a1":
        res = run_sensitivity_a1(replicates=reps, seed=seed, n=n, p=grid_p, config=config)
        keys = sorted(res, key=lambda km: (km[1], km[0]))
        rows = [["(k,mu)"] + [f"({k:g},{mu:g})" for k, mu in keys]]
        rows.append(["TPR"] + [f"{res[key].mean_tpr:.2f}" for key in keys])
        rows.append(["sd"] + [f"{res[key].sd_tpr:.2f}" for key in keys])
        rows.append(["FPR"] + [f"{res[key].mean_fpr:.2f}" for key in keys])
        rows.append(["sd"] + [f"{res[key].sd_fpr:.2f}" for key in keys])
        return rows

    if table == "a2":
        thetas = (0.1, 0.15, 0.2, 0.25, 0.3)
        models = ("U1", "U2", "U3", "U4", "U5")
        res = run_sensitivity_a2(thetas, models, reps, seed, n=n, p=grid_p, config=config)
        header = ["rate", "theta"] + [f"Model {i}" for i in range(1, 6)]
        rows = [header]
        for rate in ("TPR", "FPR"):
            for theta in thetas:
                cells = []
                for model in models:
                    r = res[(model, theta)]
                    cells.append(_cell(r.mean_tpr, r.sd_tpr) if rate == "TPR" else _cell(r.mean_fpr, r.sd_fpr))
                rows.append([rate, f"{theta:g}"] + cells)
        return rows

    raise OutOfRange(f"unknown table {table!r}; expected 1, 2, 3, a1 or a2")
