"""Experiment configuration, replicate runner and trace serialisation.

A run is the two-mode Gaussian benchmark: optimise the weights of a
J-component smoothed mixture against the target

    target_scale * [0.5 N(-s 1_d, I_d) + 0.5 N(+s 1_d, I_d)]

with T alternating phases of N descent steps and one exploration move.
Replicate r draws everything from the stream (seed, r), so replicates are
reproducible, mutually independent and safe to run concurrently.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import MISSING, asdict, dataclass, fields

import numpy as np

from .descent import ALGORITHMS, DescentTrace, GuardViolation, run_descent
from .divergence import DescentParams
from .explore import explore_mean_update, explore_resample
from .gradient import MixtureState
from .model import GaussianKernel, GaussianMixtureTarget, ParticleSet, bandwidth_rule

__all__ = [
    "CSV_HEADER",
    "EXPLORATIONS",
    "ExperimentConfig",
    "build_target",
    "parse_config",
    "read_trace_csv",
    "replicate_rng",
    "run_experiment",
    "run_replicate",
    "write_trace",
]

EXPLORATIONS = ("resample", "mean_update")

CSV_HEADER = ["t", "n", "vr_bound", "psi_exact", "guard_min", "elapsed_ms"]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; every field has a CLI flag of the same name.

    ``sample_count`` may list several batch sizes; the CLI runs one
    experiment per entry, while :func:`run_experiment` insists on a single
    one.
    """

    algorithm: str
    alpha: float
    step_size_base: float
    num_components: int
    sample_count: tuple
    num_steps: int
    num_phases: int
    dim: int
    replicates: int
    seed: int
    shift: float = 0.0
    diag_offset: float = 0.0
    target_separation: float = 2.0
    target_scale: float = 2.0
    init_cov_scale: float = 5.0
    bandwidth_coeff: float = 1.0
    exploration: str = "resample"
    renyi_unweighted_denominator: bool = False
    reuse_monitor_samples: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}"
            )
        if self.exploration not in EXPLORATIONS:
            raise ValueError(
                f"exploration must be one of {EXPLORATIONS}, got {self.exploration!r}"
            )
        counts = self.sample_count
        if isinstance(counts, (int, np.integer)):
            counts = (int(counts),)
        else:
            counts = tuple(int(m) for m in counts)
        if not counts or any(m < 1 for m in counts):
            raise ValueError(f"sample_count entries must be >= 1, got {counts}")
        object.__setattr__(self, "sample_count", counts)
        for name in ("num_components", "num_phases", "dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("num_steps", "replicates"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in (
            "step_size_base",
            "target_scale",
            "init_cov_scale",
            "bandwidth_coeff",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not isinstance(self.seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if self.alpha == 1.0 and self.algorithm in ("power", "renyi"):
            raise ValueError(f"alpha=1 is not valid for the {self.algorithm} update")
        if self.algorithm == "kl" and self.alpha != 1.0:
            raise ValueError("the kl algorithm is the alpha=1 update; set alpha to 1")
        if self.exploration == "mean_update" and not 0.0 <= self.alpha < 1.0:
            raise ValueError(
                f"mean_update exploration needs alpha in [0, 1), got {self.alpha}"
            )

    def descent_params(self):
        """Per-run parameters; the step size is ``step_size_base / sqrt(N)``."""
        eta = self.step_size_base / math.sqrt(max(self.num_steps, 1))
        return DescentParams(
            alpha=self.alpha,
            step_size=eta,
            shift=self.shift,
            diag_offset=self.diag_offset,
        )

    def single_sample_count(self):
        if len(self.sample_count) != 1:
            raise ValueError(
                f"config lists several sample counts {self.sample_count}; "
                "pick one per experiment (the CLI does this automatically)"
            )
        return self.sample_count[0]


_CONFIG_FIELDS = {f.name for f in fields(ExperimentConfig)}
_REQUIRED_FIELDS = {
    f.name
    for f in fields(ExperimentConfig)
    if f.default is MISSING and f.default_factory is MISSING
}


def parse_config(path):
    """Read and validate a JSON config file."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"config must be a JSON object, got {type(raw).__name__}")
    unknown = sorted(set(raw) - _CONFIG_FIELDS)
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
    missing = sorted(_REQUIRED_FIELDS - set(raw))
    if missing:
        raise ValueError(f"missing required config key(s): {', '.join(missing)}")
    return ExperimentConfig(**raw)


def config_dict(config):
    """Config as plain JSON-serialisable data."""
    out = asdict(config)
    out["sample_count"] = list(config.sample_count)
    return out


def build_target(config):
    """The benchmark target of the run: two symmetric modes, scaled."""
    offset = config.target_separation * np.ones(config.dim)
    return GaussianMixtureTarget(
        means=[-offset, offset], weights=(0.5, 0.5), scale=config.target_scale
    )


def replicate_rng(seed, index):
    """Independent generator for replicate ``index`` of a run seeded ``seed``."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    )


def run_replicate(config, index):
    """One full replicate; returns its trace, truncated on a guard violation."""
    rng = replicate_rng(config.seed, index)
    target = build_target(config)
    sample_count = config.single_sample_count()
    params = config.descent_params()
    j, d = config.num_components, config.dim
    kernel = GaussianKernel(bandwidth_rule(j, d, config.bandwidth_coeff), d)
    points = math.sqrt(config.init_cov_scale) * rng.standard_normal((j, d))
    particles = ParticleSet(points, 0)
    weights = np.full(j, 1.0 / j)

    trace = DescentTrace(status="completed", replicate=index)
    for phase in range(1, config.num_phases + 1):
        state = MixtureState(weights, particles, kernel)
        try:
            part = run_descent(
                state,
                params,
                config.algorithm,
                config.num_steps,
                target=target,
                sample_count=sample_count,
                rng=rng,
                reuse_monitor_samples=config.reuse_monitor_samples,
                unweighted_denominator=config.renyi_unweighted_denominator,
                phase=phase,
                record_initial=(phase == 1),
            )
        except GuardViolation as exc:
            trace.records.extend(exc.partial.records)
            trace.status = f"guard_violation: {exc}"
            return trace
        trace.records.extend(part.records)
        if part.records:
            weights = part.records[-1].weights
        if phase < config.num_phases:
            state = MixtureState(weights, particles, kernel)
            if config.exploration == "resample":
                particles = explore_resample(state, rng)
            else:
                particles = explore_mean_update(
                    state, target, sample_count, config.alpha, rng
                )
            kernel = GaussianKernel(bandwidth_rule(j, d, config.bandwidth_coeff), d)
            weights = np.full(j, 1.0 / j)
    nan_count = sum(1 for r in trace.records if math.isnan(r.vr_bound))
    if nan_count:
        trace.status = f"completed (nan_vr={nan_count})"
    return trace


def run_experiment(config, max_workers=None):
    """All replicates of one config, in replicate order.

    Replicates run on a thread pool by default; ``max_workers=1`` forces a
    serial run with byte-identical results.
    """
    count = config.replicates
    if count == 0:
        return []
    if max_workers is None:
        max_workers = min(count, os.cpu_count() or 1)
    if max_workers <= 1:
        return [run_replicate(config, r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda r: run_replicate(config, r), range(count)))


def _fmt(value):
    # repr round-trips float64 exactly; NaN and infinities appear verbatim.
    return repr(float(value))


def write_trace(traces, out_dir, config=None):
    """Write one CSV per replicate plus a cross-replicate summary.

    ``rep_<r>.csv`` columns are exactly ``t,n,vr_bound,psi_exact,guard_min,
    elapsed_ms``.  ``summary.json`` holds the config, the per-(t, n) mean
    and standard deviation of the VR bound over the replicates that reached
    that iteration, and the list of terminal statuses.
    """
    os.makedirs(out_dir, exist_ok=True)
    for i, trace in enumerate(traces):
        rep = trace.replicate if trace.replicate is not None else i
        with open(os.path.join(out_dir, f"rep_{rep}.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for rec in trace.records:
                writer.writerow(
                    [
                        rec.phase,
                        rec.step,
                        _fmt(rec.vr_bound),
                        _fmt(rec.objective),
                        _fmt(rec.guard_min),
                        _fmt(rec.elapsed_ms),
                    ]
                )
    grouped = {}
    for trace in traces:
        for rec in trace.records:
            grouped.setdefault((rec.phase, rec.step), []).append(rec.vr_bound)
    series = [
        {
            "t": t,
            "n": n,
            "vr_mean": float(np.mean(vals)),
            "vr_std": float(np.std(vals)),
        }
        for (t, n), vals in sorted(grouped.items())
    ]
    summary = {
        "config": config_dict(config) if config is not None else None,
        "series": series,
        "statuses": [trace.status for trace in traces],
    }
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
    return path


def read_trace_csv(path):
    """Read a replicate CSV back into a list of row dicts (floats parsed)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header!r} in {path}")
        rows = []
        for row in reader:
            rows.append(
                {
                    "t": int(row[0]),
                    "n": int(row[1]),
                    "vr_bound": float(row[2]),
                    "psi_exact": float(row[3]),
                    "guard_min": float(row[4]),
                    "elapsed_ms": float(row[5]),
                }
            )
    return rows
