"""Scenario orchestration: strict JSON configs, seeded end-to-end runs,
deterministic reports.

Each scenario wires generator -> engine -> receiver(s) -> estimators and
grades the outcome against its frozen thresholds. A run is a pure
function of (config, seed): report.json and the CSV tables are
byte-identical across reruns. Wall-clock time is written to a separate
timing.txt sidecar so it never perturbs the deterministic outputs.

Replication fan-out (the only parallelism at this layer) splits
independent replications into fixed-size chunks, one derived RNG stream
per chunk; the HTIF_THREADS environment variable caps how many of those
chunks run concurrently. Chunk boundaries and merge order are fixed by
the config alone, so results do not depend on the thread count.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from numbers import Integral, Real
from pathlib import Path

import numpy as np

from .dynamics import (
    ReceiverConfig,
    abstract_walk_first_passage,
    output_independence_diagnostic,
    paired_isis,
    run_receiver,
    run_two_receivers,
)
from .engine import (
    NetworkTopology,
    build_event_stream,
    initial_residuals,
    tau_independence_diagnostic,
    write_events_csv,
)
from .errors import (
    ConfigError,
    InsufficientDataError,
    ModelExclusionError,
)
from .inputs import MODES, InputGeneratorSpec, generate_isi_chunk, validate_hypotheses
from .rv import RngHandle, TailModel
from .tailstats import (
    QUANTILE_GRID,
    equivalence_ratio,
    hill_estimate,
    hill_sweep,
    lag_exceedance_ratios,
    radial_rv_check,
    spectral_estimate,
    upper_tail_independence,
)

__all__ = [
    "SCENARIOS",
    "SCHEMA_VERSION",
    "GeneratorSettings",
    "TopologySettings",
    "WalkSettings",
    "ExperimentConfig",
    "RunReport",
    "parse_config",
    "config_from_mapping",
    "apply_overrides",
    "run_experiment",
    "thread_cap",
]

SCHEMA_VERSION = 1

# fixed order: the position doubles as the scenario's RNG stream id
SCENARIOS = (
    "hypothesis_audit",
    "forward_recurrence_rv",
    "tau_independence",
    "output_rv",
    "output_independence",
    "joint_mrv",
    "full_dependence",
    "walk_unit",
)

# frozen check thresholds (grading constants, not tunables)
HILL_TOLERANCE = 0.1
RECURRENCE_HILL_TOLERANCE = 0.07
EQUIVALENCE_BOUNDS = (0.5, 2.0)
INDEPENDENCE_QUANTILE = 0.999
INDEPENDENCE_THRESHOLD = 0.05
DEPENDENCE_THRESHOLD = 0.05
RADIAL_DEVIATION_LIMIT = 0.05
RADIAL_T_VALUES = (1.0, 2.0, 4.0)
WALK_MEAN_RELATIVE_TOLERANCE = 0.02
WALK_CROSSING_TOLERANCE = 0.003
REPLICATION_CHUNK = 25_000
SPIKE_BUDGET_SAFETY = 1.25

HILL_SWEEP_HEADER = ("series", "k", "alpha_hat", "ci_low", "ci_high")
DEPENDENCE_HEADER = ("series", "key", "quantile", "threshold", "value")
SPECTRAL_HEADER = ("bin", "left_edge", "mass")


def thread_cap() -> int:
    """Replication-parallelism cap from HTIF_THREADS (default 1)."""
    raw = os.environ.get("HTIF_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"HTIF_THREADS must be an integer, got {raw!r}")
    return max(1, value)


@dataclass(frozen=True)
class GeneratorSettings:
    """Input-law parameters; mirrors InputGeneratorSpec field-for-field."""

    n: int = 3
    alpha: float = 0.6
    scale: float = 1.0
    multiplier_lo: float = 0.5
    multiplier_hi: float = 2.0
    mode: str = "round_synchronized_common_shock"

    def to_spec(self) -> InputGeneratorSpec:
        return InputGeneratorSpec(
            n=self.n,
            tail=TailModel(alpha=self.alpha, scale=self.scale),
            multiplier_lo=self.multiplier_lo,
            multiplier_hi=self.multiplier_hi,
            mode=self.mode,
        )


@dataclass(frozen=True)
class TopologySettings:
    """Network wiring; empty pool tuples mean "the whole network"."""

    inhibitory: tuple[int, ...] = ()
    pool_a: tuple[int, ...] = ()
    pool_b: tuple[int, ...] = ()

    def to_topology(self, n: int) -> NetworkTopology:
        excitatory = tuple(i not in set(self.inhibitory) for i in range(n))
        return NetworkTopology(
            n=n, excitatory=excitatory, pool_a=self.pool_a, pool_b=self.pool_b
        )


@dataclass(frozen=True)
class WalkSettings:
    p: float = 0.7
    threshold: int = 10
    max_steps: int = 1_000_000


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    seed: int = 0
    sample_budget: int = 1
    output_dir: str = "."
    generator: GeneratorSettings = GeneratorSettings()
    topology: TopologySettings = TopologySettings()
    receivers: tuple[ReceiverConfig, ...] = ()
    walk: WalkSettings | None = None
    offsets: object = "zero"
    dump_events: bool = False
    schema_version: int = SCHEMA_VERSION

    def canonical(self) -> dict:
        """Experiment identity as plain JSON types.

        Presentation fields (output_dir, dump_events) are excluded: they
        do not affect any computed number.
        """
        doc = {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "seed": self.seed,
            "sample_budget": self.sample_budget,
            "generator": {
                "n": self.generator.n,
                "alpha": self.generator.alpha,
                "scale": self.generator.scale,
                "multiplier_lo": self.generator.multiplier_lo,
                "multiplier_hi": self.generator.multiplier_hi,
                "mode": self.generator.mode,
            },
            "topology": {
                "inhibitory": list(self.topology.inhibitory),
                "pool_a": list(self.topology.pool_a),
                "pool_b": list(self.topology.pool_b),
            },
            "receivers": [
                {"threshold": r.threshold, "pool": list(r.pool), "label": r.label}
                for r in self.receivers
            ],
            "walk": None
            if self.walk is None
            else {
                "p": self.walk.p,
                "threshold": self.walk.threshold,
                "max_steps": self.walk.max_steps,
            },
            "offsets": self.offsets
            if isinstance(self.offsets, str)
            else [float(v) for v in self.offsets],
        }
        return doc

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def rng(self) -> RngHandle:
        return RngHandle(self.seed, SCENARIOS.index(self.scenario))


_DEFAULTS: dict[str, dict] = {
    "hypothesis_audit": {
        "sample_budget": 1_000_000,
        "generator": {"n": 3, "multiplier_lo": 0.5, "multiplier_hi": 2.0},
    },
    "forward_recurrence_rv": {
        "sample_budget": 100_000,
        "generator": {"n": 3, "multiplier_lo": 0.5, "multiplier_hi": 2.0},
        "offsets": [1.0, 1.0, 1.0],
    },
    "tau_independence": {
        "sample_budget": 1_000_000,
        "generator": {"n": 5, "multiplier_lo": 0.5, "multiplier_hi": 2.0},
    },
    "output_rv": {
        "sample_budget": 100_000,
        "generator": {"n": 10, "multiplier_lo": 0.5, "multiplier_hi": 2.0},
        "topology": {"inhibitory": [8, 9]},
        "receivers": [{"threshold": 5, "label": "output"}],
    },
    "output_independence": {
        "sample_budget": 100_000,
        "generator": {"n": 10, "multiplier_lo": 1.0, "multiplier_hi": 1.0},
        "topology": {"inhibitory": [8, 9]},
        "receivers": [{"threshold": 5, "label": "output"}],
    },
    "joint_mrv": {
        "sample_budget": 60_000,
        "generator": {"n": 26, "multiplier_lo": 0.5, "multiplier_hi": 2.0},
        "topology": {
            "inhibitory": [4, 19],
            "pool_a": list(range(0, 14)),
            "pool_b": list(range(8, 26)),
        },
        "receivers": [
            {"threshold": 4, "pool": list(range(0, 14)), "label": "A"},
            {"threshold": 4, "pool": list(range(8, 26)), "label": "B"},
        ],
    },
    "walk_unit": {
        "sample_budget": 100_000,
        "walk": {"p": 0.7, "threshold": 10, "max_steps": 1_000_000},
    },
}
_DEFAULTS["full_dependence"] = _DEFAULTS["joint_mrv"]

_TOP_KEYS = {
    "schema_version",
    "scenario",
    "seed",
    "sample_budget",
    "output_dir",
    "generator",
    "topology",
    "receivers",
    "walk",
    "offsets",
    "dump_events",
}
_GENERATOR_KEYS = {"n", "alpha", "scale", "multiplier_lo", "multiplier_hi", "mode"}
_TOPOLOGY_KEYS = {"inhibitory", "pool_a", "pool_b"}
_RECEIVER_KEYS = {"threshold", "pool", "label"}
_WALK_KEYS = {"p", "threshold", "max_steps"}

_RECEIVER_SCENARIOS = {
    "output_rv": 1,
    "output_independence": 1,
    "joint_mrv": 2,
    "full_dependence": 2,
}
_TOPOLOGY_SCENARIOS = {
    "tau_independence",
    "output_rv",
    "output_independence",
    "joint_mrv",
    "full_dependence",
}


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key '{where}{key}'")


def _require_int(value, key: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ConfigError(f"'{key}' must be >= {minimum}, got {value}")
    return value


def _require_number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, Real):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ConfigError(f"'{key}' must be finite, got {value}")
    return value


def _index_tuple(value, key: str, n: int, allow_empty: bool) -> tuple[int, ...]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"'{key}' must be an array of neuron indices")
    if not value and not allow_empty:
        raise ConfigError(f"'{key}' must not be empty")
    out = tuple(_require_int(v, key, 0) for v in value)
    if len(set(out)) != len(out):
        raise ConfigError(f"'{key}' contains duplicate indices")
    for v in out:
        if v >= n:
            raise ConfigError(f"'{key}' index {v} out of range for n = {n}")
    return out


def _parse_generator(data: dict, defaults: dict) -> GeneratorSettings:
    _reject_unknown(data, _GENERATOR_KEYS, "generator.")
    merged = {**defaults, **data}
    n = _require_int(merged.get("n", 3), "generator.n", 1)
    alpha = _require_number(merged.get("alpha", 0.6), "generator.alpha")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(
            f"generator.alpha must lie in the open interval (0, 1), got {alpha}"
        )
    scale = _require_number(merged.get("scale", 1.0), "generator.scale")
    if scale <= 0.0:
        raise ConfigError(f"generator.scale must be positive, got {scale}")
    lo = _require_number(merged.get("multiplier_lo", 1.0), "generator.multiplier_lo")
    hi = _require_number(merged.get("multiplier_hi", 1.0), "generator.multiplier_hi")
    if not 0.0 < lo <= hi:
        raise ConfigError(
            f"multiplier bounds need 0 < multiplier_lo <= multiplier_hi, "
            f"got [{lo}, {hi}]"
        )
    mode = merged.get("mode", "round_synchronized_common_shock")
    if mode not in MODES:
        raise ConfigError(f"generator.mode must be one of {MODES}, got {mode!r}")
    return GeneratorSettings(
        n=n, alpha=alpha, scale=scale, multiplier_lo=lo, multiplier_hi=hi, mode=mode
    )


def _parse_topology(data: dict, defaults: dict, n: int) -> TopologySettings:
    _reject_unknown(data, _TOPOLOGY_KEYS, "topology.")
    merged = {**defaults, **data}
    # an explicitly configured empty pool is a contradiction; an absent
    # pool key means "the whole network"
    for key in ("pool_a", "pool_b"):
        if key in data and not data[key]:
            raise ConfigError(f"'topology.{key}' must not be empty")
    inhibitory = _index_tuple(
        merged.get("inhibitory", []), "topology.inhibitory", n, allow_empty=True
    )
    pool_a = _index_tuple(merged.get("pool_a", []), "topology.pool_a", n, True)
    pool_b = _index_tuple(merged.get("pool_b", []), "topology.pool_b", n, True)
    return TopologySettings(inhibitory=inhibitory, pool_a=pool_a, pool_b=pool_b)


def _parse_receivers(data: list, defaults: list, n: int) -> tuple[ReceiverConfig, ...]:
    source = data if data is not None else defaults
    if not isinstance(source, list):
        raise ConfigError("'receivers' must be an array of receiver objects")
    out = []
    for i, item in enumerate(source):
        if not isinstance(item, dict):
            raise ConfigError(f"'receivers[{i}]' must be an object")
        _reject_unknown(item, _RECEIVER_KEYS, f"receivers[{i}].")
        threshold = _require_int(
            item.get("threshold", 1), f"receivers[{i}].threshold", 1
        )
        if "pool" in item and not item["pool"]:
            raise ConfigError(
                f"'receivers[{i}].pool' must not be empty; omit it to listen "
                "to the whole network"
            )
        pool = _index_tuple(item.get("pool", []), f"receivers[{i}].pool", n, True)
        label = item.get("label", f"receiver_{i}")
        if not isinstance(label, str):
            raise ConfigError(f"'receivers[{i}].label' must be a string")
        out.append(ReceiverConfig(threshold=threshold, pool=pool, label=label))
    return tuple(out)


def _parse_walk(data: dict, defaults: dict) -> WalkSettings:
    _reject_unknown(data, _WALK_KEYS, "walk.")
    merged = {**defaults, **data}
    p = _require_number(merged.get("p", 0.7), "walk.p")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"walk.p must lie in [0, 1], got {p}")
    if p == 0.5:
        raise ModelExclusionError(
            "walk.p = 1/2 is excluded: the walk is null recurrent and the "
            "crossing-time constants are undefined"
        )
    threshold = _require_int(merged.get("threshold", 10), "walk.threshold", 1)
    max_steps = _require_int(merged.get("max_steps", 1_000_000), "walk.max_steps", 1)
    return WalkSettings(p=p, threshold=threshold, max_steps=max_steps)


def _parse_offsets(value, n: int):
    if isinstance(value, str):
        if value != "zero":
            raise ConfigError(f"'offsets' must be \"zero\" or an array, got {value!r}")
        return "zero"
    if not isinstance(value, (list, tuple)):
        raise ConfigError("'offsets' must be \"zero\" or an array of ages")
    if len(value) != n:
        raise ConfigError(f"'offsets' needs exactly n = {n} entries, got {len(value)}")
    out = tuple(_require_number(v, "offsets") for v in value)
    for v in out:
        if v < 0.0:
            raise ConfigError(f"'offsets' entries must be >= 0, got {v}")
    return out


def config_from_mapping(data: dict) -> ExperimentConfig:
    """Validate a config mapping against the strict schema."""
    if not isinstance(data, dict):
        raise ConfigError("config top level must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"'schema_version' {version!r} unsupported (expected {SCHEMA_VERSION})"
        )
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(
            f"'scenario' must be one of {', '.join(SCENARIOS)}; got {scenario!r}"
        )
    defaults = _DEFAULTS[scenario]

    seed = _require_int(data.get("seed", 0), "seed", 0)
    budget = _require_int(
        data.get("sample_budget", defaults["sample_budget"]), "sample_budget", 1
    )
    output_dir = data.get("output_dir", ".")
    if not isinstance(output_dir, str):
        raise ConfigError("'output_dir' must be a string path")
    dump_events = data.get("dump_events", False)
    if not isinstance(dump_events, bool):
        raise ConfigError("'dump_events' must be true or false")

    gen_user = data.get("generator", {})
    if not isinstance(gen_user, dict):
        raise ConfigError("'generator' must be an object")
    generator = _parse_generator(gen_user, defaults.get("generator", {}))

    if "topology" in data and scenario not in _TOPOLOGY_SCENARIOS:
        raise ConfigError(f"scenario '{scenario}' takes no 'topology' section")
    topo_user = data.get("topology", {})
    if not isinstance(topo_user, dict):
        raise ConfigError("'topology' must be an object")
    topology = _parse_topology(topo_user, defaults.get("topology", {}), generator.n)

    expected_receivers = _RECEIVER_SCENARIOS.get(scenario, 0)
    if "receivers" in data and expected_receivers == 0:
        raise ConfigError(f"scenario '{scenario}' takes no 'receivers' section")
    receivers = _parse_receivers(
        data.get("receivers"), defaults.get("receivers", []), generator.n
    )
    if len(receivers) != expected_receivers:
        raise ConfigError(
            f"scenario '{scenario}' needs exactly {expected_receivers} "
            f"receiver(s), got {len(receivers)}"
        )

    if "walk" in data and scenario != "walk_unit":
        raise ConfigError(f"scenario '{scenario}' takes no 'walk' section")
    walk = None
    if scenario == "walk_unit":
        walk_user = data.get("walk", {})
        if not isinstance(walk_user, dict):
            raise ConfigError("'walk' must be an object")
        walk = _parse_walk(walk_user, defaults.get("walk", {}))

    if "offsets" in data and scenario != "forward_recurrence_rv":
        raise ConfigError(f"scenario '{scenario}' takes no 'offsets' key")
    offsets = _parse_offsets(
        data.get("offsets", defaults.get("offsets", "zero")), generator.n
    )

    return ExperimentConfig(
        scenario=scenario,
        seed=seed,
        sample_budget=budget,
        output_dir=output_dir,
        generator=generator,
        topology=topology,
        receivers=receivers,
        walk=walk,
        offsets=offsets,
        dump_events=dump_events,
        schema_version=SCHEMA_VERSION,
    )


def parse_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment config."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    return config_from_mapping(data)


def apply_overrides(
    config: ExperimentConfig,
    *,
    seed: int | None = None,
    out_dir: str | None = None,
    budget_scale: float | None = None,
    dump_events: bool | None = None,
) -> ExperimentConfig:
    """CLI-flag overrides on a parsed config."""
    if seed is not None:
        config = replace(config, seed=_require_int(seed, "--seed", 0))
    if out_dir is not None:
        config = replace(config, output_dir=str(out_dir))
    if budget_scale is not None:
        factor = _require_number(budget_scale, "--budget-scale")
        if factor <= 0.0:
            raise ConfigError(f"--budget-scale must be positive, got {factor}")
        scaled = max(1, int(round(config.sample_budget * factor)))
        config = replace(config, sample_budget=scaled)
    if dump_events is not None:
        config = replace(config, dump_events=bool(dump_events))
    return config


# --------------------------------------------------------------------------
# report assembly


@dataclass
class RunReport:
    """Deterministic outcome of one scenario run.

    ``wall_clock_seconds`` is carried on the object for the timing
    sidecar but never serialized into report.json, which must
    regenerate bit-identically from (config, seed).
    """

    scenario: str
    seed: int
    config_hash: str
    status: str
    checks: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    sample_counts: dict = field(default_factory=dict)
    hill_rows: list = field(default_factory=list, repr=False)
    dependence_rows: list = field(default_factory=list, repr=False)
    spectral_rows: list = field(default_factory=list, repr=False)
    wall_clock_seconds: float = 0.0
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def report_dict(self) -> dict:
        return _jsonify(
            {
                "schema_version": self.schema_version,
                "scenario": self.scenario,
                "seed": self.seed,
                "config_hash": self.config_hash,
                "status": self.status,
                "checks": self.checks,
                "stats": self.stats,
                "sample_counts": self.sample_counts,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.report_dict(), sort_keys=True, indent=2) + "\n"


def _jsonify(value):
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, Integral):
        return int(value)
    if isinstance(value, Real):
        return float(value)
    return value


def _aggregate_status(checks: list) -> str:
    statuses = {c["status"] for c in checks}
    if "fail" in statuses:
        return "fail"
    if "insufficient_data" in statuses:
        return "insufficient_data"
    return "pass"


def _check(checks: list, name: str, passed: bool, observed, **fields) -> None:
    entry = {"name": name, "status": "pass" if passed else "fail"}
    if observed is not None:
        entry["observed"] = observed
    entry.update(fields)
    checks.append(entry)


def _insufficient(checks: list, name: str, detail: str, **fields) -> None:
    checks.append(
        {"name": name, "status": "insufficient_data", "detail": detail, **fields}
    )


def _sweep_rows(rows: list, series: str, samples: np.ndarray) -> None:
    try:
        for est in hill_sweep(samples):
            rows.append((series, est.k, est.alpha_hat, est.ci_low, est.ci_high))
    except InsufficientDataError:
        pass


def _fixed_chunks(total: int, chunk: int = REPLICATION_CHUNK) -> list[int]:
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def _parallel_chunks(job, sizes: list[int]) -> list:
    """Run job(i, size) per chunk, merged in chunk order regardless of
    the worker count, so HTIF_THREADS changes wall-clock only."""
    workers = min(thread_cap(), len(sizes))
    if workers <= 1:
        return [job(i, size) for i, size in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job, i, size) for i, size in enumerate(sizes)]
        return [f.result() for f in futures]


# --------------------------------------------------------------------------
# scenario runners (each returns checks/stats/counts/tables [+ stream])


def _run_hypothesis_audit(cfg: ExperimentConfig, rng: RngHandle) -> dict:
    spec = cfg.generator.to_spec()
    chunk = generate_isi_chunk(spec, cfg.sample_budget, rng.derive(0))
    checks: list = []
    out = {
        "checks": checks,
        "stats": {},
        "counts": {"rounds": cfg.sample_budget, "neurons": spec.n},
        "hill_rows": [],
        "dependence_rows": [],
        "spectral_rows": [],
    }
    try:
        report = validate_hypotheses(chunk)
    except InsufficientDataError as exc:
        for name in ("h1_joint_rv", "h2_marginal_equivalence",
                     "h3_within_neuron_independence", "h4_cross_neuron_dependence"):
            _insufficient(checks, name, str(exc))
        return out
    alpha = spec.tail.alpha
    _check(
        checks, "h1_joint_rv", report.h1_pass, report.h1_radial_alpha,
        expected=alpha, tolerance=HILL_TOLERANCE,
    )
    _check(
        checks, "h2_marginal_equivalence", report.h2_pass,
        list(report.h2_marginal_alphas), equivalence_ratios=list(report.h2_equivalence_ratios),
        tolerance=HILL_TOLERANCE, bounds=list(EQUIVALENCE_BOUNDS),
    )
    _check(
        checks, "h3_within_neuron_independence", report.h3_pass,
        max(report.h3_ratios), quantile=INDEPENDENCE_QUANTILE,
        limit=INDEPENDENCE_THRESHOLD,
    )
    _check(
        checks, "h4_cross_neuron_dependence", report.h4_pass, report.h4_ratio,
        minimum=DEPENDENCE_THRESHOLD,
    )
    out["stats"]["hypotheses"] = report.to_dict()

    entries = chunk.entries
    radii = entries.sum(axis=0)
    _sweep_rows(out["hill_rows"], "radial_l1", radii)
    for i in range(spec.n):
        _sweep_rows(out["hill_rows"], f"marginal_{i}", entries[i])
    for lag, ratio in zip(report.h3_lags, report.h3_ratios):
        out["dependence_rows"].append(
            ("h3_within_neuron", lag, INDEPENDENCE_QUANTILE, None, ratio)
        )
    out["dependence_rows"].append(
        ("h4_cross_neuron", "all_neurons", INDEPENDENCE_QUANTILE, None, report.h4_ratio)
    )
    for i, ratio in enumerate(report.h2_equivalence_ratios):
        out["dependence_rows"].append(
            ("h2_equivalence", f"row{i + 1}_vs_row0", INDEPENDENCE_QUANTILE, None, ratio)
        )
    if spec.n >= 2:
        try:
            spectral = spectral_estimate(entries.T)
            out["spectral_rows"].extend(spectral.to_rows())
            out["stats"]["spectral"] = spectral.to_dict()
        except InsufficientDataError:
            pass
    return out


def _run_forward_recurrence(cfg: ExperimentConfig, rng: RngHandle) -> dict:
    spec = cfg.generator.to_spec()
    reps = cfg.sample_budget
    sizes = _fixed_chunks(reps)

    def job(i: int, size: int) -> np.ndarray:
        return initial_residuals(spec, cfg.offsets, rng.derive(1000 + i), size=size)

    parts = _parallel_chunks(job, sizes)
    theta = spec.tail.scale * np.concatenate(parts, axis=1)
    checks: list = []
    out = {
        "checks": checks,
        "stats": {},
        "counts": {"replications": reps, "neurons": spec.n},
        "hill_rows": [],
        "dependence_rows": [],
        "spectral_rows": [],
    }
    alpha = spec.tail.alpha
    pooled = theta.T.ravel()
    try:
        est = hill_estimate(pooled)
        _check(
            checks, "pooled_residual_hill",
            abs(est.alpha_hat - alpha) <= RECURRENCE_HILL_TOLERANCE,
            est.alpha_hat, expected=alpha, tolerance=RECURRENCE_HILL_TOLERANCE,
        )
        out["stats"]["pooled_hill"] = est.to_dict()
    except InsufficientDataError as exc:
        _insufficient(checks, "pooled_residual_hill", str(exc))
    out["stats"]["marginal_hill"] = []
    for i in range(spec.n):
        try:
            out["stats"]["marginal_hill"].append(hill_estimate(theta[i]).to_dict())
        except InsufficientDataError:
            out["stats"]["marginal_hill"].append(None)
    q_idx = QUANTILE_GRID.index(INDEPENDENCE_QUANTILE)
    for i in range(1, spec.n):
        name = f"marginal_equivalence_row{i}_vs_row0"
        try:
            curve = equivalence_ratio(theta[i], theta[0])
        except InsufficientDataError as exc:
            _insufficient(checks, name, str(exc))
            continue
        ratio = curve.ratios[q_idx]
        lo, hi = EQUIVALENCE_BOUNDS
        _check(checks, name, lo <= ratio <= hi, ratio,
               bounds=list(EQUIVALENCE_BOUNDS), quantile=INDEPENDENCE_QUANTILE)
        for q, z, r in zip(curve.quantiles, curve.thresholds, curve.ratios):
            out["dependence_rows"].append(
                (f"theta_equivalence_row{i}_vs_row0", None, q, z, r)
            )
    _sweep_rows(out["hill_rows"], "pooled_residuals", pooled)
    for i in range(spec.n):
        _sweep_rows(out["hill_rows"], f"residual_row_{i}", theta[i])
    return out


def _run_tau_independence(cfg: ExperimentConfig, rng: RngHandle) -> dict:
    spec = cfg.generator.to_spec()
    topology = cfg.topology.to_topology(spec.n)
    rounds = -(-cfg.sample_budget // spec.n)
    stream = build_event_stream(topology, spec, rounds=rounds, rng=rng.derive(0))
    taus = stream.raw_taus
    checks: list = []
    out = {
        "checks": checks,
        "stats": {},
        "counts": {"rounds": rounds, "taus": int(taus.size)},
        "hill_rows": [],
        "dependence_rows": [],
        "spectral_rows": [],
        "stream": stream,
    }
    try:
        dep = tau_independence_diagnostic(stream)
    except InsufficientDataError as exc:
        _insufficient(checks, "tau_lag_independence", str(exc))
        _insufficient(checks, "comonotone_control", str(exc))
        return out
    q_idx = dep.quantiles.index(INDEPENDENCE_QUANTILE)
    worst = float(dep.ratios[:, q_idx].max())
    _check(
        checks, "tau_lag_independence", worst <= INDEPENDENCE_THRESHOLD, worst,
        lags=list(dep.lags), quantile=INDEPENDENCE_QUANTILE,
        limit=INDEPENDENCE_THRESHOLD,
    )
    for i, lag in enumerate(dep.lags):
        for j, q in enumerate(dep.quantiles):
            out["dependence_rows"].append(
                ("tau_lag", lag, q, dep.thresholds[j], float(dep.ratios[i, j]))
            )
    # perfect-dependence upper bound: a sequence repeated end-to-end is
    # comonotone with itself at the lag equal to its own length
    tiled = np.tile(taus, 2)
    control = lag_exceedance_ratios(
        tiled, lags=(taus.size,), quantiles=(INDEPENDENCE_QUANTILE,)
    )
    control_ratio = float(control.ratios[0, 0])
    _check(checks, "comonotone_control", control_ratio == 1.0, control_ratio,
           expected=1.0, exact=True)
    out["dependence_rows"].append(
        ("comonotone_control", int(taus.size), INDEPENDENCE_QUANTILE,
         control.thresholds[0], control_ratio)
    )
    positive = taus[taus > 0]
    try:
        out["stats"]["tau_hill"] = hill_estimate(positive).to_dict()
    except InsufficientDataError:
        out["stats"]["tau_hill"] = None
    _sweep_rows(out["hill_rows"], "tau", positive)
    out["stats"]["zero_taus"] = int(taus.size - positive.size)
    return out


def _rounds_for_spikes(budget: int, topology: NetworkTopology, receiver: ReceiverConfig) -> int:
    pool = receiver.pool if receiver.pool else tuple(range(topology.n))
    drift = sum(1 if topology.excitatory[i] else -1 for i in pool)
    per_round = max(drift, 1) / receiver.threshold
    return int(np.ceil(budget / per_round * SPIKE_BUDGET_SAFETY))


def _output_train(cfg: ExperimentConfig, rng: RngHandle, scale_factor: float = 1.0):
    generator = cfg.generator
    if scale_factor != 1.0:
        generator = replace(generator, scale=scale_factor * generator.scale)
    spec = generator.to_spec()
    topology = cfg.topology.to_topology(spec.n)
    receiver = cfg.receivers[0]
    rounds = _rounds_for_spikes(cfg.sample_budget, topology, receiver)
    stream = build_event_stream(topology, spec, rounds=rounds, rng=rng.derive(0))
    train = run_receiver(stream, receiver)
    return stream, train, rounds


def _run_output_rv(cfg: ExperimentConfig, rng: RngHandle) -> dict:
    stream, train, rounds = _output_train(cfg, rng)
    budget = cfg.sample_budget
    checks: list = []
    out = {
        "checks": checks,
        "stats": {},
        "counts": {"rounds": rounds, "spikes": len(train), "isi_budget": budget},
        "hill_rows": [],
        "dependence_rows": [],
        "spectral_rows": [],
        "stream": stream,
    }
    alpha = cfg.generator.alpha
    if len(train) < budget:
        detail = f"receiver produced {len(train)} ISIs, budget {budget}"
        _insufficient(checks, "output_isi_hill", detail)
        _insufficient(checks, "scale_homogeneity", detail)
        return out
    z = train.isis[:budget]
    positive = z[z > 0]
    out["stats"]["zero_isis"] = int(budget - positive.size)
    try:
        est = hill_estimate(positive)
        _check(
            checks, "output_isi_hill",
            abs(est.alpha_hat - alpha) <= HILL_TOLERANCE, est.alpha_hat,
            bounds=[alpha - HILL_TOLERANCE, alpha + HILL_TOLERANCE],
        )
        out["stats"]["output_hill"] = est.to_dict()
    except InsufficientDataError as exc:
        _insufficient(checks, "output_isi_hill", str(exc))
    _sweep_rows(out["hill_rows"], "output_isis", positive)

    # same seed, tripled scale: every firing time and ISI must triple
    # bit-for-bit while event counts at the spikes stay identical
    factor = 3.0
    _, train3, _ = _output_train(cfg, rng, scale_factor=factor)
    if len(train3) < budget:
        _insufficient(
            checks, "scale_homogeneity",
            f"rescaled run produced {len(train3)} ISIs, budget {budget}",
        )
    else:
        z3 = train3.isis[:budget]
        counts_equal = np.array_equal(
            train3.boundaries[:budget], train.boundaries[:budget]
        )
        exact = counts_equal and np.array_equal(z3, factor * z)
        _check(checks, "scale_homogeneity", exact, bool(exact),
               factor=factor, bit_level=True)
        out["stats"]["scale_check"] = {
            "factor": factor,
            "isis_exact": bool(np.array_equal(z3, factor * z)),
            "pool_counts_identical": bool(counts_equal),
        }

    dep = lag_exceedance_ratios(z, lags=tuple(range(1, 11)), quantiles=QUANTILE_GRID)
    for i, lag in enumerate(dep.lags):
        for j, q in enumerate(dep.quantiles):
            out["dependence_rows"].append(
                ("output_lag", lag, q, dep.thresholds[j], float(dep.ratios[i, j]))
            )
    return out


def _run_output_independence(cfg: ExperimentConfig, rng: RngHandle) -> dict:
    stream, train, rounds = _output_train(cfg, rng)
    budget = cfg.sample_budget
    checks: list = []
    out = {
        "checks": checks,
        "stats": {},
        "counts": {"rounds": rounds, "spikes": len(train), "isi_budget": budget},
        "hill_rows": [],
        "dependence_rows": [],
        "spectral_rows": [],
        "stream": stream,
    }
    if len(train) < budget:
        _insufficient(
            checks, "output_lag_independence",
            f"receiver produced {len(train)} ISIs, budget {budget}",
        )
        return out
    z = train.isis[:budget]
    lags = tuple(range(1, 11))
    try:
        dep = output_independence_diagnostic(z, lags=lags)
    except InsufficientDataError as exc:
        _insufficient(checks, "output_lag_independence", str(exc))
        return out
    q_idx = dep.quantiles.index(INDEPENDENCE_QUANTILE)
    worst = float(dep.ratios[:, q_idx].max())
    _check(
        checks, "output_lag_independence", worst <= INDEPENDENCE_THRESHOLD, worst,
        lags=list(lags), quantile=INDEPENDENCE_QUANTILE, limit=INDEPENDENCE_THRESHOLD,
    )
    for i, lag in enumerate(dep.lags):
        for j, q in enumerate(dep.quantiles):
            out["dependence_rows"].append(
                ("output_lag", lag, q, dep.thresholds[j], float(dep.ratios[i, j]))
            )
    positive = z[z > 0]
    out["stats"]["zero_isis"] = int(budget - positive.size)
    try:
        out["stats"]["output_hill"] = hill_estimate(positive).to_dict()
    except InsufficientDataError:
        out["stats"]["output_hill"] = None
    _sweep_rows(out["hill_rows"], "output_isis", positive)
    return out


def _joint_pair_data(cfg: ExperimentConfig, rng: RngHandle) -> dict:
    spec = cfg.generator.to_spec()
    topology = cfg.topology.to_topology(spec.n)
    stream = build_event_stream(
        topology, spec, rounds=cfg.sample_budget, rng=rng.derive(0)
    )
    cfg_a, cfg_b = cfg.receivers
    train_a, train_b, index = run_two_receivers(stream, cfg_a, cfg_b)
    za, zb = paired_isis(train_a, train_b, index)
    positive = (za > 0) & (zb > 0)
    return {
        "stream": stream,
        "train_a": train_a,
        "train_b": train_b,
        "za": za[positive],
        "zb": zb[positive],
        "pairs_total": int(len(index)),
        "pairs_positive": int(np.count_nonzero(positive)),
    }


def _joint_counts(cfg: ExperimentConfig, data: dict) -> dict:
    return {
        "rounds": cfg.sample_budget,
        "spikes_a": len(data["train_a"]),
        "spikes_b": len(data["train_b"]),
        "superimposed_pairs": data["pairs_total"],
        "positive_pairs": data["pairs_positive"],
    }


def _dependence_curve(data: dict):
    """Joint exceedance of the paired ISIs against the designated
    reference marginal (receiver A's full unpaired ISI sample)."""
    ref = data["train_a"].isis
    ref = ref[ref > 0]
    if ref.size == 0:
        raise InsufficientDataError("reference train produced no positive ISIs")
    if data["za"].size == 0:
        # no superimposed pairs at all: the joint exceedance rate is zero
        thresholds = tuple(float(np.quantile(ref, q)) for q in QUANTILE_GRID)
        return QUANTILE_GRID, thresholds, (0.0,) * len(QUANTILE_GRID)
    curve = upper_tail_independence(
        data["za"], data["zb"], ref, reference_label="train_a_output_isis"
    )
    return curve.quantiles, curve.thresholds, curve.ratios


def _run_joint_mrv(cfg: ExperimentConfig, rng: RngHandle) -> dict:
    data = _joint_pair_data(cfg, rng)
    checks: list = []
    out = {
        "checks": checks,
        "stats": {},
        "counts": _joint_counts(cfg, data),
        "hill_rows": [],
        "dependence_rows": [],
        "spectral_rows": [],
        "stream": data["stream"],
    }
    za, zb = data["za"], data["zb"]
    if za.size < 1000:
        _insufficient(
            checks, "paired_radial_scaling",
            f"only {za.size} positive superimposed pairs",
        )
        return out
    vectors = np.column_stack([za, zb])
    radial = radial_rv_check(vectors, t_values=RADIAL_T_VALUES)
    out["stats"]["radial"] = radial.to_dict()
    for t, ratio, expected in zip(radial.t_values, radial.ratios, radial.expected):
        out["dependence_rows"].append(
            ("radial_scaling", t, radial.base_quantile, radial.base_threshold, ratio)
        )
        if t == 1.0:
            continue
        _check(
            checks, f"paired_radial_scaling_t{int(t)}",
            abs(ratio - expected) <= RADIAL_DEVIATION_LIMIT, ratio,
            expected=expected, limit=RADIAL_DEVIATION_LIMIT,
        )
    try:
        spectral = spectral_estimate(vectors)
        out["stats"]["spectral"] = spectral.to_dict()
        out["spectral_rows"].extend(spectral.to_rows())
    except InsufficientDataError as exc:
        _insufficient(checks, "paired_spectral_mass", str(exc))
    _sweep_rows(out["hill_rows"], "paired_l1_radius", vectors.sum(axis=1))
    quantiles, thresholds, ratios = _dependence_curve(data)
    for q, z, r in zip(quantiles, thresholds, ratios):
        out["dependence_rows"].append(("joint_dependence", None, q, z, r))
    out["stats"]["dependence_reference"] = "train_a_output_isis"
    return out


def _run_full_dependence(cfg: ExperimentConfig, rng: RngHandle) -> dict:
    data = _joint_pair_data(cfg, rng)
    checks: list = []
    out = {
        "checks": checks,
        "stats": {},
        "counts": _joint_counts(cfg, data),
        "hill_rows": [],
        "dependence_rows": [],
        "spectral_rows": [],
        "stream": data["stream"],
    }
    try:
        quantiles, thresholds, ratios = _dependence_curve(data)
    except InsufficientDataError as exc:
        _insufficient(checks, "joint_tail_dependence", str(exc))
        return out
    q_idx = quantiles.index(INDEPENDENCE_QUANTILE)
    ratio = float(ratios[q_idx])
    _check(
        checks, "joint_tail_dependence", ratio >= DEPENDENCE_THRESHOLD, ratio,
        quantile=INDEPENDENCE_QUANTILE, minimum=DEPENDENCE_THRESHOLD,
    )
    for q, z, r in zip(quantiles, thresholds, ratios):
        out["dependence_rows"].append(("joint_dependence", None, q, z, r))
    out["stats"]["dependence_reference"] = "train_a_output_isis"
    out["stats"]["dependence_curve"] = {
        "quantiles": list(quantiles),
        "thresholds": list(thresholds),
        "ratios": [float(r) for r in ratios],
    }
    for label, train in (("a", data["train_a"]), ("b", data["train_b"])):
        isis = train.isis
        _sweep_rows(out["hill_rows"], f"train_{label}_isis", isis[isis > 0])
    return out


def _run_walk_unit(cfg: ExperimentConfig, rng: RngHandle) -> dict:
    walk = cfg.walk
    reps = cfg.sample_budget
    sizes = _fixed_chunks(reps)

    def job(i: int, size: int):
        return abstract_walk_first_passage(
            walk.p, walk.threshold, reps=size,
            rng=rng.derive(1000 + i), max_steps=walk.max_steps,
        )

    parts = _parallel_chunks(job, sizes)
    m_samples = np.concatenate([p.m_samples for p in parts])
    steps = sum(p.steps_consumed for p in parts)
    plus_weighted = sum(p.p_hat * p.steps_consumed for p in parts)
    p_hat = plus_weighted / steps if steps else float("nan")
    crossed = int(m_samples.size)
    finite_fraction = crossed / reps
    unsettled = sum(p.unsettled for p in parts)
    checks: list = []
    stats = {
        "p": walk.p,
        "threshold": walk.threshold,
        "reps": reps,
        "p_hat": float(p_hat),
        "crossed": crossed,
        "finite_fraction": float(finite_fraction),
        "mean_m": float(m_samples.mean()) if crossed else None,
        "unsettled": int(unsettled),
        "max_steps": walk.max_steps,
        "steps_consumed": int(steps),
        "chunks": len(sizes),
    }
    out = {
        "checks": checks,
        "stats": stats,
        "counts": {"replications": reps, "steps": int(steps)},
        "hill_rows": [],
        "dependence_rows": [],
        "spectral_rows": [],
    }
    if walk.p > 0.5:
        expected = walk.threshold / (2.0 * walk.p - 1.0)
        if crossed == 0:
            _insufficient(checks, "mean_steps_to_threshold", "no crossings observed")
        else:
            mean_m = float(m_samples.mean())
            _check(
                checks, "mean_steps_to_threshold",
                abs(mean_m - expected) <= WALK_MEAN_RELATIVE_TOLERANCE * expected,
                mean_m, expected=expected,
                relative_tolerance=WALK_MEAN_RELATIVE_TOLERANCE,
            )
    else:
        expected = (walk.p / (1.0 - walk.p)) ** walk.threshold if walk.p > 0.0 else 0.0
        _check(
            checks, "crossing_probability",
            abs(finite_fraction - expected) <= WALK_CROSSING_TOLERANCE,
            float(finite_fraction), expected=float(expected),
            tolerance=WALK_CROSSING_TOLERANCE,
        )
    return out


_RUNNERS = {
    "hypothesis_audit": _run_hypothesis_audit,
    "forward_recurrence_rv": _run_forward_recurrence,
    "tau_independence": _run_tau_independence,
    "output_rv": _run_output_rv,
    "output_independence": _run_output_independence,
    "joint_mrv": _run_joint_mrv,
    "full_dependence": _run_full_dependence,
    "walk_unit": _run_walk_unit,
}


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(cell) for cell in row])


def _csv_cell(cell):
    if cell is None:
        return ""
    if isinstance(cell, (bool, np.bool_)):
        return str(bool(cell))
    if isinstance(cell, Integral):
        return int(cell)
    if isinstance(cell, Real):
        return repr(float(cell))
    return cell


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Execute one scenario and persist its deterministic outputs.

    Writes report.json, hill_sweep.csv, dependence_ratios.csv and
    spectral_histogram.csv into the config's output directory (plus
    events.csv when dump_events is set and the scenario has a pooled
    stream, and a non-deterministic timing.txt sidecar).
    """
    if config.scenario not in _RUNNERS:
        raise ConfigError(f"unknown scenario {config.scenario!r}")
    started = time.perf_counter()
    result = _RUNNERS[config.scenario](config, config.rng())
    wall = time.perf_counter() - started

    report = RunReport(
        scenario=config.scenario,
        seed=config.seed,
        config_hash=config.config_hash,
        status=_aggregate_status(result["checks"]),
        checks=result["checks"],
        stats=result["stats"],
        sample_counts=result["counts"],
        hill_rows=result["hill_rows"],
        dependence_rows=result["dependence_rows"],
        spectral_rows=result["spectral_rows"],
        wall_clock_seconds=wall,
    )

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json())
    _write_csv(out_dir / "hill_sweep.csv", HILL_SWEEP_HEADER, report.hill_rows)
    _write_csv(
        out_dir / "dependence_ratios.csv", DEPENDENCE_HEADER, report.dependence_rows
    )
    _write_csv(
        out_dir / "spectral_histogram.csv", SPECTRAL_HEADER, report.spectral_rows
    )
    stream = result.get("stream")
    if config.dump_events and stream is not None:
        write_events_csv(stream, out_dir / "events.csv")
    (out_dir / "timing.txt").write_text(
        f"scenario={config.scenario} wall_clock_seconds={wall:.3f}\n"
    )
    return report
