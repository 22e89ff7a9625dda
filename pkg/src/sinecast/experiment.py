"""Benchmark harness: config files, run grids, tuning, artifacts.

One experiment is a dataset, a split, a list of horizons, and a list of
models. `run_experiment` trains and scores every (model, horizon) cell,
always scoring the copy-forward baseline first at each horizon so that
improvements can be computed, and writes three artifacts into the output
directory: results.csv (byte-deterministic), report.md, and manifest.json
(the only file that carries wall-clock information).

Failures are isolated: a cell that raises records an error row and the grid
keeps going. Attention models whose estimated score buffers exceed the
memory budget are skipped up front rather than attempted.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

from . import __version__, synthetic
from .data import (
    SplitSpec,
    TimeSeriesTable,
    WindowDataset,
    apply_standardizer,
    fit_standardizer,
    load_csv,
    make_windows,
    split,
)
from .errors import ConfigError, SinecastError, TuningError
from .evaluation import evaluate, improvement
from .models import VARIANTS, Forecaster, ModelConfig, save_checkpoint
from .reporting import write_report, write_results_csv
from .training import LrSchedule, TrainConfig, train_model

__all__ = [
    "DatasetSource",
    "ExperimentConfig",
    "RunRecord",
    "ExperimentOutcome",
    "TuneOutcome",
    "load_config",
    "config_hash",
    "normalized_config",
    "load_source",
    "prepared_segments",
    "tail_portion",
    "attention_memory_bytes",
    "run_experiment",
    "tune",
]

ATTENTION_SITES = {"Sencoder": 1, "Sinformer": 3}
ATTENTION_MODELS = tuple(ATTENTION_SITES)

_SYNTHETIC_KINDS = {
    "sine": synthetic.sine_series,
    "multi_sine_trend": synthetic.multi_sine_with_trend,
    "tidal": synthetic.tidal_series,
}

_TUPLE_ARGS = {"periods", "amplitudes"}

TUNING_FIELDS = (
    "dataset",
    "model",
    "horizon",
    "input_len",
    "train_portion",
    "status",
    "reason",
    "val_mae",
    "best_epoch",
)


@dataclass(frozen=True)
class DatasetSource:
    """Where the series comes from: a CSV file or a built-in generator."""

    name: str
    path: str | None = None
    timestamp_column: str | None = None
    frequency: str = ""
    synthetic: Mapping | None = None

    def __post_init__(self):
        if (self.path is None) == (self.synthetic is None):
            raise ConfigError("dataset needs exactly one of 'path' or 'synthetic'")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    source: DatasetSource
    split: SplitSpec
    horizons: tuple[int, ...]
    models: tuple[str, ...]
    input_len: int | None = None
    epochs: int = 50
    lr_start: float = 1e-3
    lr_end: float = 1e-6
    batch_size: int = 32
    eval_batch_size: int = 256
    seed: int = 0
    stride: int = 1
    eval_stride: int = 1
    train_portion: float = 1.0
    standardize: bool = True
    loss: str = "mae"
    memory_budget_mb: float = 2048.0
    d_model: int = 32
    n_heads: int = 4
    ffn_dim: int = 64
    ma_kernel: int = 25
    save_checkpoints: bool = False
    workers: int = 1
    out_dir: str | None = None
    tuning_input_lens: tuple[int, ...] | None = None
    tuning_train_portions: tuple[float, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.split, SplitSpec):
            object.__setattr__(self, "split", SplitSpec(*self.split))
        if not self.name:
            raise ConfigError("experiment name must be non-empty")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ConfigError(f"horizons must be a non-empty list of positive ints, got {self.horizons}")
        if not self.models:
            raise ConfigError("models must be non-empty")
        for m in self.models:
            if m not in VARIANTS:
                raise ConfigError(f"unknown model {m!r}; choose from {VARIANTS}")
        if self.input_len is not None and self.input_len < 1:
            raise ConfigError(f"input_len must be >= 1 or null, got {self.input_len}")
        if self.epochs < 2:
            raise ConfigError(f"epochs must be >= 2, got {self.epochs}")
        if not 0.0 < self.train_portion <= 1.0:
            raise ConfigError(f"train_portion must lie in (0, 1], got {self.train_portion}")
        if min(self.batch_size, self.eval_batch_size, self.stride, self.eval_stride, self.workers) < 1:
            raise ConfigError("batch sizes, strides, and workers must be >= 1")
        if self.loss not in ("mae", "mse"):
            raise ConfigError(f"loss must be 'mae' or 'mse', got {self.loss!r}")
        if self.memory_budget_mb <= 0:
            raise ConfigError(f"memory_budget_mb must be positive, got {self.memory_budget_mb}")
        if self.d_model < 1 or self.n_heads < 1 or self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model={self.d_model} must be a positive multiple of n_heads={self.n_heads}")
        if self.ffn_dim < 1:
            raise ConfigError(f"ffn_dim must be >= 1, got {self.ffn_dim}")
        if self.ma_kernel < 3 or self.ma_kernel % 2 == 0:
            raise ConfigError(f"ma_kernel must be odd and >= 3, got {self.ma_kernel}")


@dataclass
class RunRecord:
    dataset: str
    model: str
    horizon: int
    input_len: int
    train_portion: float
    seed: int
    status: str  # ok | skipped | error
    reason: str = ""
    mae: float | None = None
    n_windows: int | None = None
    best_epoch: int | None = None
    improvement_vs_persistence: float | None = None


@dataclass
class ExperimentOutcome:
    records: list[RunRecord]
    out_dir: Path
    results_path: Path
    report_path: Path
    manifest_path: Path

    @property
    def n_errors(self) -> int:
        return sum(r.status == "error" for r in self.records)


@dataclass
class TuneOutcome:
    rows: list[dict]
    best: dict
    out_dir: Path
    table_path: Path
    best_path: Path


# -- config files -----------------------------------------------------------


def _take(raw: dict, key: str, kinds, default, required: bool = False):
    if key not in raw:
        if required:
            raise ConfigError(f"config is missing required key {key!r}")
        return default
    value = raw.pop(key)
    if value is None and not required:
        return default
    if kinds is int and isinstance(value, bool):
        raise ConfigError(f"config key {key!r} must be an integer, got {value!r}")
    if kinds is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kinds):
        raise ConfigError(f"config key {key!r} has wrong type: {value!r}")
    return value


def _int_list(value, key: str) -> tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"config key {key!r} must be a non-empty list")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"config key {key!r} must hold integers, got {v!r}")
        out.append(v)
    return tuple(out)


def _parse_source(raw, config_dir: Path, fallback_name: str) -> DatasetSource:
    if not isinstance(raw, dict):
        raise ConfigError("config key 'dataset' must be an object")
    raw = dict(raw)
    path = _take(raw, "path", str, None)
    name = _take(raw, "name", str, None)
    ts = _take(raw, "timestamp_column", str, None)
    freq = _take(raw, "frequency", str, "")
    synth = _take(raw, "synthetic", dict, None)
    if raw:
        raise ConfigError(f"unknown dataset key(s): {sorted(raw)}")
    if path is not None:
        path = str((config_dir / path).resolve()) if not Path(path).is_absolute() else path
        if name is None:
            name = Path(path).stem
    if synth is not None:
        synth = dict(synth)
        kind = synth.get("kind")
        if kind not in _SYNTHETIC_KINDS:
            raise ConfigError(f"synthetic kind must be one of {sorted(_SYNTHETIC_KINDS)}, got {kind!r}")
        if not isinstance(synth.get("n"), int) or synth["n"] < 2:
            raise ConfigError("synthetic dataset needs an integer sample count 'n' >= 2")
        if name is None:
            name = kind
    return DatasetSource(name=name or fallback_name, path=path, timestamp_column=ts,
                         frequency=freq, synthetic=synth)


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config JSON file."""
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: top level must be a JSON object")

    name = _take(raw, "name", str, None, required=True)
    source = _parse_source(raw.pop("dataset", None) or {}, p.parent, fallback_name=name)

    split_raw = raw.pop("split", None)
    if (not isinstance(split_raw, list)) or len(split_raw) != 3:
        raise ConfigError("config key 'split' must be a list of three fractions")
    spec = SplitSpec(*(float(f) for f in split_raw))

    horizons = _int_list(raw.pop("horizons", None), "horizons")
    models_raw = raw.pop("models", None)
    if not isinstance(models_raw, list) or not all(isinstance(m, str) for m in models_raw):
        raise ConfigError("config key 'models' must be a list of model names")
    models = tuple(dict.fromkeys(models_raw))

    overrides = _take(raw, "model_overrides", dict, {})
    overrides = dict(overrides)
    d_model = _take(overrides, "d_model", int, 32)
    n_heads = _take(overrides, "n_heads", int, 4)
    ffn_dim = _take(overrides, "ffn_dim", int, 64)
    ma_kernel = _take(overrides, "ma_kernel", int, 25)
    if overrides:
        raise ConfigError(f"unknown model_overrides key(s): {sorted(overrides)}")

    tuning = _take(raw, "tuning", dict, {})
    tuning = dict(tuning)
    t_lens = tuning.pop("input_lens", None)
    t_portions = tuning.pop("train_portions", None)
    if tuning:
        raise ConfigError(f"unknown tuning key(s): {sorted(tuning)}")
    if t_lens is not None:
        t_lens = _int_list(t_lens, "tuning.input_lens")
    if t_portions is not None:
        if not isinstance(t_portions, list) or not t_portions:
            raise ConfigError("config key 'tuning.train_portions' must be a non-empty list")
        t_portions = tuple(float(x) for x in t_portions)

    cfg = ExperimentConfig(
        name=name,
        source=source,
        split=spec,
        horizons=horizons,
        models=models,
        input_len=_take(raw, "input_len", int, None),
        epochs=_take(raw, "epochs", int, 50),
        lr_start=_take(raw, "lr_start", float, 1e-3),
        lr_end=_take(raw, "lr_end", float, 1e-6),
        batch_size=_take(raw, "batch_size", int, 32),
        eval_batch_size=_take(raw, "eval_batch_size", int, 256),
        seed=_take(raw, "seed", int, 0),
        stride=_take(raw, "stride", int, 1),
        eval_stride=_take(raw, "eval_stride", int, 1),
        train_portion=_take(raw, "train_portion", float, 1.0),
        standardize=_take(raw, "standardize", bool, True),
        loss=_take(raw, "loss", str, "mae"),
        memory_budget_mb=_take(raw, "memory_budget_mb", float, 2048.0),
        d_model=d_model,
        n_heads=n_heads,
        ffn_dim=ffn_dim,
        ma_kernel=ma_kernel,
        save_checkpoints=_take(raw, "save_checkpoints", bool, False),
        workers=_take(raw, "workers", int, 1),
        out_dir=_take(raw, "out_dir", str, None),
        tuning_input_lens=t_lens,
        tuning_train_portions=t_portions,
    )
    if raw:
        raise ConfigError(f"unknown config key(s): {sorted(raw)}")
    return cfg


def normalized_config(cfg: ExperimentConfig) -> dict:
    """JSON-ready view of a config with every default filled in."""
    d = dataclasses.asdict(cfg)
    d["split"] = [cfg.split.train_frac, cfg.split.val_frac, cfg.split.test_frac]
    d["horizons"] = list(cfg.horizons)
    d["models"] = list(cfg.models)
    d["source"] = dataclasses.asdict(cfg.source)
    d["tuning_input_lens"] = list(cfg.tuning_input_lens) if cfg.tuning_input_lens else None
    d["tuning_train_portions"] = (
        list(cfg.tuning_train_portions) if cfg.tuning_train_portions else None
    )
    return d


# Execution details that do not change any result value stay out of the hash.
_UNHASHED_KEYS = ("out_dir", "workers", "save_checkpoints")


def config_hash(cfg: ExperimentConfig) -> str:
    d = {k: v for k, v in normalized_config(cfg).items() if k not in _UNHASHED_KEYS}
    canonical = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# -- data loading -----------------------------------------------------------


def load_source(source: DatasetSource) -> TimeSeriesTable:
    if source.synthetic is not None:
        spec = dict(source.synthetic)
        maker = _SYNTHETIC_KINDS[spec.pop("kind")]
        kwargs = {k: tuple(v) if k in _TUPLE_ARGS else v for k, v in spec.items()}
        try:
            values = maker(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad synthetic dataset options: {exc}") from exc
        return synthetic.as_table(values, name=source.name)
    return load_csv(
        source.path,
        timestamp_column=source.timestamp_column,
        name=source.name,
        frequency_label=source.frequency,
    )


def tail_portion(table: TimeSeriesTable, portion: float) -> TimeSeriesTable:
    """Keep the most recent floor(portion * T) rows of a segment."""
    if not 0.0 < portion <= 1.0:
        raise ConfigError(f"train_portion must lie in (0, 1], got {portion}")
    if portion == 1.0:
        return table
    keep = int(table.length * portion)
    if keep < 2:
        raise ConfigError(f"train_portion={portion} leaves {keep} rows of {table.length}")
    return TimeSeriesTable(
        name=table.name,
        values=table.values[table.length - keep:],
        columns=table.columns,
        timestamps=table.timestamps[table.length - keep:] if table.timestamps else None,
        frequency_label=table.frequency_label,
    )


# -- memory guard -----------------------------------------------------------


def attention_memory_bytes(variant: str, n_heads: int, batch: int, horizon: int) -> int:
    """Rough peak size of attention score buffers for one training step.

    Per attention site the forward pass holds scores, the softmax output,
    and the backward pass about two more arrays of the same [batch, T, T]
    shape per head, hence the factor 4. Non-attention models return 0.
    """
    sites = ATTENTION_SITES.get(variant, 0)
    return sites * 4 * n_heads * batch * horizon * horizon * 8


# -- the run grid -----------------------------------------------------------


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_") or "series"


def prepared_segments(cfg: ExperimentConfig):
    """Split, standardize, and trim the configured dataset.

    Standardization statistics always come from the full training segment;
    train_portion then keeps only the most recent windows for optimization.
    """
    table = load_source(cfg.source)
    train_t, val_t, test_t = split(table, cfg.split)
    if cfg.standardize:
        stats = fit_standardizer(train_t)
        train_t = apply_standardizer(train_t, stats)
        val_t = apply_standardizer(val_t, stats)
        test_t = apply_standardizer(test_t, stats)
    train_t = tail_portion(train_t, cfg.train_portion)
    return train_t, val_t, test_t


def _resolve_out_dir(cfg: ExperimentConfig, out_dir) -> Path:
    chosen = out_dir if out_dir is not None else cfg.out_dir
    if chosen is None or str(chosen) == "":
        raise ConfigError("no output directory: pass out_dir or set 'out_dir' in the config")
    p = Path(chosen)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _train_and_score(
    cfg: ExperimentConfig,
    variant: str,
    horizon: int,
    input_len: int,
    train_t: TimeSeriesTable,
    val_t: TimeSeriesTable,
    test_t: TimeSeriesTable,
    log_path: Path | None,
    checkpoint_path: Path | None,
) -> tuple[float, int, int | None]:
    """Returns (test MAE, n test windows, best epoch or None for baseline)."""
    channels = test_t.n_channels
    mcfg = ModelConfig(
        variant=variant,
        input_len=input_len,
        horizon=horizon,
        channels=channels,
        d_model=cfg.d_model,
        n_heads=cfg.n_heads,
        ffn_dim=cfg.ffn_dim,
        ma_kernel=cfg.ma_kernel,
        seed=cfg.seed,
    )
    model = Forecaster(mcfg)
    eval_batch = cfg.eval_batch_size
    best_epoch = None
    if variant != "Persistence":
        if variant in ATTENTION_MODELS:
            # Batched evaluation is exact, so capping the eval batch only
            # bounds memory, never changes the score.
            eval_batch = min(eval_batch, cfg.batch_size)
        train_ds = make_windows(train_t, input_len, horizon, cfg.stride)
        val_ds = make_windows(val_t, input_len, horizon, cfg.eval_stride)
        tcfg = TrainConfig(
            schedule=LrSchedule(cfg.lr_start, cfg.lr_end, cfg.epochs),
            batch_size=cfg.batch_size,
            seed=cfg.seed,
            loss=cfg.loss,
            eval_batch_size=eval_batch,
        )
        report = train_model(model, train_ds, val_ds, tcfg, log_path=log_path)
        best_epoch = report.best_epoch
    test_ds = make_windows(test_t, input_len, horizon, cfg.eval_stride)
    result = evaluate(model, test_ds, dataset_name=test_t.name, batch_size=eval_batch)
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
    return result.mae, result.n_windows, best_epoch


def _run_cell(
    cfg: ExperimentConfig,
    variant: str,
    horizon: int,
    train_t: TimeSeriesTable,
    val_t: TimeSeriesTable,
    test_t: TimeSeriesTable,
    out: Path,
) -> tuple[RunRecord, float]:
    dataset = cfg.source.name
    input_len = horizon if variant == "Persistence" else (cfg.input_len or horizon)
    record = RunRecord(
        dataset=dataset,
        model=variant,
        horizon=horizon,
        input_len=input_len,
        train_portion=cfg.train_portion,
        seed=cfg.seed,
        status="ok",
    )
    started = time.perf_counter()
    try:
        if variant in ATTENTION_MODELS:
            n_train = len(make_windows(train_t, input_len, horizon, cfg.stride))
            batch = min(cfg.batch_size, n_train) if n_train else cfg.batch_size
            est = attention_memory_bytes(variant, cfg.n_heads, batch, horizon)
            budget = cfg.memory_budget_mb * 2**20
            if est > budget:
                record.status = "skipped"
                record.reason = (
                    f"intractable at this horizon: ~{est / 2**20:.0f} MB of attention "
                    f"buffers exceed the {cfg.memory_budget_mb:.0f} MB budget"
                )
                return record, time.perf_counter() - started
        log_path = None
        checkpoint_path = None
        if variant != "Persistence":
            log_path = out / "logs" / f"{_slug(dataset)}_{variant}_{horizon}.csv"
        if cfg.save_checkpoints and variant != "Persistence":
            checkpoint_path = out / "checkpoints" / f"{_slug(dataset)}_{variant}_{horizon}.json"
        record.mae, record.n_windows, record.best_epoch = _train_and_score(
            cfg, variant, horizon, input_len, train_t, val_t, test_t, log_path, checkpoint_path
        )
    except SinecastError as exc:
        record.status = "error"
        record.reason = str(exc)
    except Exception as exc:  # keep the grid going, the row carries the cause
        record.status = "error"
        record.reason = f"{type(exc).__name__}: {exc}"
    return record, time.perf_counter() - started


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentOutcome:
    """Run the full grid and write results.csv, report.md, manifest.json."""
    out = _resolve_out_dir(cfg, out_dir)
    (out / "logs").mkdir(exist_ok=True)
    if cfg.save_checkpoints:
        (out / "checkpoints").mkdir(exist_ok=True)
    started_wall = datetime.now(timezone.utc).isoformat(timespec="seconds")
    started = time.perf_counter()

    train_t, val_t, test_t = prepared_segments(cfg)
    trained = [m for m in cfg.models if m != "Persistence"]
    cells = [(h, m) for h in cfg.horizons for m in ["Persistence"] + trained]

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [
                pool.submit(_run_cell, cfg, m, h, train_t, val_t, test_t, out)
                for h, m in cells
            ]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_run_cell(cfg, m, h, train_t, val_t, test_t, out) for h, m in cells]

    records = [rec for rec, _ in outcomes]
    timings = {
        f"{rec.dataset}/{rec.model}/{rec.horizon}": round(secs, 3)
        for rec, secs in outcomes
    }

    base_by_horizon = {
        r.horizon: r.mae for r in records if r.model == "Persistence" and r.status == "ok"
    }
    for r in records:
        if r.model != "Persistence" and r.status == "ok":
            base = base_by_horizon.get(r.horizon)
            # a baseline of exactly zero (noise-free periodic data) admits no ratio
            if base is not None and base > 0:
                r.improvement_vs_persistence = improvement(base, r.mae)

    rows = [dataclasses.asdict(r) for r in records]
    results_path = write_results_csv(out / "results.csv", rows)
    report_path = write_report(out / "report.md", rows, title=cfg.name, config_hash=config_hash(cfg))

    counts = {"ok": 0, "skipped": 0, "error": 0}
    for r in records:
        counts[r.status] += 1
    manifest = {
        "experiment": cfg.name,
        "config_hash": config_hash(cfg),
        "config": normalized_config(cfg),
        "tool": f"sinecast {__version__}",
        "started_utc": started_wall,
        "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seconds": round(time.perf_counter() - started, 3),
        "counts": counts,
        "run_seconds": timings,
        "results": rows,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    return ExperimentOutcome(
        records=records,
        out_dir=out,
        results_path=results_path,
        report_path=report_path,
        manifest_path=manifest_path,
    )


# -- input-length and history tuning ----------------------------------------


def _default_tuning_lens(horizon: int) -> tuple[int, ...]:
    return tuple(sorted({horizon, 2 * horizon, 336, 720}))


def tune(cfg: ExperimentConfig, out_dir=None) -> TuneOutcome:
    """Grid-search input length and train portion per (model, horizon).

    Selection is by validation MAE with ties broken toward the shorter
    input and then the larger portion. Standardization statistics come from
    the full training segment, so scores are comparable across portions.
    """
    out = _resolve_out_dir(cfg, out_dir)
    (out / "logs").mkdir(exist_ok=True)
    table = load_source(cfg.source)
    train_t, val_t, _ = split(table, cfg.split)
    if cfg.standardize:
        stats = fit_standardizer(train_t)
        train_t = apply_standardizer(train_t, stats)
        val_t = apply_standardizer(val_t, stats)

    trained = [m for m in cfg.models if m != "Persistence"]
    if not trained:
        raise ConfigError("tuning needs at least one trainable model")
    portions = cfg.tuning_train_portions or (0.5, 1.0)
    dataset = cfg.source.name

    rows: list[dict] = []
    best: dict[str, dict] = {}
    for horizon in cfg.horizons:
        lens = cfg.tuning_input_lens or _default_tuning_lens(horizon)
        for model in trained:
            candidates: list[tuple[float, int, float, int]] = []
            for input_len in lens:
                for portion in portions:
                    row = {
                        "dataset": dataset,
                        "model": model,
                        "horizon": horizon,
                        "input_len": input_len,
                        "train_portion": portion,
                        "status": "ok",
                        "reason": "",
                        "val_mae": None,
                        "best_epoch": None,
                    }
                    if input_len < horizon:
                        # keeps every candidate comparable to the copy-forward
                        # baseline, which needs input_len >= horizon
                        row["status"] = "infeasible"
                        row["reason"] = f"input_len {input_len} < horizon {horizon}"
                        rows.append(row)
                        continue
                    span = input_len + horizon
                    tail = tail_portion(train_t, portion)
                    if tail.length < span or val_t.length < span:
                        row["status"] = "infeasible"
                        row["reason"] = (
                            f"needs {span} rows, train tail has {tail.length}, "
                            f"val has {val_t.length}"
                        )
                        rows.append(row)
                        continue
                    try:
                        mcfg = ModelConfig(
                            variant=model,
                            input_len=input_len,
                            horizon=horizon,
                            channels=train_t.n_channels,
                            d_model=cfg.d_model,
                            n_heads=cfg.n_heads,
                            ffn_dim=cfg.ffn_dim,
                            ma_kernel=cfg.ma_kernel,
                            seed=cfg.seed,
                        )
                        forecaster = Forecaster(mcfg)
                        eval_batch = cfg.eval_batch_size
                        if model in ATTENTION_MODELS:
                            eval_batch = min(eval_batch, cfg.batch_size)
                        report = train_model(
                            forecaster,
                            make_windows(tail, input_len, horizon, cfg.stride),
                            make_windows(val_t, input_len, horizon, cfg.eval_stride),
                            TrainConfig(
                                schedule=LrSchedule(cfg.lr_start, cfg.lr_end, cfg.epochs),
                                batch_size=cfg.batch_size,
                                seed=cfg.seed,
                                loss=cfg.loss,
                                eval_batch_size=eval_batch,
                            ),
                            log_path=out / "logs" / (
                                f"tune_{_slug(dataset)}_{model}_{horizon}_{input_len}_{portion}.csv"
                            ),
                        )
                    except SinecastError as exc:
                        row["status"] = "error"
                        row["reason"] = str(exc)
                        rows.append(row)
                        continue
                    row["val_mae"] = report.best_val_mae
                    row["best_epoch"] = report.best_epoch
                    rows.append(row)
                    candidates.append((report.best_val_mae, input_len, -portion, report.best_epoch))
            if not candidates:
                raise TuningError(f"no feasible tuning candidate for {model} at horizon {horizon}")
            val_mae, input_len, neg_portion, best_epoch = min(candidates)
            best[f"{model}@{horizon}"] = {
                "input_len": input_len,
                "train_portion": -neg_portion,
                "val_mae": val_mae,
                "best_epoch": best_epoch,
            }

    table_path = out / "tuning.csv"
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TUNING_FIELDS)
        for row in rows:
            writer.writerow([
                repr(v) if isinstance(v, float) else ("" if v is None else str(v))
                for v in (row[f] for f in TUNING_FIELDS)
            ])
    best_path = out / "best.json"
    best_path.write_text(json.dumps(best, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return TuneOutcome(rows=rows, best=best, out_dir=out, table_path=table_path, best_path=best_path)
