"""
Config files and result writers.

Config files are plain ``key = value`` lines; nested settings use dotted
keys (``prior.sigma_prior``, ``filter.process_noise_coeff``). Blank lines
and ``#`` comments are ignored. Every output is written to a temporary
file and renamed into place.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .bell import SphereMap
from .estimators import FilterConfig, PriorConfig
from .experiments import AggregateResult, ExperimentConfig, RunRecord, SweepRow

FLOAT_FORMAT = "{:.9g}"
# Probabilities this small are round-off from amplitudes that vanish exactly.
PROB_ZERO = 1e-15

SPHERE_HEADER = "theta_rad,lambda_rad,p_phi_plus,p_phi_minus,p_psi_plus,p_psi_minus"
RESULTS_HEADER = "resources,mean_error_rad,std_error_rad,estimator,alpha,n_runs"
SWEEP_HEADER = "alpha,estimator,mean_error_rad,std_error_rad,n_runs,resources"


class ConfigError(ValueError):
    def __init__(self, message: str, keys=()):
        super().__init__(message)
        self.keys = list(keys)


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return FLOAT_FORMAT.format(float(value))


def probability_row(angles, probs) -> str:
    """One CSV row of two angles followed by outcome probabilities."""
    probs = np.where(np.abs(probs) < PROB_ZERO, 0.0, probs)
    return ",".join(fmt(v) for v in (*angles, *probs))


def _convert(raw: str, kind, key: str):
    if kind is bool or kind == "bool":
        lowered = raw.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}", [key])
    try:
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}", [key]) from None
    return raw


def _field_types(cls) -> dict:
    return {f.name: f.type for f in dataclasses.fields(cls)}


def parse_config_text(text: str) -> tuple[ExperimentConfig, set[str]]:
    """Parse a config document; returns the config and the set of keys present."""
    sections = {"prior": PriorConfig, "filter": FilterConfig}
    top_types = {k: v for k, v in _field_types(ExperimentConfig).items() if k not in sections}
    values: dict[str, dict] = {"": {}, "prior": {}, "filter": {}}
    seen: set[str] = set()
    unknown, malformed = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            malformed.append(f"line {lineno}")
            continue
        key, raw = (part.strip() for part in line.split("=", 1))
        section, _, name = key.rpartition(".")
        if section == "" and name in top_types:
            kind = top_types[name]
        elif section in sections and name in _field_types(sections[section]):
            kind = _field_types(sections[section])[name]
        else:
            unknown.append(key)
            continue
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", [key])
        seen.add(key)
        values[section][name] = _convert(raw, kind, key)
    if malformed:
        raise ConfigError(f"malformed lines (expected key = value): {', '.join(malformed)}", malformed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)
    try:
        cfg = ExperimentConfig(
            prior=PriorConfig(**values["prior"]),
            filter=FilterConfig(**values["filter"]),
            **values[""],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, seen


def load_config(path) -> tuple[ExperimentConfig, set[str]]:
    return parse_config_text(Path(path).read_text())


def config_to_text(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            for sub in dataclasses.fields(value):
                lines.append(f"{f.name}.{sub.name} = {getattr(value, sub.name)}")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def atomic_write(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _meta_lines(meta: dict) -> list[str]:
    return [f"# {key}: {value}" for key, value in meta.items()]


def sphere_csv(smap: SphereMap, meta: dict | None = None) -> str:
    header = {
        "artifact": f"bellrot {__version__}",
        "initial": smap.initial.value,
        "rotation_rad": ",".join(fmt(v) for v in smap.rot.as_array()),
        "alpha": fmt(smap.alpha),
        "grid": f"{smap.shape[0]}x{smap.shape[1]}",
    }
    header.update(meta or {})
    lines = _meta_lines(header) + [SPHERE_HEADER]
    lines += [probability_row(row[:2], row[2:]) for row in smap.rows()]
    return "\n".join(lines) + "\n"


def results_csv(agg: AggregateResult, cfg: ExperimentConfig, meta: dict | None = None) -> str:
    lines = _meta_lines(_run_meta(cfg, meta)) + [RESULTS_HEADER]
    for r, m, s in zip(agg.resources, agg.mean_error, agg.std_error):
        lines.append(",".join([fmt(r), fmt(m), fmt(s), cfg.estimator, fmt(cfg.alpha), str(agg.n_runs)]))
    return "\n".join(lines) + "\n"


def sweep_csv(rows: list[SweepRow], cfg: ExperimentConfig, meta: dict | None = None) -> str:
    lines = _meta_lines(_run_meta(cfg, meta)) + [SWEEP_HEADER]
    for row in rows:
        lines.append(
            ",".join([fmt(row.alpha), row.estimator, fmt(row.mean_error), fmt(row.std_error), str(row.n_runs), fmt(row.resources)])
        )
    return "\n".join(lines) + "\n"


def _run_meta(cfg: ExperimentConfig, meta: dict | None) -> dict:
    out = {"artifact": f"bellrot {__version__}", "master_seed": cfg.master_seed}
    out.update(meta or {})
    out["config"] = json.dumps(config_dict(cfg), sort_keys=True)
    return out


def _clean(value):
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (np.floating, float)):
        return float(fmt(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def results_json(
    agg: AggregateResult,
    cfg: ExperimentConfig,
    records: list[RunRecord] | None = None,
    meta: dict | None = None,
) -> str:
    doc = {
        "artifact": "bellrot",
        "version": __version__,
        "master_seed": cfg.master_seed,
        "config": config_dict(cfg),
        "meta": meta or {},
        "aggregate": {
            "resources": agg.resources,
            "mean_error_rad": agg.mean_error,
            "std_error_rad": agg.std_error,
            "mean_component_abs_error_rad": agg.mean_component_abs_error,
            "n_runs": agg.n_runs,
            "total_restarts": agg.total_restarts,
        },
    }
    if records is not None:
        doc["runs"] = [r.to_dict() for r in records]
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def sweep_json(rows: list[SweepRow], cfg: ExperimentConfig, meta: dict | None = None) -> str:
    doc = {
        "artifact": "bellrot",
        "version": __version__,
        "master_seed": cfg.master_seed,
        "config": config_dict(cfg),
        "meta": meta or {},
        "rows": [dataclasses.asdict(r) for r in rows],
    }
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"
