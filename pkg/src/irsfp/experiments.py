"""Config loading and the batch experiments behind the command line.

Raw rows always go to the main CSV; per-group aggregates go to a sibling
``*_summary.csv`` (and optionally ``*_summary.json``). Each file starts with
``#`` lines holding the package version and the fully resolved config.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import __version__
from .baselines import SCHEMES, run_scheme
from .channel import (
    NOISE_MODES,
    SNR_REFERENCES,
    Disk,
    Rectangle,
    Scenario,
    draw_instance,
    pmax_from_snr,
)
from .fp import SolverOptions

EXPERIMENTS = ("convergence", "snr_sweep", "irs_sweep", "validate")
COLUMNS = (
    "experiment", "scheme", "seed", "trial", "sweep_value", "f1", "sum_rate",
    "iterations", "wall_ms", "fast_path_fraction",
)
SUMMARY_COLUMNS = (
    "experiment", "scheme", "sweep_value", "n", "mean_sum_rate", "std_sum_rate",
    "sem_sum_rate", "mean_f1", "mean_iterations",
)
DUAL_METHODS = ("ellipsoid", "barrier")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    experiment: str = "convergence"
    scenario: Scenario = field(default_factory=Scenario)
    trials: int = 1
    seed: int = 0
    snr_db: float = 35.0
    snr_reference: str = "cascade"
    snr_grid_db: Optional[list] = None
    l_grid: Optional[list] = None
    schemes: Optional[list] = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    output: str = "results/out.csv"
    json_summary: bool = False
    timing: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.snr_reference not in SNR_REFERENCES:
            raise ConfigError("snr_reference", f"must be one of {SNR_REFERENCES}")
        if self.schemes is None:
            self.schemes = ["joint"] if self.experiment == "convergence" else list(SCHEMES)
        if not self.schemes:
            raise ConfigError("schemes", "must not be empty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError("schemes", f"unknown scheme {s!r}")
        if self.experiment == "snr_sweep" and not self.snr_grid_db:
            raise ConfigError("snr_grid_db", "snr_sweep needs a nonempty SNR grid")
        if self.experiment == "irs_sweep":
            if not self.l_grid:
                raise ConfigError("l_grid", "irs_sweep needs a nonempty list of IRS counts")
            if any(int(l) < 1 for l in self.l_grid):
                raise ConfigError("l_grid", "IRS counts must be >= 1")
            if len(set(self.scenario.M)) != 1:
                raise ConfigError("scenario.M", "irs_sweep needs the same element count on every IRS")

    def resolved(self) -> dict:
        """JSON-ready view of every setting, used for the file headers."""
        sc = dataclasses.asdict(self.scenario)
        solver = {
            k: (v if not isinstance(v, np.ndarray) else v.tolist())
            for k, v in dataclasses.asdict(self.solver).items()
        }
        out = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("scenario", "solver")
        }
        out["scenario"] = sc
        out["solver"] = solver
        return out


# --- config loading ---------------------------------------------------------

_TOP_KEYS = {
    "experiment": str, "trials": int, "seed": int, "snr_db": float, "snr_reference": str,
    "snr_grid_db": list, "l_grid": list, "schemes": list, "output": str,
    "json_summary": bool, "timing": bool, "workers": int, "scenario": (dict, str), "solver": dict,
}
_SCENARIO_KEYS = {
    "K": int, "L": int, "M": (int, list), "source_region": dict, "dest_region": dict,
    "irs_positions": (list, type(None)), "irs_region": dict, "T0_db": float, "d0": float,
    "rho_si": float, "rho_id": float, "sigma_r2": float, "sigma_d2": float, "p_max": (float, type(None)),
}
_SOLVER_KEYS = {
    "epsilon": float, "max_iter": int, "noise_mode": str, "tol_kkt": float, "dual_method": str,
}
_DISK_KEYS = {"center": list, "radius": float}
_RECT_KEYS = {"x": list, "y": list}


def _check_type(key: str, value, expected):
    types = expected if isinstance(expected, tuple) else (expected,)
    if float in types and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(key, f"expected {_names(types)}, got bool")
    if not isinstance(value, types):
        raise ConfigError(key, f"expected {_names(types)}, got {type(value).__name__}")
    return value


def _names(types) -> str:
    return " or ".join("null" if t is type(None) else t.__name__ for t in types)


def _check_keys(section: dict, schema: dict, prefix: str) -> dict:
    out = {}
    for key, value in section.items():
        name = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(name, "unknown key")
        out[key] = _check_type(name, value, schema[key])
    return out


def _pair(key: str, value) -> tuple[float, float]:
    if len(value) != 2:
        raise ConfigError(key, "expected a pair of numbers")
    return tuple(float(_check_type(key, v, float)) for v in value)


def _number_list(key: str, values, kind) -> list:
    return [_check_type(f"{key}[{i}]", v, kind) for i, v in enumerate(values)]


def scenario_from_dict(data: dict, prefix: str = "scenario.") -> Scenario:
    data = _check_keys(data, _SCENARIO_KEYS, prefix)
    kw: dict[str, Any] = {}
    for key, value in data.items():
        name = prefix + key
        if key in ("source_region", "dest_region"):
            disk = _check_keys(value, _DISK_KEYS, name + ".")
            default = getattr(Scenario, key)
            kw[key] = Disk(
                _pair(name + ".center", disk["center"]) if "center" in disk else default.center,
                disk.get("radius", default.radius),
            )
        elif key == "irs_region":
            rect = _check_keys(value, _RECT_KEYS, name + ".")
            default = Rectangle()
            kw[key] = Rectangle(
                _pair(name + ".x", rect["x"]) if "x" in rect else default.x,
                _pair(name + ".y", rect["y"]) if "y" in rect else default.y,
            )
        elif key == "irs_positions" and value is not None:
            kw[key] = tuple(_pair(f"{name}[{i}]", v) for i, v in enumerate(value))
        elif key == "M" and isinstance(value, list):
            kw[key] = tuple(_number_list(name, value, int))
        else:
            kw[key] = value
    if "M" in kw and isinstance(kw["M"], int) and "L" not in kw:
        kw["L"] = Scenario.L
    if "L" in kw and "irs_positions" not in kw:
        # the four default positions only fit L = 4; otherwise place at random
        if kw["L"] != len(Scenario().irs_positions):
            kw["irs_positions"] = None
    if "L" in kw and "M" not in kw:
        kw["M"] = Scenario().M[0]
    try:
        return Scenario(**kw)
    except ValueError as exc:
        field_name = str(exc).split()[0].rstrip(":")
        raise ConfigError(prefix + field_name, str(exc)) from None


def config_from_dict(data: Optional[dict], base_dir: Path = Path(".")) -> ExperimentConfig:
    data = dict(data or {})
    data = _check_keys(data, _TOP_KEYS, "")
    kw: dict[str, Any] = {}
    scenario_raw = data.pop("scenario", None)
    if isinstance(scenario_raw, str):
        path = (base_dir / scenario_raw).resolve()
        try:
            scenario_raw = yaml.safe_load(path.read_text()) or {}
        except OSError as exc:
            raise ConfigError("scenario", f"cannot read scenario file: {exc}") from None
        if not isinstance(scenario_raw, dict):
            raise ConfigError("scenario", "scenario file must hold a mapping")
    solver_raw = _check_keys(data.pop("solver", None) or {}, _SOLVER_KEYS, "solver.")
    if "noise_mode" in solver_raw and solver_raw["noise_mode"] not in NOISE_MODES:
        raise ConfigError("solver.noise_mode", f"must be one of {NOISE_MODES}")
    if "dual_method" in solver_raw and solver_raw["dual_method"] not in DUAL_METHODS:
        raise ConfigError("solver.dual_method", f"must be one of {DUAL_METHODS}")
    try:
        kw["solver"] = SolverOptions(**solver_raw)
    except ValueError as exc:
        raise ConfigError("solver." + str(exc).split()[0], str(exc)) from None

    if "snr_grid_db" in data:
        data["snr_grid_db"] = _number_list("snr_grid_db", data["snr_grid_db"], float)
    if "l_grid" in data:
        data["l_grid"] = _number_list("l_grid", data["l_grid"], int)
    if "schemes" in data:
        data["schemes"] = _number_list("schemes", data["schemes"], str)
    kw.update(data)
    snr_db = kw.get("snr_db", 35.0)
    reference = kw.get("snr_reference", "cascade")
    if reference not in SNR_REFERENCES:
        raise ConfigError("snr_reference", f"must be one of {SNR_REFERENCES}")
    kw["scenario"] = _scenario_at_snr(scenario_raw or {}, snr_db, reference)
    return ExperimentConfig(**kw)


def _scenario_at_snr(raw: dict, snr_db: float, reference: str) -> Scenario:
    """Scenario whose cap follows ``snr_db`` unless the file fixes ``p_max``."""
    sc = scenario_from_dict(raw)
    if raw.get("p_max") is None:
        sc = dataclasses.replace(sc, p_max=pmax_from_snr(snr_db, sc, reference))
    return sc


def read_config_file(path) -> dict:
    """The raw mapping stored in a YAML config file (empty file gives ``{}``)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"not valid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


def load_config(path) -> ExperimentConfig:
    return config_from_dict(read_config_file(path), Path(path).parent)


def merge_overrides(data: dict, **overrides) -> dict:
    """Copy of a raw config mapping with non-None overrides applied.

    Keys naming :class:`SolverOptions` fields go under ``solver``.
    """
    data = dict(data)
    solver = dict(data.get("solver") or {})
    for key, value in overrides.items():
        if value is None:
            continue
        if key in _SOLVER_KEYS:
            solver[key] = value
        else:
            data[key] = value
    if solver:
        data["solver"] = solver
    return data


# --- experiment runs --------------------------------------------------------

@dataclass(frozen=True)
class _Task:
    experiment: str
    scenario: Scenario
    sweep_value: float
    trial: int
    seed: int
    schemes: tuple
    solver: SolverOptions
    timing: bool


def _run_task(task: _Task) -> list[dict]:
    _, _, eff = draw_instance(task.scenario, task.seed, task.solver.noise_mode)
    options = dataclasses.replace(task.solver, seed=task.seed)
    rows = []
    for scheme in task.schemes:
        _, report, trace = run_scheme(scheme, eff, task.scenario, options)
        common = dict(
            experiment=task.experiment, scheme=scheme, seed=task.seed, trial=task.trial,
            iterations=trace.iterations, fast_path_fraction=trace.fast_path_fraction,
        )
        if task.experiment == "convergence":
            for rec in trace.records:
                rows.append(dict(
                    common, sweep_value=rec.t, f1=rec.f1, sum_rate=rec.sum_rate,
                    wall_ms=rec.wall_ms if task.timing else 0.0,
                ))
        else:
            rows.append(dict(
                common, sweep_value=task.sweep_value, f1=trace.records[-1].f1,
                sum_rate=report.sum_rate, wall_ms=trace.wall_ms if task.timing else 0.0,
            ))
    return rows


def _tasks(config: ExperimentConfig) -> list[_Task]:
    sc = config.scenario
    points: list[tuple[float, Scenario]] = []
    if config.experiment == "convergence":
        points = [(0.0, sc)]
    elif config.experiment == "snr_sweep":
        for snr in config.snr_grid_db:
            points.append((float(snr), dataclasses.replace(
                sc, p_max=pmax_from_snr(float(snr), sc, config.snr_reference))))
    elif config.experiment == "irs_sweep":
        for L in config.l_grid:
            points.append((float(L), dataclasses.replace(
                sc, L=int(L), M=(sc.M[0],) * int(L), irs_positions=None)))
    return [
        _Task(config.experiment, scenario, value, trial, config.seed + trial,
              tuple(config.schemes), config.solver, config.timing)
        for value, scenario in points
        for trial in range(config.trials)
    ]


def run_rows(config: ExperimentConfig) -> list[dict]:
    """All raw result rows, sorted by ``(scheme, sweep_value, trial)``."""
    tasks = _tasks(config)
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["scheme"], r["sweep_value"], r["trial"]))
    for row in rows:
        for key in ("f1", "sum_rate", "wall_ms", "fast_path_fraction"):
            if not math.isfinite(row[key]):
                raise RuntimeError(
                    f"non-finite {key} for scheme {row['scheme']} trial {row['trial']}"
                )
    return rows


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and spread of ``sum_rate`` per ``(scheme, sweep_value)``.

    For convergence runs the groups are iterations ``t``; traces that stopped
    early simply do not contribute to later groups.
    """
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["experiment"], row["scheme"], row["sweep_value"]), []).append(row)
    out = []
    for (experiment, scheme, value), members in sorted(groups.items(), key=lambda kv: kv[0][1:]):
        rates = np.array([m["sum_rate"] for m in members])
        n = len(rates)
        std = float(rates.std(ddof=1)) if n > 1 else 0.0
        out.append(dict(
            experiment=experiment, scheme=scheme, sweep_value=value, n=n,
            mean_sum_rate=float(rates.mean()), std_sum_rate=std, sem_sum_rate=std / math.sqrt(n),
            mean_f1=float(np.mean([m["f1"] for m in members])),
            mean_iterations=float(np.mean([m["iterations"] for m in members])),
        ))
    return out


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def header_lines(config: ExperimentConfig) -> list[str]:
    return [
        f"# irsfp {__version__}",
        "# config " + json.dumps(config.resolved(), sort_keys=True, default=list),
    ]


def render_csv(rows: list[dict], columns, config: ExperimentConfig) -> str:
    buf = io.StringIO()
    for line in header_lines(config):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def summary_path(output: Path, suffix: str = ".csv") -> Path:
    return output.with_name(output.stem + "_summary" + suffix)


def prepare_output(path) -> Path:
    """Create the parent directory and make sure the file can be written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8"):
        pass
    return path


def run_experiment(config: ExperimentConfig) -> dict:
    """Run one configured experiment and write its files.

    Returns a dict with the written ``paths``, the raw ``rows`` (or the check
    results for ``validate``) and ``passed`` for ``validate``.
    """
    output = prepare_output(config.output)
    if config.experiment == "validate":
        return _run_validate(config, output)
    rows = run_rows(config)
    summary = summarize(rows)
    output.write_text(render_csv(rows, COLUMNS, config), encoding="utf-8")
    paths = [output]
    spath = summary_path(output)
    spath.write_text(render_csv(summary, SUMMARY_COLUMNS, config), encoding="utf-8")
    paths.append(spath)
    if config.json_summary:
        jpath = summary_path(output, ".json")
        jpath.write_text(json.dumps(
            {"version": __version__, "config": config.resolved(), "summary": summary},
            sort_keys=True, indent=2, default=list,
        ) + "\n", encoding="utf-8")
        paths.append(jpath)
    return {"paths": paths, "rows": rows, "summary": summary}


def _run_validate(config: ExperimentConfig, output: Path) -> dict:
    from .validation import run_suite

    results = run_suite(seed=config.seed)
    buf = io.StringIO()
    for line in header_lines(config):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["check", "passed", "detail"])
    for r in results:
        writer.writerow([r.name, str(r.passed).lower(), json.dumps(r.detail, sort_keys=True)])
    output.write_text(buf.getvalue(), encoding="utf-8")
    return {"paths": [output], "rows": results, "passed": all(r.passed for r in results)}
