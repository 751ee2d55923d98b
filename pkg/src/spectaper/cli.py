"""Batch experiment runner.

Usage::

    spectaper run config.json [--out-dir DIR] [--threads N] [--seed S]
    spectaper report config.json [--out-dir DIR] [--threads N] [--seed S]

A ``run`` config names one experiment; a ``report`` config holds a list of
them under ``"experiments"``. Environment overrides: ``SPECTAPER_OUT_DIR``
and ``SPECTAPER_THREADS`` (command-line flags win).

Exit codes: 0 success, 1 validation error, 2 acceptance failure (report),
3 I/O error.
"""
import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from ._errors import SpectaperError
from .experiments import EXPERIMENTS

EXIT_OK, EXIT_VALIDATION, EXIT_ACCEPTANCE, EXIT_IO = 0, 1, 2, 3
ENV_OUT_DIR = "SPECTAPER_OUT_DIR"
ENV_THREADS = "SPECTAPER_THREADS"
MAX_SEED = 2**64 - 1


class ConfigError(Exception):
    """Config failed validation; ``errors`` lists every violated field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: Literal[tuple(EXPERIMENTS)]
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(0, ge=0, le=MAX_SEED)
    output: Optional[str] = None
    format: Literal["csv", "json"] = "csv"


class ReportConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiments: List[Dict[str, Any]] = Field(default_factory=list)
    output: str = "report.json"


def _format_errors(err, prefix=""):
    out = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "config"
        out.append(f"{prefix}{loc}: {e['msg']}")
    return out


def validate_config(raw):
    """Return ``(ExperimentConfig, params model)`` or raise :class:`ConfigError`."""
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None
    model, _ = EXPERIMENTS[cfg.experiment]
    try:
        params = model.model_validate(cfg.params)
    except ValidationError as err:
        raise ConfigError(_format_errors(err, "params.")) from None
    return cfg, params


@dataclass
class ResultTable:
    columns: List[str]
    rows: List[list]
    metadata: Dict[str, Any]
    checks: Dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        width = len(self.columns)
        bad = [i for i, r in enumerate(self.rows) if len(r) != width]
        if bad:
            raise ValueError(f"rows {bad} do not have {width} cells")

    @property
    def passed(self):
        return all(self.checks.values())

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()

    def to_dict(self):
        return {"columns": self.columns, "rows": [[_json_cell(v) for v in r] for r in self.rows],
                "checks": self.checks, "passed": self.passed, "metadata": self.metadata}


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    return v


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def atomic_write(path, text):
    """Write ``text`` next to ``path`` then rename, so no partial file is left."""
    path = os.path.abspath(path)
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def execute(cfg, params, seed=None):
    """Run one validated experiment and return its :class:`ResultTable`."""
    seed = cfg.seed if seed is None else seed
    _, runner = EXPERIMENTS[cfg.experiment]
    start = time.perf_counter()
    cols, rows, checks = runner(params, seed)
    meta = {
        "experiment": cfg.experiment,
        "config": {**cfg.model_dump(), "seed": seed, "params": params.model_dump()},
        "seed": seed,
        "version": __version__,
        "wall_time": time.perf_counter() - start,
    }
    return ResultTable(cols, rows, meta, {k: bool(v) for k, v in checks.items()})


def _output_path(cfg, out_dir):
    name = cfg.output or f"{cfg.experiment}.{cfg.format}"
    return name if os.path.isabs(name) else os.path.join(out_dir, name)


def write_table(table, path, fmt):
    """Write the table; CSV output gets a ``.meta.json`` sidecar with metadata."""
    if fmt == "json":
        return [atomic_write(path, _dumps(table.to_dict()))]
    meta = {"metadata": table.metadata, "checks": table.checks, "passed": table.passed}
    return [atomic_write(path, table.to_csv()), atomic_write(path + ".meta.json", _dumps(meta))]


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as err:
        raise OSError(f"cannot read config {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ConfigError([f"config: not valid JSON ({err})"]) from None


def cmd_run(raw, out_dir, seed):
    cfg, params = validate_config(raw)
    table = execute(cfg, params, seed)
    return write_table(table, _output_path(cfg, out_dir), cfg.format), table


def _report_member(raw, seed):
    try:
        cfg, params = validate_config(raw)
    except ConfigError as err:
        name = raw.get("experiment") if isinstance(raw, dict) else None
        return {"experiment": name, "passed": False, "error": str(err)}
    try:
        table = execute(cfg, params, seed)
    except (SpectaperError, ValueError, ArithmeticError) as err:
        return {"experiment": cfg.experiment, "passed": False, "error": str(err)}
    return {"experiment": cfg.experiment, "passed": table.passed, "checks": table.checks,
            "columns": table.columns,
            "rows": [[_json_cell(v) for v in r] for r in table.rows],
            "metadata": table.metadata}


def cmd_report(raw, out_dir, seed, threads):
    try:
        rep = ReportConfig.model_validate(raw)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None
    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        blocks = list(pool.map(lambda m: _report_member(m, seed), rep.experiments))
    summary = {
        "passed": all(b["passed"] for b in blocks),
        "experiments": blocks,
        "metadata": {"version": __version__, "seed_override": seed,
                     "n_experiments": len(blocks),
                     "wall_time": time.perf_counter() - start},
    }
    path = rep.output if os.path.isabs(rep.output) else os.path.join(out_dir, rep.output)
    return [atomic_write(path, _dumps(summary))], summary


def default_report_config():
    """The bundled config reproducing the acceptance rows."""
    text = resources.files("spectaper").joinpath("configs/default_report.json").read_text()
    return json.loads(text)


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="spectaper", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "run one experiment config"),
                      ("report", "run a config set and write a pass/fail summary")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("config", help="JSON config path ('default' for the bundled report)"
                       if name == "report" else "JSON config path")
        s.add_argument("--out-dir", default=None,
                       help=f"output directory (default ${ENV_OUT_DIR} or .)")
        s.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default ${ENV_THREADS} or 1)")
        s.add_argument("--seed", type=_nonneg_int, default=None, help="override config seed")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    out_dir = args.out_dir or os.environ.get(ENV_OUT_DIR) or "."
    threads = args.threads if args.threads is not None else int(os.environ.get(ENV_THREADS, 1))
    if args.seed is not None and args.seed > MAX_SEED:
        print(f"error: seed: must be < 2**64", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        if args.command == "report" and args.config == "default":
            raw = default_report_config()
        else:
            raw = _load_json(args.config)
        if args.command == "run":
            paths, table = cmd_run(raw, out_dir, args.seed)
            for path in paths:
                print(path)
            return EXIT_OK
        paths, summary = cmd_report(raw, out_dir, args.seed, threads)
        for b in summary["experiments"]:
            print(f"{'PASS' if b['passed'] else 'FAIL'}  {b['experiment']}")
        print(paths[0])
        return EXIT_OK if summary["passed"] else EXIT_ACCEPTANCE
    except ConfigError as err:
        for line in err.errors:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except SpectaperError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        where = f" ({err.filename})" if getattr(err, "filename", None) else ""
        print(f"error: I/O failure{where}: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
