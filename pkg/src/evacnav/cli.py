"""Command line harness: single seeded runs and the full scenario matrix.

    evacnav run --evacuees 30 --algorithm dijkstra --comms direct3g --seed 1
    evacnav experiment --out results/

An experiment config is the usual dotted-key JSON object; keys under
``experiment.`` choose the matrix (``evacuee_counts``, ``algorithms``,
``comms_modes``, ``seeds``, ``building``) and everything else overrides the
simulation defaults for every run.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from evacnav.building import BuildingError, BuildingGraph, default_building_path, load_building_file
from evacnav.comms import COMMS_MODES
from evacnav.config import ALGORITHMS, ConfigError, SimConfig, apply_overrides, load_config_file
from evacnav.sim import RunMetrics, run

RESULT_COLUMNS = (
    "evacuees",
    "algorithm",
    "comms",
    "seed",
    "survivors",
    "survivor_pct",
    "casualties",
    "trapped",
    "drained_phones",
    "mean_evac_time_s",
    "total_energy_j",
)
SUMMARY_COLUMNS = (
    "evacuees",
    "algorithm",
    "comms",
    "runs",
    "survivor_pct_mean",
    "survivor_pct_min",
    "survivor_pct_max",
    "drained_phones_mean",
    "drained_phones_min",
    "drained_phones_max",
)


@dataclass(frozen=True)
class ExperimentSpec:
    building: Path = field(default_factory=default_building_path)
    evacuee_counts: tuple[int, ...] = (30, 60, 90, 120)
    algorithms: tuple[str, ...] = ALGORITHMS
    comms_modes: tuple[str, ...] = COMMS_MODES
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    out_dir: Path = Path("results")
    overrides: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("evacuee_counts", "algorithms", "comms_modes", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"experiment.{name} must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("experiment.seeds must be distinct")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"experiment.algorithms: unknown algorithm {a!r}")
        for c in self.comms_modes:
            if c not in COMMS_MODES:
                raise ConfigError(f"experiment.comms_modes: unknown comms mode {c!r}")
        if any(n < 0 for n in self.evacuee_counts):
            raise ConfigError("experiment.evacuee_counts must be non-negative")

    def cells(self) -> list[tuple[int, str, str, int]]:
        return sorted(
            (n, a, c, s)
            for n in self.evacuee_counts
            for a in self.algorithms
            for c in self.comms_modes
            for s in self.seeds
        )


@dataclass(frozen=True)
class AggregateRow:
    evacuees: int
    algorithm: str
    comms: str
    runs: int
    survivor_pct_mean: float
    survivor_pct_min: float
    survivor_pct_max: float
    drained_phones_mean: float
    drained_phones_min: int
    drained_phones_max: int


def _fmt(v: Any) -> str:
    # repr round-trips floats exactly, which keeps summary recomputation exact
    return repr(v) if isinstance(v, float) else str(v)


def result_row(n: int, algorithm: str, comms: str, seed: int, m: RunMetrics) -> dict[str, Any]:
    return {
        "evacuees": n,
        "algorithm": algorithm,
        "comms": comms,
        "seed": seed,
        "survivors": m.survivors,
        "survivor_pct": m.survivor_pct,
        "casualties": m.casualties,
        "trapped": m.trapped_at_cap,
        "drained_phones": m.drained_phones,
        "mean_evac_time_s": m.mean_evacuation_time_s,
        "total_energy_j": m.total_energy_j,
    }


def aggregate(rows: Iterable[Mapping[str, Any]]) -> list[AggregateRow]:
    """Mean/min/max per (evacuees, algorithm, comms) cell, in sorted cell order."""
    groups: dict[tuple[int, str, str], list[Mapping[str, Any]]] = {}
    for r in rows:
        groups.setdefault((int(r["evacuees"]), r["algorithm"], r["comms"]), []).append(r)
    out = []
    for key in sorted(groups):
        rs = sorted(groups[key], key=lambda r: int(r["seed"]))
        pct = [float(r["survivor_pct"]) for r in rs]
        drained = [int(r["drained_phones"]) for r in rs]
        out.append(
            AggregateRow(
                *key,
                runs=len(rs),
                survivor_pct_mean=math.fsum(pct) / len(pct),
                survivor_pct_min=min(pct),
                survivor_pct_max=max(pct),
                drained_phones_mean=sum(drained) / len(drained),
                drained_phones_min=min(drained),
                drained_phones_max=max(drained),
            )
        )
    return out


def _csv_text(columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _run_cell(args: tuple[BuildingGraph, SimConfig, tuple[int, str, str, int]]) -> tuple[dict[str, Any], RunMetrics]:
    g, base, (n, a, c, s) = args
    m = run(replace(base, evacuee_count=n, algorithm=a, comms_mode=c, seed=s), g)
    return result_row(n, a, c, s, m), m


def run_matrix(
    spec: ExperimentSpec, jobs: int = 1, g: BuildingGraph | None = None
) -> list[tuple[dict[str, Any], RunMetrics]]:
    """Every (count, algorithm, comms, seed) run of ``spec`` as (CSV row, metrics), sorted."""
    if g is None:
        g = load_building_file(spec.building)
    base = apply_overrides(SimConfig(), spec.overrides)
    tasks = [(g, base, cell) for cell in spec.cells()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_run_cell, tasks))
    else:
        out = [_run_cell(t) for t in tasks]
    out.sort(key=lambda rm: tuple(rm[0][k] for k in ("evacuees", "algorithm", "comms", "seed")))
    return out


def write_outputs(rows: Sequence[Mapping[str, Any]], out_dir: str | Path) -> tuple[Path, Path]:
    rows = sorted(rows, key=lambda r: (r["evacuees"], r["algorithm"], r["comms"], r["seed"]))
    summary = [vars(a) for a in aggregate(rows)]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results_path, summary_path = out / "results.csv", out / "summary.csv"
    results_path.write_text(_csv_text(RESULT_COLUMNS, rows), encoding="utf-8")
    summary_path.write_text(_csv_text(SUMMARY_COLUMNS, summary), encoding="utf-8")
    return results_path, summary_path


def run_experiment(spec: ExperimentSpec, jobs: int = 1, g: BuildingGraph | None = None) -> tuple[Path, Path]:
    """Run the cross product and write ``results.csv`` and ``summary.csv``."""
    return write_outputs([row for row, _ in run_matrix(spec, jobs, g)], spec.out_dir)


def read_results(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


_EXPERIMENT_KEYS = {"building", "evacuee_counts", "algorithms", "comms_modes", "seeds"}


def experiment_spec_from_config(doc: Mapping[str, Any], out_dir: str | Path) -> ExperimentSpec:
    """Split a config document into matrix settings and simulation overrides."""
    matrix: dict[str, Any] = {}
    overrides: dict[str, Any] = {}
    for key, value in doc.items():
        if key == "experiment" and isinstance(value, Mapping):
            items = {f"experiment.{k}": v for k, v in value.items()}
        else:
            items = {key: value}
        for k, v in items.items():
            if k.startswith("experiment."):
                name = k.split(".", 1)[1]
                if name not in _EXPERIMENT_KEYS:
                    raise ConfigError(f"unknown config key {k!r}")
                matrix[name] = v
            else:
                overrides[k] = v
    kwargs: dict[str, Any] = {"out_dir": Path(out_dir), "overrides": overrides}
    if "building" in matrix:
        kwargs["building"] = Path(matrix.pop("building"))
    for name, value in matrix.items():
        if not isinstance(value, list):
            raise ConfigError(f"experiment.{name} must be a list")
        kwargs[name] = tuple(value)
    apply_overrides(SimConfig(), overrides)  # fail early on bad keys
    return ExperimentSpec(**kwargs)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evacnav", description="Smartphone-assisted building evacuation simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one seeded scenario and print a CSV row")
    r.add_argument("--building", type=Path, default=None, help="building JSON (default: bundled mall)")
    r.add_argument("--evacuees", type=int, default=30)
    r.add_argument("--algorithm", choices=ALGORITHMS, default="cpn-spf")
    r.add_argument("--comms", choices=COMMS_MODES, default="ahcpn")
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--config", type=Path, default=None, help="JSON file of dotted config keys")
    r.add_argument("--header", action="store_true", help="print the column header first")

    e = sub.add_parser("experiment", help="run the scenario matrix and write CSV files")
    e.add_argument("--config", type=Path, default=None)
    e.add_argument("--out", type=Path, default=Path("results"))
    e.add_argument("--jobs", type=int, default=1, help="worker processes (output is identical for any value)")
    return ap


def _fail(flag: str, msg: str) -> int:
    print(f"evacnav: error: {flag}: {msg}", file=sys.stderr)
    return 2


def _cmd_run(args: argparse.Namespace) -> int:
    path = args.building or default_building_path()
    try:
        g = load_building_file(path)
    except (OSError, BuildingError) as exc:
        return _fail("--building", str(exc))
    if args.evacuees < 0:
        return _fail("--evacuees", f"must be non-negative, got {args.evacuees}")
    try:
        overrides = load_config_file(args.config) if args.config else {}
        cfg = apply_overrides(SimConfig(), overrides)
        cfg = replace(cfg, evacuee_count=args.evacuees, algorithm=args.algorithm, comms_mode=args.comms, seed=args.seed)
    except ConfigError as exc:
        return _fail("--config", str(exc))
    row = result_row(args.evacuees, args.algorithm, args.comms, args.seed, run(cfg, g))
    text = _csv_text(RESULT_COLUMNS, [row])
    sys.stdout.write(text if args.header else text.split("\n", 1)[1])
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    if args.jobs < 1:
        return _fail("--jobs", "must be at least 1")
    try:
        doc = load_config_file(args.config) if args.config else {}
        spec = experiment_spec_from_config(doc, args.out)
    except ConfigError as exc:
        return _fail("--config", str(exc))
    try:
        g = load_building_file(spec.building)
    except (OSError, BuildingError) as exc:
        return _fail("experiment.building", str(exc))
    try:
        results, summary = run_experiment(spec, jobs=args.jobs, g=g)
    except OSError as exc:
        return _fail("--out", f"cannot write to {args.out}: {exc.strerror or exc}")
    print(f"wrote {results} and {summary}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_experiment(args)


if __name__ == "__main__":
    sys.exit(main())
