"""``thermocluster`` command line.

Exit codes: 0 success, 1 a validation check failed, 2 usage or input error.
Temperatures are kT in units of the gap; ``--delta`` only rescales printed
temperatures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bonds import BondSolveError, solve_bond_params
from .checks import run_checks
from .decomposition import DecompositionError, build_ensemble, ensemble_for_pe
from .exact import ORACLE_CAP, ModelParams
from .lattice import (DEFAULT_THRESHOLDS, KINDS, LatticeError, LatticeGraph, ThresholdTable, build_lattice,
                      lattice_from_spec)
from .measurement import MeasurementPattern, PatternError, outcome_histogram, run_pattern
from .percolation import gather_stats, is_simulable
from .regions import P_C_DEFAULT, classify, q_window, qprime_window, tc_dephasing, tcrit_general, \
    tcrit_zero_field
from .sampler import STATEVECTOR_CAP, realize_state, sample_configurations

SCHEMA_VERSION = 1


class UsageError(Exception):
    """Bad flags or input files (exit 2)."""


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(type(x).__name__)


@dataclass
class RunConfig:
    lattice: dict | None = None
    beta: float | None = None
    kt: float | None = None
    theta: float = 0.0
    shots: int = 1000
    seed: int = 0
    cap_oracle: int = ORACLE_CAP
    cap_statevector: int = STATEVECTOR_CAP
    thresholds: ThresholdTable = field(default_factory=lambda: DEFAULT_THRESHOLDS)
    p_c: float = P_C_DEFAULT
    out: str | None = None

    def params(self) -> ModelParams:
        if (self.beta is None) == (self.kt is None):
            raise UsageError("give exactly one of --beta or --kt")
        try:
            if self.beta is not None:
                return ModelParams(float(self.beta), float(self.theta))
            return ModelParams.from_kt(float(self.kt), float(self.theta))
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def graph(self) -> LatticeGraph:
        if self.lattice is None:
            raise UsageError("--lattice is required")
        try:
            return lattice_from_spec(self.lattice)
        except (LatticeError, KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad lattice: {exc}") from None

    def kind(self) -> str:
        if self.lattice is None or "kind" not in self.lattice:
            raise UsageError("--lattice is required")
        return self.lattice["kind"]


def _load_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{source}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _lattice_arg(value: str | None, dims: Sequence[int] | None, boundary: str | None) -> dict | None:
    if value is None:
        return None
    value = value.strip()
    if value.startswith("{"):
        spec = _load_json(value, "--lattice")
    elif Path(value).is_file():
        spec = _load_json(Path(value).read_text(), value)
    elif value in KINDS:
        spec = {"kind": value}
    else:
        raise UsageError(f"--lattice must be a lattice name, JSON object or file, got {value!r}")
    if not isinstance(spec, dict):
        raise UsageError("lattice spec must be a JSON object")
    if dims:
        spec["dims"] = list(dims)
    if boundary:
        spec["boundary"] = boundary
    return spec


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        raw = _load_json(Path(args.config).read_text(), args.config)
        if not isinstance(raw, dict):
            raise UsageError(f"{args.config}: config must be a JSON object")
        for key, value in raw.items():
            key = key.replace("-", "_")
            if key == "lattice":
                cfg.lattice = value if isinstance(value, dict) else {"kind": value}
            elif key in ("beta", "kt", "theta", "p_c"):
                cfg.__setattr__(key, float(value))
            elif key in ("shots", "seed", "cap_oracle", "cap_statevector"):
                cfg.__setattr__(key, int(value))
            elif key == "out":
                cfg.out = str(value)
            else:
                raise UsageError(f"{args.config}: unknown config key {key!r}")
    lattice = _lattice_arg(getattr(args, "lattice", None), getattr(args, "dims", None),
                           getattr(args, "boundary", None))
    if lattice is not None:
        cfg.lattice = lattice
    for key in ("beta", "kt", "theta", "shots", "seed", "cap_oracle", "cap_statevector", "out"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "beta", None) is not None:
        cfg.kt = None
    if getattr(args, "kt", None) is not None:
        cfg.beta = None
    if getattr(args, "pc", None) is not None:
        cfg.p_c = args.pc
    bond_over = getattr(args, "bond_threshold", None)
    site_over = getattr(args, "pc_site", None)
    if bond_over is not None or site_over is not None:
        if cfg.lattice is None:
            raise UsageError("threshold overrides need --lattice")
        kind = cfg.lattice.get("kind")
        try:
            cfg.thresholds = cfg.thresholds.with_overrides(
                {kind: bond_over} if bond_over is not None else None,
                {kind: site_over} if site_over is not None else None)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if cfg.shots < 1:
        raise UsageError("--shots must be >= 1")
    if cfg.cap_oracle < 2 or cfg.cap_statevector < 2:
        raise UsageError("caps must be >= 2")
    if not 0 < cfg.p_c < 0.5:
        raise UsageError("--pc must lie in (0, 1/2)")
    return cfg


class Output:
    """Collects CSV rows or a JSON document and writes them once, in order."""

    def __init__(self, path: str | None, as_json: bool):
        self.path = path
        self.as_json = as_json
        self.buf = io.StringIO()
        self.writer = csv.writer(self.buf, lineterminator="\n")

    def row(self, values) -> None:
        self.writer.writerow([fmt(v) for v in values])

    def document(self, doc: dict) -> None:
        self.buf.write(json.dumps({"schema_version": SCHEMA_VERSION, **doc}, default=_json_default,
                                  sort_keys=True) + "\n")

    def flush(self) -> None:
        text = self.buf.getvalue()
        if self.path:
            Path(self.path).write_text(text)
        else:
            sys.stdout.write(text)


def _scale(x: float, delta: float) -> float:
    return x * delta


# --- subcommands ----------------------------------------------------------------

def cmd_critical_temp(args, cfg: RunConfig, out: Output) -> int:
    kind = cfg.kind()
    theta = cfg.theta
    try:
        kt = tcrit_zero_field(kind, cfg.thresholds) if theta == 0 else tcrit_general(theta, kind, cfg.thresholds)
    except (KeyError, LatticeError) as exc:
        raise UsageError(str(exc)) from None
    kt = _scale(kt, args.delta)
    if out.as_json:
        out.document({"command": "critical-temp", "kind": kind, "theta": theta, "kt_crit": kt,
                      "bond_threshold": cfg.thresholds.bond_threshold[kind]})
    else:
        out.buf.write(fmt(kt) + "\n")
    return 0


def _grid(spec: str | None, default: tuple[float, float, int]) -> np.ndarray:
    if spec is None:
        lo, hi, n = default
    else:
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid must be start:stop:count, got {spec!r}")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"grid must be start:stop:count, got {spec!r}") from None
        if n < 1:
            raise UsageError("grid count must be >= 1")
    return np.linspace(lo, hi, n)


def cmd_phase_diagram(args, cfg: RunConfig, out: Output) -> int:
    kind = cfg.kind()
    thetas = _grid(args.theta_grid, (0.0, math.pi / 2, 11))
    kts = _grid(args.kt_grid, (0.05, 2 * tcrit_zero_field(kind, cfg.thresholds), 20)) if args.kt_grid or not args.boundaries_only else None
    if np.any(thetas < 0) or np.any(thetas > math.pi / 2 + 1e-12):
        raise UsageError("theta grid must lie in [0, pi/2]")
    thetas = np.clip(thetas, 0.0, math.pi / 2)
    header = ["theta", "tcrit_C", "tc_Q_min", "tc_Q_max", "qprime_T_min", "qprime_T_max",
              "kt", "region", "C", "Q", "Qprime", "p_e", "p_total", "T_prime", "p1"]
    rows = []
    for th in thetas:
        tc = tcrit_zero_field(kind, cfg.thresholds) if th == 0 else tcrit_general(float(th), kind, cfg.thresholds)
        bounds = [tc, *q_window(float(th), cfg.p_c),
                  *qprime_window(float(th), kind, cfg.p_c, cfg.thresholds)]
        bounds = [_scale(b, args.delta) for b in bounds]
        if kts is None:
            rows.append([float(th), *bounds, "", "", "", "", "", "", "", "", ""])
            continue
        for kt in kts:
            v = classify(float(kt), float(th), kind, cfg.thresholds, cfg.p_c)
            e = v.evidence
            rows.append([float(th), *bounds, _scale(float(kt), args.delta), v.region, v.conditions["C"],
                         v.conditions["Q"], v.conditions["Qprime"], e["p_e"], e["p_total"],
                         _scale(e["T_prime"], args.delta), e["p1"]])
    if out.as_json:
        out.document({"command": "phase-diagram", "kind": kind, "p_c": cfg.p_c,
                      "tc_dephasing": _scale(tc_dephasing(cfg.p_c), args.delta),
                      "rows": [dict(zip(header, r)) for r in rows]})
    else:
        out.row(header)
        for r in rows:
            out.row(r)
    return 0


def _ensembles(cfg: RunConfig, graph: LatticeGraph, pe: float | None):
    if pe is not None:
        if not 0 <= pe <= 1:
            raise UsageError("--pe must lie in [0, 1]")
        return ensemble_for_pe(pe)
    params = cfg.params()
    if params.theta >= math.pi / 2:
        raise UsageError("bond ensembles need theta < pi/2")
    return params


def _histogram(sizes) -> str:
    vals, counts = np.unique(np.asarray(sizes), return_counts=True)
    return ";".join(f"{int(v)}:{int(c)}" for v, c in zip(vals, counts))


def cmd_sample(args, cfg: RunConfig, out: Output) -> int:
    from .lattice import connected_clusters

    graph = cfg.graph()
    ens = _ensembles(cfg, graph, args.pe)
    choices = sample_configurations(graph, ens, cfg.shots, cfg.seed)
    rows = []
    for k, c in enumerate(choices):
        part = connected_clusters(graph, c == 0)
        rows.append((k, "".join("1" if x == 0 else "0" for x in c), _histogram(part.sizes)))
    if out.as_json:
        out.document({"command": "sample", "shots": [{"shot": k, "mask": m, "cluster_histogram": h}
                                                     for k, m, h in rows]})
    else:
        out.row(["shot", "mask", "cluster_histogram"])
        for r in rows:
            out.row(r)
    return 0


def cmd_percolation(args, cfg: RunConfig, out: Output) -> int:
    graph = cfg.graph()
    ens = _ensembles(cfg, graph, args.pe)
    stats = gather_stats(graph, ens, cfg.shots, cfg.seed)
    costs = stats.cost_bounds()
    if out.as_json:
        p_e = args.pe if args.pe is not None else None
        doc = {"command": "percolation", "n_sites": graph.n_sites, "shots": stats.shots,
               "mean_cluster_size": stats.mean_cluster_size, "mean_cluster_size_se": stats.mean_cluster_size_se,
               "mean_largest": stats.mean_largest,
               "rows": [{"shot": k, "largest": int(l), "n_clusters": int(n), "cost_bound": str(c)}
                        for k, (l, n, c) in enumerate(zip(stats.largest, stats.n_clusters, costs))]}
        if p_e is not None and graph.kind in cfg.thresholds.bond_threshold:
            doc["simulable"] = is_simulable(p_e, graph.kind, cfg.thresholds)
        out.document(doc)
    else:
        out.row(["shot", "largest", "n_clusters", "cost_bound"])
        for k, (l, n, c) in enumerate(zip(stats.largest, stats.n_clusters, costs)):
            out.row([k, int(l), int(n), c])
    return 0


def cmd_simulate(args, cfg: RunConfig, out: Output) -> int:
    graph = cfg.graph()
    if not args.pattern:
        raise UsageError("--pattern is required")
    try:
        pattern = MeasurementPattern.from_json(Path(args.pattern).read_text())
        pattern.validate_for(graph)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.pattern}: malformed JSON at line {exc.lineno}, column {exc.colno}") from None
    except (OSError, PatternError) as exc:
        raise UsageError(str(exc)) from None
    ens = _ensembles(cfg, graph, args.pe)
    records = run_pattern(graph, ens, pattern, cfg.shots, cfg.seed, cap=cfg.cap_statevector)
    hist = outcome_histogram(records)
    failed = sum(r.failed for r in records)
    if out.as_json:
        out.document({"command": "simulate", "histogram": hist, "failed_shots": failed,
                      "records": [{"shot": r.shot, "outcomes": r.bitstring, "cluster_sizes": list(r.cluster_sizes),
                                   "cost": str(r.cost), "failed": r.failed} for r in records]})
    else:
        out.row(["shot", "outcomes", "cluster_sizes", "cost", "failed"])
        for r in records:
            out.row([r.shot, r.bitstring, " ".join(map(str, r.cluster_sizes)), r.cost, r.failed])
        text = json.dumps({"schema_version": SCHEMA_VERSION, "histogram": hist, "failed_shots": failed},
                          sort_keys=True) + "\n"
        if args.hist_out:
            Path(args.hist_out).write_text(text)
        else:
            sys.stderr.write(text)
    return 0


def cmd_decompose_bond(args, cfg: RunConfig, out: Output) -> int:
    params = cfg.params()
    if args.degree < 1:
        raise UsageError("--degree must be >= 1")
    d_other = args.degree_other or args.degree
    try:
        ens = build_ensemble(params, args.degree, d_other)
        half, other = solve_bond_params(params, args.degree), solve_bond_params(params, d_other)
    except (BondSolveError, DecompositionError) as exc:
        out.document({"command": "decompose-bond", "error": str(exc)})
        return 1
    out.document({"command": "decompose-bond", "beta": params.beta if math.isfinite(params.beta) else "inf",
                  "theta": params.theta, "degree": args.degree, "degree_other": d_other,
                  "alpha": [half.alpha, other.alpha], "gamma": [half.gamma, other.gamma], **ens.to_dict()})
    return 0


def cmd_verify(args, cfg: RunConfig, out: Output) -> int:
    results = run_checks(args.max_sites)
    if out.as_json:
        out.document({"command": "verify", "results": [r.__dict__ for r in results],
                      "passed": all(r.passed for r in results)})
    else:
        for r in results:
            out.buf.write(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}\n")
    return 0 if all(r.passed for r in results) else 1


# --- argument parsing -------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 2 without argparse's SystemExit traceback
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, params: bool = True) -> None:
    p.add_argument("--config", help="JSON file with run settings (flags override it)")
    p.add_argument("--lattice", help="lattice name, JSON spec, or JSON file")
    p.add_argument("--dims", type=int, nargs="+")
    p.add_argument("--boundary", choices=["open", "periodic"])
    if params:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--beta", type=float)
        g.add_argument("--kt", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.add_argument("--pc", type=float, help="dephasing threshold p_c")
    p.add_argument("--pc-site", type=float, help="site percolation threshold override")
    p.add_argument("--bond-threshold", type=float, help="bond percolation threshold override")
    p.add_argument("--cap-oracle", type=int)
    p.add_argument("--cap-statevector", type=int)
    p.add_argument("--delta", type=float, default=1.0, help="gap in display units (output only)")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thermocluster", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("critical-temp", help="region C temperature for a lattice")
    _common(p, params=False)

    p = sub.add_parser("phase-diagram", help="boundaries and region labels on a (kT, theta) grid")
    _common(p, params=False)
    p.add_argument("--theta-grid", help="start:stop:count in radians")
    p.add_argument("--kt-grid", help="start:stop:count in kT/gap")
    p.add_argument("--boundaries-only", action="store_true")

    for name, help_ in (("sample", "sample bond configurations"),
                        ("percolation", "cluster statistics of sampled configurations")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--pe", type=float, help="use the zero-field ensemble with this p_e instead")

    p = sub.add_parser("simulate", help="run a measurement pattern on sampled instances")
    _common(p)
    p.add_argument("--pattern")
    p.add_argument("--pe", type=float)
    p.add_argument("--hist-out")

    p = sub.add_parser("decompose-bond", help="entangled/product decomposition of a thermal bond")
    _common(p)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--degree-other", type=int)

    p = sub.add_parser("verify", help="run the oracle checks on small graphs")
    _common(p, params=False)
    p.add_argument("--max-sites", type=int, default=6)
    return parser


COMMANDS = {
    "critical-temp": cmd_critical_temp,
    "phase-diagram": cmd_phase_diagram,
    "sample": cmd_sample,
    "percolation": cmd_percolation,
    "simulate": cmd_simulate,
    "decompose-bond": cmd_decompose_bond,
    "verify": cmd_verify,
}


def dispatch(argv: Sequence[str] | None = None) -> int:
    try:
        args = make_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        cfg = build_config(args)
        out = Output(cfg.out, args.json)
        code = COMMANDS[args.command](args, cfg, out)
        out.flush()
        return code
    except UsageError as exc:
        sys.stderr.write(f"thermocluster: error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"thermocluster: error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
