"""``portvar`` command line.

Every run is driven by one JSON config document plus flags (flag beats
environment beats config beats default). Output is a sorted-key JSON document
embedding the resolved config, the ``gamma`` values used and the library
version; its ``timestamp`` field is left out of :func:`canonical_json`.

Exit codes: 0 success, 2 usage or input error, 3 count mismatch or degree
warning, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, critical, discriminant, variety
from .cumulants import CumulantMatrix, IngestionError, estimate_matrix, read_returns_csv
from .model import UtilityModel
from .tracker import TrackerConfig

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_NUMERICAL = 0, 2, 3, 4
SEED_ENV = "PORTVAR_SEED"
COMMANDS = ("estimate", "solve", "solve-strata", "discriminant", "variety-dim",
            "variety-degree", "sample", "optimize")
TRACKER_FIELDS = set(TrackerConfig.__dataclass_fields__) - {"seed", "threads"}

logger = logging.getLogger("portvar")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def canonical_json(doc: dict) -> str:
    """Sorted-key JSON without the timestamp, for reproducibility comparisons."""
    return json.dumps({k: v for k, v in doc.items() if k != "timestamp"}, sort_keys=True)


def _complex_list(values) -> list[list[float]]:
    return [[float(np.real(g)), float(np.imag(g))] for g in values]


# -- config resolution ------------------------------------------------------

def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = _load_json(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = dict(cfg)
    cfg["command"] = args.command
    tracker = dict(cfg.get("tracker", {}))
    unknown = set(tracker) - TRACKER_FIELDS
    if unknown:
        raise UsageError(f"unknown tracker fields: {sorted(unknown)}")
    for name in ("newton_tol", "dedup_radius"):
        if getattr(args, name, None) is not None:
            tracker[name] = getattr(args, name)
    cfg["tracker"] = tracker

    seed = cfg.get("seed", 0)
    if os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer") from None
    if args.seed is not None:
        seed = args.seed
    cfg["seed"] = int(seed)
    cfg["threads"] = int(args.threads if args.threads is not None else cfg.get("threads", 1))
    cfg["format"] = args.format or cfg.get("format", "json")
    if args.output is not None:
        cfg["output"] = args.output
    cfg.setdefault("output", None)

    if getattr(args, "model", None):
        cfg["model_path"] = args.model
    for key in ("input", "order", "direction", "s_range", "grid", "samples", "resolution"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def tracker_config(cfg: dict) -> TrackerConfig:
    try:
        return TrackerConfig(seed=cfg["seed"], threads=cfg["threads"], **cfg["tracker"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad tracker config: {exc}") from None


def _model_doc(cfg: dict) -> dict:
    if "model" in cfg:
        return cfg["model"]
    if cfg.get("model_path"):
        return _load_json(cfg["model_path"])
    raise UsageError("no model given (use --model or a 'model' entry in the config)")


def load_model(cfg: dict) -> UtilityModel:
    try:
        return UtilityModel.from_dict(_model_doc(cfg))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad model: {exc}") from None


def load_cumulants(cfg: dict) -> CumulantMatrix:
    doc = _model_doc(cfg)
    try:
        return CumulantMatrix.from_dict(doc["k"] if "k" in doc else doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad cumulant matrix: {exc}") from None


# -- commands: each returns (result dict, gammas, exit code) -----------------

def cmd_estimate(cfg: dict):
    if not cfg.get("input"):
        raise UsageError("estimate needs a returns CSV")
    order = int(cfg.get("order", 4))
    try:
        series = read_returns_csv(cfg["input"])
        k = estimate_matrix(series, order)
    except FileNotFoundError:
        raise UsageError(f"file not found: {cfg['input']}") from None
    except (IngestionError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    out = k.to_dict()
    out["labels"] = list(k.labels)
    out["valid"] = k.is_valid
    out["zero_entries"] = [list(e) for e in k.zero_entries()]
    if not k.is_valid:
        logger.warning("cumulant matrix has zero entries at %s; solving will refuse it", k.zero_entries())
    return out, [], EXIT_OK


def _solve(cfg: dict, m: UtilityModel) -> critical.CriticalResult:
    if m.w.w[-1] == 0.0:
        raise UsageError("w_d is zero: the top-order weight must be non-zero; use solve-strata")
    try:
        res = critical.solve_critical(m, tracker_config(cfg), warn=False)
    except critical.ModelError as exc:
        raise UsageError(str(exc)) from None
    if not any(p.success for p in res.paths):
        raise NumericalFailure("no path reached t = 0")
    return res


def cmd_solve(cfg: dict):
    m = load_model(cfg)
    res = _solve(cfg, m)
    return res.to_dict(), res.summary.gammas, EXIT_OK if res.count_matches else EXIT_MISMATCH


def cmd_solve_strata(cfg: dict):
    m = load_model(cfg)
    try:
        strata = critical.solve_strata(m, tracker_config(cfg))
    except critical.ModelError as exc:
        raise UsageError(str(exc)) from None
    out, gammas, code = {"n": m.n, "d": m.d, "strata": {}}, [], EXIT_OK
    for e, res in strata.items():
        if res is None:
            out["strata"][str(e)] = None
            continue
        out["strata"][str(e)] = res.to_dict()
        gammas.extend(res.summary.gammas)
        if not res.count_matches:
            code = EXIT_MISMATCH
    out["expected_total"] = critical.strata_count(m.n, m.d)
    out["found_total"] = sum(r.count for r in strata.values() if r is not None)
    return out, gammas, code


def cmd_discriminant(cfg: dict):
    m = load_model(cfg)
    if "direction" not in cfg:
        raise UsageError("discriminant needs a weight direction")
    direction = np.asarray(cfg["direction"], dtype=float)
    s_range = tuple(cfg.get("s_range", (-1.0, 1.0)))
    if len(s_range) != 2 or not s_range[0] < s_range[1]:
        raise UsageError("s_range must be two increasing numbers")
    try:
        rep = discriminant.find_collision(m, direction, s_range, tracker_config(cfg),
                                          n_grid=int(cfg.get("grid", 21)))
    except (ValueError, critical.ModelError) as exc:
        raise UsageError(str(exc)) from None
    return rep.to_dict(), [], EXIT_OK


def cmd_variety_dim(cfg: dict):
    pm = variety.PortfolioMap(load_cumulants(cfg))
    rep = variety.dimension_estimate(pm, int(cfg.get("samples", 100)), cfg["seed"])
    return rep.to_dict(), [], EXIT_OK


def cmd_variety_degree(cfg: dict):
    pm = variety.PortfolioMap(load_cumulants(cfg))
    try:
        rep = variety.degree_compute(pm, tracker_config(cfg), cfg["seed"])
    except variety.PreconditionError as exc:
        raise UsageError(str(exc)) from None
    except RuntimeError as exc:
        raise NumericalFailure(str(exc)) from None
    gammas = rep.tracking.gammas if rep.tracking else []
    return rep.to_dict(), gammas, EXIT_MISMATCH if rep.warnings else EXIT_OK


def cmd_sample(cfg: dict):
    pm = variety.PortfolioMap(load_cumulants(cfg))
    resolution = int(cfg.get("resolution", 50))
    if resolution < pm.n:
        raise UsageError(f"resolution must be at least n={pm.n}")
    cloud = variety.sample_variety(pm, resolution)
    cols = variety.point_cloud_header(pm.n, pm.d)
    return {"n": pm.n, "d": pm.d, "columns": cols, "points": cloud.tolist()}, [], EXIT_OK


def cmd_optimize(cfg: dict):
    m = load_model(cfg)
    if m.w.w[-1] == 0.0:
        raise UsageError("w_d is zero: the top-order weight must be non-zero; use solve-strata")
    try:
        opt = critical.optimize(m, tracker_config(cfg))
    except critical.ModelError as exc:
        raise UsageError(str(exc)) from None
    if not any(p.success for p in opt.solve.paths):
        raise NumericalFailure("no path reached t = 0")
    out = opt.to_dict()
    out["count_matches"] = opt.solve.count_matches
    return out, opt.solve.summary.gammas, EXIT_OK if opt.solve.count_matches else EXIT_MISMATCH


HANDLERS = {
    "estimate": cmd_estimate,
    "solve": cmd_solve,
    "solve-strata": cmd_solve_strata,
    "discriminant": cmd_discriminant,
    "variety-dim": cmd_variety_dim,
    "variety-degree": cmd_variety_degree,
    "sample": cmd_sample,
    "optimize": cmd_optimize,
}


# -- output -----------------------------------------------------------------

def to_csv(command: str, result: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if command == "estimate":
        labels = result["labels"] or [f"asset{i + 1}" for i in range(result["n"])]
        writer.writerow(["asset"] + [f"k{j}" for j in range(1, result["d"] + 1)])
        for lab, row in zip(labels, result["entries"]):
            writer.writerow([lab] + [repr(float(v)) for v in row])
    elif command in ("solve", "optimize"):
        sols = result["solutions"] if command == "solve" else result.get("feasible") or []
        if command == "optimize" and result["best"] is None:
            sols = []
        n = len(sols[0]["x_re"]) if sols else 0
        if command == "solve":
            writer.writerow([f"x{i}_re" for i in range(1, n + 1)] + [f"x{i}_im" for i in range(1, n + 1)]
                            + ["lambda_re", "lambda_im", "classification", "multiplicity", "residual"])
            for s in sols:
                writer.writerow([repr(v) for v in s["x_re"] + s["x_im"]]
                                + [repr(s["lambda_re"]), repr(s["lambda_im"]), s["classification"],
                                   s["multiplicity"], repr(s["residual"])])
        else:
            writer.writerow([f"x{i}" for i in range(1, n + 1)] + ["utility"])
            for s in sols:
                writer.writerow([repr(v) for v in s["x"]] + [repr(s["utility"])])
    elif command == "sample":
        writer.writerow(result["columns"])
        for row in result["points"]:
            writer.writerow([repr(float(v)) for v in row])
    else:
        raise UsageError(f"--format csv is not available for {command}")
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config document")
    common.add_argument("--seed", type=int, help=f"random seed (overrides {SEED_ENV} and config)")
    common.add_argument("--threads", type=int, help="worker cap for path tracking (0 = auto)")
    common.add_argument("--output", "-o", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--verbose", "-v", action="store_true")

    model_opts = argparse.ArgumentParser(add_help=False)
    model_opts.add_argument("--model", help='model JSON: {"k": {"entries": ...}, "w": [...]}')

    tracking = argparse.ArgumentParser(add_help=False)
    tracking.add_argument("--newton-tol", dest="newton_tol", type=float)
    tracking.add_argument("--dedup-radius", dest="dedup_radius", type=float)

    parser = argparse.ArgumentParser(prog="portvar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"portvar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="cumulant matrix from a returns CSV")
    p.add_argument("input", nargs="?", help="CSV, one column per asset")
    p.add_argument("--order", "-d", type=int, help="highest cumulant order (default 4)")

    for name, text in (("solve", "all complex critical portfolios"),
                       ("solve-strata", "critical portfolios of every truncated utility"),
                       ("optimize", "best real interior critical portfolio")):
        sub.add_parser(name, parents=[common, model_opts, tracking], help=text)

    p = sub.add_parser("discriminant", parents=[common, model_opts, tracking],
                       help="search a weight segment for merging critical points")
    p.add_argument("--direction", type=_float_list, help="comma-separated weight direction")
    p.add_argument("--s-range", dest="s_range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--grid", type=int, help="grid points on the segment (default 21)")

    p = sub.add_parser("variety-dim", parents=[common, model_opts], help="numerical dimension of the variety")
    p.add_argument("--samples", type=int, help="random points (default 100)")
    sub.add_parser("variety-degree", parents=[common, model_opts, tracking], help="degree by linear slicing")
    p = sub.add_parser("sample", parents=[common, model_opts], help="point cloud on a simplex grid")
    p.add_argument("--resolution", type=int, help="grid resolution (default 50)")
    return parser


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def run(argv=None) -> tuple[int, dict | None]:
    """Parse, execute and write output; returns ``(exit code, output document)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_USAGE), None
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="portvar: %(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        result, gammas, code = HANDLERS[args.command](cfg)
        doc = {
            "command": args.command,
            "config": cfg,
            "gammas": _complex_list(gammas),
            "version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "result": result,
        }
        if cfg["format"] == "csv":
            text = to_csv(args.command, result)
        else:
            text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    except UsageError as exc:
        print(f"portvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"portvar: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, None
    if cfg["output"]:
        Path(cfg["output"]).write_text(text)
    else:
        sys.stdout.write(text)
    if code == EXIT_MISMATCH:
        print("portvar: warning: result count differs from the generic count", file=sys.stderr)
    return code, doc


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
