"""``kpz-lab`` command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 invalid input or missing
artifacts, 3 resource limits, 4 non-finitary initial condition.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import kpz, plotting, sheet, stats, suites
from .errors import (DomainError, KpzLabError, NonFinitaryError, ParameterError, ResourceError,
                     ValidationError, WindowNotFoundError)
from .grid import GridSpec, LineEnsemble, write_csv
from .sampler import RngStream

DEFAULTS = {
    "simulate": {"seed": 0, "n": 100, "depth_k": 1, "step": 0.01, "y_range": "-2:2", "x_range": "0:0",
                 "backend": "environment", "oversample": 1, "replicas": 1, "out": None},
    "evolve": {"seed": 0, "n": 100, "step": 0.01, "y_range": "-1:1", "t": 1.0, "ic": "narrow-wedge",
               "oversample": 1, "C": 5.0, "sheet": None, "out": None},
    "verify": {"seed": 0, "suite": "all", "instances": 1000, "replicas": 200, "two_step_replicas": 500,
               "n": 100, "step": 0.01, "oversample": 16, "depth_k": 6, "workers": None, "out": "."},
}
INT_KEYS = {"seed", "n", "depth_k", "oversample", "replicas", "instances", "two_step_replicas", "workers"}
FLOAT_KEYS = {"step", "t", "C"}


class UsageError(KpzLabError):
    pass


def parse_range(text: str) -> tuple[float, float]:
    parts = str(text).split(":")
    if len(parts) != 2:
        raise UsageError(f"range {text!r} must look like lo:hi")
    lo, hi = float(parts[0]), float(parts[1])
    if lo > hi:
        raise UsageError(f"range {text!r} has lo > hi")
    return lo, hi


def read_config(path: str | None) -> dict:
    """Flat ``key = value`` file; an optional section header is ignored."""
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file {path} not found")
    text = p.read_text()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    out = {}
    for section in cp.sections():
        for k, v in cp[section].items():
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Defaults, overridden by the config file, overridden by flags."""
    conf = dict(DEFAULTS[command])
    file_conf = read_config(getattr(args, "config", None))
    unknown = set(file_conf) - set(conf)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    conf.update(file_conf)
    for key in DEFAULTS[command]:
        val = getattr(args, key, None)
        if val is not None:
            conf[key] = val
    for key in INT_KEYS & set(conf):
        if conf[key] is not None:
            conf[key] = int(conf[key])
    for key in FLOAT_KEYS & set(conf):
        conf[key] = float(conf[key])
    return conf


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def _out_dir(conf: dict) -> Path:
    if not conf.get("out"):
        raise UsageError("--out is required")
    out = Path(conf["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- simulate ------------------------------------------------------------------

def _sheet_ensemble(s: sheet.SheetApprox) -> LineEnsemble:
    """Retained lines restricted to the declared y-range."""
    yj = s.y_nodes()
    cols = yj + s.time_nodes
    return LineEnsemble(GridSpec.from_count(yj[0] * s.delta, s.delta, yj.size), s.ensemble.values[:, cols])


def save_sheet(s: sheet.SheetApprox, path: Path) -> None:
    np.savez(path, environment=s.environment, env_first=s.env_first, n=s.n, depth_k=s.depth_k,
             time_nodes=s.time_nodes, x_range=np.array(s.x_range), y_range=np.array(s.y_range),
             backend=s.backend, lines=s.m)


def load_sheet(run_dir: Path) -> sheet.SheetApprox:
    path = run_dir / "sheet.npz"
    if not path.is_file():
        raise UsageError(f"{path} not found; run simulate first")
    d = np.load(path, allow_pickle=False)
    N = int(d["time_nodes"])
    env = d["environment"]
    B = LineEnsemble(GridSpec.from_count(int(d["env_first"]) / N, 1.0 / N, env.shape[1]), env)
    return sheet.sheet_from_environment(B, int(d["depth_k"]), tuple(d["x_range"]), tuple(d["y_range"]),
                                        backend=str(d["backend"]), m=int(d["lines"]))


def cmd_simulate(conf: dict) -> int:
    out = _out_dir(conf)
    x_range, y_range = parse_range(conf["x_range"]), parse_range(conf["y_range"])
    chash = stats.config_hash(conf | {"out": None})
    files = []
    for r in range(conf["replicas"]):
        s = sheet.build_sheet_approx(conf["n"], conf["depth_k"], x_range, y_range, conf["step"],
                                     RngStream(conf["seed"], r, "sheet"), backend=conf["backend"],
                                     oversample=conf["oversample"])
        name = "ensemble.csv" if r == 0 else f"ensemble_r{r:04d}.csv"
        write_csv(_sheet_ensemble(s), out / name, label="y")
        files.append(name)
        if r == 0:
            save_sheet(s, out / "sheet.npz")
            files.append("sheet.npz")
            sheet_meta = s.to_meta()
    write_json(out / "meta.json", {"command": "simulate", "config": conf | {"out": None},
                                   "config_hash": chash, "sheet": sheet_meta, "files": files})
    return 0


# -- evolve --------------------------------------------------------------------

def cmd_evolve(conf: dict) -> int:
    out = _out_dir(conf)
    h0 = kpz.parse_ic(conf["ic"])
    t = conf["t"]
    y_range = parse_range(conf["y_range"])
    report = kpz.is_finitary(h0, t)
    if not report:
        raise NonFinitaryError(report.reason)
    window = kpz.restriction_window(h0, t, y_range, conf["C"])
    sx = t ** (-2 / 3)
    if conf.get("sheet"):
        s = load_sheet(Path(conf["sheet"]))
    else:
        pad = conf["step"]
        s = sheet.build_sheet_approx(conf["n"], 1, (window[0] * sx - pad, window[1] * sx + pad),
                                     (y_range[0] * sx, y_range[1] * sx), conf["step"],
                                     RngStream(conf["seed"], 0, "sheet"), oversample=conf["oversample"],
                                     with_melon=False)
    ev = kpz.evolve_details(h0, t, s, y_range, conf["C"], window=window)
    with open(out / "profile.csv", "w") as fh:
        fh.write("y,h\n")
        for y, h in zip(ev.y, ev.h):
            fh.write(f"{float(y)!r},{'-inf' if h == -np.inf else repr(float(h))}\n")
    validated = None
    if h0.point_masses() == [0.0] and len(h0.support) == 1 and t == 1.0:
        top = s.top_line_at(np.rint(ev.y / s.delta).astype(int))
        validated = bool(np.array_equal(ev.h, top))
    write_json(out / "window.json", {
        "command": "evolve", "config": conf | {"out": None}, "config_hash": stats.config_hash(conf | {"out": None}),
        "ic": h0.name, "t": t, "window": list(window), "C": conf["C"], "finitary": report.reason,
        "lattice_step": float(t ** (2 / 3) * s.delta), "y_nodes": int(ev.y.size),
        "argmax_range": [float(np.min(ev.argmax_x)), float(np.max(ev.argmax_x))],
        "narrow_wedge_top_line_check": validated, "sheet": s.to_meta()})
    if validated is False:
        print("error: narrow-wedge profile differs from the top line", file=sys.stderr)
        return 1
    return 0


# -- verify --------------------------------------------------------------------

def cmd_verify(conf: dict) -> int:
    out = _out_dir(conf)
    workers = conf["workers"] if conf["workers"] is not None else suites.default_workers()
    if workers < 1:
        raise UsageError("--workers must be at least 1")
    if conf["suite"] not in ("algebraic", "statistical", "all"):
        raise UsageError(f"unknown suite {conf['suite']!r}")
    payload_conf = {k: v for k, v in conf.items() if k not in ("out", "workers")}
    results, observables = [], {}
    started = time.perf_counter()
    if conf["suite"] in ("algebraic", "all"):
        for r in suites.algebraic_suite(conf["seed"], conf["instances"], workers,
                                        sheet_n=conf["n"], sheet_step=conf["step"]):
            results.append({"suite": "algebraic", **r})
    if conf["suite"] in ("statistical", "all"):
        cfg = suites.StatConfig(n=conf["n"], step=conf["step"], oversample=conf["oversample"],
                                replicas=conf["replicas"], two_step_replicas=conf["two_step_replicas"],
                                depth_k=conf["depth_k"])
        res, observables = suites.statistical_suite(cfg, conf["seed"], workers)
        results.extend({"suite": "statistical", **r} for r in res)
    passed = all(r["pass"] for r in results)
    write_json(out / "report.json", {
        "command": "verify", "suite": conf["suite"], "seed": conf["seed"], "config": payload_conf,
        "config_hash": stats.config_hash(payload_conf), "pass": passed, "results": results,
        "observables": observables,
        "timing": {"seconds": time.perf_counter() - started, "workers": workers}})
    for r in results:
        if not r["pass"]:
            print(f"FAIL {r['test']}: {json.dumps(_clean({k: v for k, v in r.items() if k != 'test'}))}",
                  file=sys.stderr)
    return 0 if passed else 1


# -- plotdata ------------------------------------------------------------------

def cmd_plotdata(run_dir: Path, out: Path | None) -> int:
    if not run_dir.is_dir():
        raise UsageError(f"{run_dir} is not a directory")
    out = out or run_dir
    out.mkdir(parents=True, exist_ok=True)
    made = []
    if (run_dir / "ensemble.csv").is_file():
        lines = plotting.lines_tidy(run_dir / "ensemble.csv", out)
        plotting.plot_lines(lines, out / "lines.png")
        made += ["lines.csv", "lines.png"]
    if (run_dir / "profile.csv").is_file():
        plotting.plot_profile(run_dir / "profile.csv", out / "profile.png")
        made.append("profile.png")
    if (run_dir / "report.json").is_file():
        rep = json.loads((run_dir / "report.json").read_text())
        qv = {k[3:]: v for k, v in rep.get("observables", {}).items() if k.startswith("qv_")}
        if qv:
            hist = plotting.qv_histogram(qv, out)
            # QV of 2-Brownian motion over a unit interval
            plotting.plot_qv_hist(hist, out / "qv_hist.png", target=2.0)
            made += ["qv_hist.csv", "qv_hist.png"]
    if not made:
        raise UsageError(f"{run_dir} holds no ensemble.csv, profile.csv or report.json with QV samples")
    plotting.write_script(out)
    return 0


# -- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kpz-lab", description="Simulate melons and sheets, evolve KPZ initial data, verify.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key=value file; flags override it")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")

    s = sub.add_parser("simulate", help="build sheet approximations and write ensembles")
    common(s)
    s.add_argument("--n", type=int)
    s.add_argument("--depth-k", type=int)
    s.add_argument("--step", type=float)
    s.add_argument("--y-range")
    s.add_argument("--x-range")
    s.add_argument("--backend", choices=sheet.BACKENDS)
    s.add_argument("--oversample", type=int)
    s.add_argument("--replicas", type=int)

    e = sub.add_parser("evolve", help="evolve an initial condition with a simulated sheet")
    common(e)
    e.add_argument("--ic", help="narrow-wedge[@a], flat, parabola:c or file:path.csv")
    e.add_argument("--t", type=float)
    e.add_argument("--n", type=int)
    e.add_argument("--step", type=float)
    e.add_argument("--y-range")
    e.add_argument("--oversample", type=int)
    e.add_argument("--C", type=float, dest="C", help="landscape constant of the restriction window")
    e.add_argument("--sheet", help="run directory of a previous simulate")

    v = sub.add_parser("verify", help="run verification suites")
    common(v)
    v.add_argument("--suite", choices=("algebraic", "statistical", "all"))
    v.add_argument("--instances", type=int)
    v.add_argument("--replicas", type=int)
    v.add_argument("--two-step-replicas", type=int)
    v.add_argument("--n", type=int)
    v.add_argument("--step", type=float)
    v.add_argument("--oversample", type=int)
    v.add_argument("--depth-k", type=int)
    v.add_argument("--workers", type=int, help="worker processes (default $KPZLAB_WORKERS or 1)")

    d = sub.add_parser("plotdata", help="emit tidy CSVs, figures and a plotting script")
    d.add_argument("run_dir")
    d.add_argument("--out")
    return p


RANGE_FLAGS = ("--y-range", "--x-range")


def _join_ranges(argv: list[str]) -> list[str]:
    """Accept ``--y-range -2:2`` by rewriting it to ``--y-range=-2:2``."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in RANGE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and ":" in argv[i + 1]:
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_join_ranges(argv))
    try:
        if args.command == "plotdata":
            return cmd_plotdata(Path(args.run_dir), Path(args.out) if args.out else None)
        conf = resolve(args.command, args)
        return {"simulate": cmd_simulate, "evolve": cmd_evolve, "verify": cmd_verify}[args.command](conf)
    except (NonFinitaryError, WindowNotFoundError) as exc:
        print(f"error: initial condition is not finitary: {exc}", file=sys.stderr)
        return 4
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (UsageError, ParameterError, ValidationError, DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
