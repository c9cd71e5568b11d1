"""Command-line entry point.

    cavmetro <command> [--config FILE] [--set key=value ...] [--out DIR] [--format csv|json]

Commands: ``steady``, ``evolve``, ``trajectories``, ``scan``, ``reconstruct``,
``check-regime``.  The output directory is taken from ``--out``, then the
``CAVMETRO_OUT`` environment variable, then the ``out`` config key, then
``./cavmetro-out``.  Errors exit non-zero and print a JSON object with the error
category on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_file, parse_overrides
from .errors import CavmetroError, ConfigError
from .fock import FockTruncation, fidelity, fock_state, vacuum
from .gaussian import alternate_q, build_state, decompose, reconstruct, steady_q
from .lindblad import GeneratorKind, auto_truncation, evolve_path, steady_state
from .metrology import EXPERIMENTAL_NC, fluctuation, log_grid, regime_check, scan_and_fit
from .moments import MomentVector, approx_photon_number, closed_form_moments, steady_moments
from .trajectory import TrajectoryConfig, ensemble_average, trajectory_truncation

SCHEMA_VERSION = 1
ENV_OUT = "CAVMETRO_OUT"

logger = logging.getLogger("cavmetro")


def _clean(obj):
    """Make values JSON-serializable with a fixed representation."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(float(obj.real)), "im": _clean(float(obj.imag))}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list[Path] = []

    def json(self, name: str, payload: dict) -> Path:
        path = self.out_dir / name
        text = json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False)
        path.write_text(text + "\n")
        self.written.append(path)
        return path

    def csv(self, name: str, header: list, rows: list) -> Path:
        path = self.out_dir / name
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
        path.write_text(buf.getvalue())
        self.written.append(path)
        return path


def _envelope(cmd: str, cfg: ExperimentConfig, params=None) -> dict:
    resolved = cfg.resolved()
    resolved.pop("out", None)
    env = {"schema_version": SCHEMA_VERSION, "command": cmd, "version": __version__, "config": resolved}
    if params is not None:
        env["params"] = params.derived()
    return env


def _trunc(cfg: ExperimentConfig):
    n = cfg.get("n_max")
    return None if n is None else FockTruncation(n)


def _moment_block(m: MomentVector) -> dict:
    return {"a": m.a, "a2": m.a2, "n": m.n, "n2": m.n2, "variance": m.variance}


def _spec_block(spec) -> dict:
    return {"z0": spec.z0, "Q": spec.Q, "nbar": spec.nbar, "r0": spec.r0,
            "theta0": spec.theta0, "theta1": spec.theta1}


def _initial_state(cfg: ExperimentConfig, params, trunc):
    kind = cfg["initial"]
    if kind == "vacuum":
        return vacuum(trunc)
    if kind == "steady":
        return steady_state(params, GeneratorKind(cfg["kind"]), cfg["method"], trunc=trunc)
    return fock_state(trunc, int(kind.split(":")[1]))


def cmd_steady(cfg: ExperimentConfig, out: Writer) -> None:
    params = cfg.system()
    kind = GeneratorKind(cfg["kind"])
    rho = steady_state(params, kind, cfg["method"], trunc=_trunc(cfg))
    dm = MomentVector.from_state(rho)
    payload = _envelope("steady", cfg, params)
    payload["truncation_n_max"] = rho.trunc.n_max
    payload["n_mean"] = dm.n
    payload["moments_density_matrix"] = _moment_block(dm)
    if params.is_stable:
        cf = closed_form_moments(params)
        payload["moments_closed_form"] = cf
        payload["moments_linear_solve"] = _moment_block(steady_moments(params))
        source = dm if cfg["source"] == "density_matrix" else steady_moments(params)
    else:
        source = dm
    payload["n_mean_approx"] = approx_photon_number(params)
    spec = reconstruct(source)
    payload["gaussian"] = _spec_block(spec)
    payload["z0"] = abs(spec.z0)
    payload["r0"] = spec.r0
    payload["Q_moment_derived"] = steady_q(params) if params.is_stable else None
    payload["Q_alternate_formula"] = alternate_q(params)
    payload["fidelity_gaussian_vs_density_matrix"] = fidelity(build_state(spec, rho.trunc), rho)
    try:
        dec = decompose(params)
        payload["decomposition"] = {"alpha0": dec.alpha0, "x": dec.x, "weights": list(dec.weights),
                                    "n_mean": dec.mean_photon_number}
    except ValueError as exc:
        payload["decomposition"] = {"error": str(exc)}
    payload["regime"] = regime_check(params, cfg["strictness"]).as_dict()
    out.json("steady.json", payload)
    if cfg["format"] == "csv":
        rows = [(name, complex(val).real, complex(val).imag)
                for name, val in sorted(_moment_block(dm).items())]
        out.csv("steady_moments.csv", ["quantity", "re", "im"], rows)
    if cfg["dump_density"]:
        d = rho.trunc.dim
        rows = [(i, j, rho.matrix[i, j].real, rho.matrix[i, j].imag) for i in range(d) for j in range(d)]
        out.csv("steady_density.csv", ["row", "col", "re", "im"], rows)


def cmd_evolve(cfg: ExperimentConfig, out: Writer) -> None:
    params = cfg.system()
    kind = GeneratorKind(cfg["kind"])
    trunc = _trunc(cfg) or auto_truncation(params)
    rho0 = _initial_state(cfg, params, trunc)
    times = cfg.sample_times()
    states = evolve_path(rho0, params, kind, times, reltol=cfg["reltol"])
    header = ["t", "n_mean", "re_a", "im_a", "n2_mean", "trace", "min_eigenvalue"]
    rows = []
    for t, s in zip(times, states):
        m = MomentVector.from_state(s)
        rows.append((t, m.n, m.a.real, m.a.imag, m.n2, np.trace(s.matrix).real, s.min_eigenvalue))
    payload = _envelope("evolve", cfg, params)
    payload["truncation_n_max"] = trunc.n_max
    if cfg["format"] == "csv":
        out.csv("evolve.csv", header, rows)
        out.json("evolve_meta.json", payload)
    else:
        payload["rows"] = [dict(zip(header, r)) for r in rows]
        out.json("evolve.json", payload)


def cmd_trajectories(cfg: ExperimentConfig, out: Writer) -> None:
    params = cfg.system()
    trunc = _trunc(cfg) or trajectory_truncation(params)
    rho0 = _initial_state(cfg, params, trunc)
    tc = TrajectoryConfig(
        params=params,
        t_final=cfg["t_final"],
        n_trajectories=cfg["trajectories"],
        seed=cfg["seed"],
        sample_times=cfg.sample_times(),
        trunc=trunc,
        initial=rho0,
        chunk_size=cfg["chunk_size"],
    )
    res = ensemble_average(tc)
    rows = res.rows()
    header = list(rows[0].keys())
    payload = _envelope("trajectories", cfg, params)
    payload["metadata"] = res.metadata
    if cfg["format"] == "csv":
        out.csv("trajectories.csv", header, [[r[h] for h in header] for r in rows])
        out.json("trajectories_meta.json", payload)
    else:
        payload["rows"] = rows
        out.json("trajectories.json", payload)


def cmd_scan(cfg: ExperimentConfig, out: Writer) -> None:
    grid = log_grid(cfg["nc_min"], cfg["nc_max"], cfg["nc_points"])
    g_tau = cfg.get("g_tau", 0.01)
    p_e = cfg.get("p_e", 0.5)
    rows, fits = scan_and_fit(
        grid, cfg["lambdas"], tau=cfg["tau"], p_e=p_e,
        fit_window=(cfg["fit_min"], cfg["fit_max"]), kappa=cfg.kappa, g_tau=g_tau,
        exact=cfg["exact"], column=cfg["fit_column"],
    )
    header = ["n_c", "lambda", "delta_g2_approx", "delta_g2_exact", "regime_ok"]
    table = [(r.n_c, r.lam, r.delta_g2_approx, r.delta_g2_exact, r.regime_ok) for r in rows]
    payload = _envelope("scan", cfg)
    payload["fixed"] = {"tau": cfg["tau"], "p_e": p_e, "kappa": cfg.kappa, "g_tau": g_tau}
    payload["fits"] = [
        {"lambda": f.lam, "slope": f.slope, "intercept": f.intercept, "rms_residual": f.residual,
         "window": list(f.window), "n_points": f.n_points, "column": f.column}
        for f in fits
    ]
    if cfg["format"] == "csv":
        out.csv("scan.csv", header, table)
        out.json("scan_fits.json", payload)
    else:
        payload["rows"] = [dict(zip(header, r)) for r in table]
        out.json("scan.json", payload)


def cmd_reconstruct(cfg: ExperimentConfig, out: Writer) -> None:
    params = cfg.system()
    if cfg["source"] == "density_matrix":
        rho = steady_state(params, GeneratorKind(cfg["kind"]), cfg["method"], trunc=_trunc(cfg))
        m = MomentVector.from_state(rho)
    else:
        m = steady_moments(params)
    spec = reconstruct(m)
    payload = _envelope("reconstruct", cfg, params)
    payload["moments"] = _moment_block(m)
    payload["gaussian"] = _spec_block(spec)
    payload["Q_moment_derived"] = steady_q(params)
    payload["Q_alternate_formula"] = alternate_q(params)
    payload["alpha0"] = params.alpha0
    out.json("reconstruct.json", payload)


def cmd_check_regime(cfg: ExperimentConfig, out: Writer) -> None:
    params = cfg.system()
    payload = _envelope("check-regime", cfg, params)
    payload["regime"] = regime_check(params, cfg["strictness"]).as_dict()
    payload["experimental_nc"] = EXPERIMENTAL_NC
    if params.g > 0 and (params.atom.p_e > 0 or params.atom.lam != 0) and params.is_stable:
        f = fluctuation(params)
        payload["fluctuation"] = {"delta_g2_exact": f.delta_g2_exact,
                                  "delta_g2_approx": f.delta_g2_approx}
    out.json("regime.json", payload)


COMMANDS = {
    "steady": cmd_steady,
    "evolve": cmd_evolve,
    "trajectories": cmd_trajectories,
    "scan": cmd_scan,
    "reconstruct": cmd_reconstruct,
    "check-regime": cmd_check_regime,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cavmetro", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                   help="override a config key (repeatable)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _error(exc: CavmetroError, code: int) -> int:
    sys.stderr.write(json.dumps({"error": exc.category, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        raw = load_file(args.config) if args.config else {}
        raw.update(parse_overrides(args.set))
        if args.format:
            raw["format"] = args.format
        cfg = ExperimentConfig.from_raw(raw)
        out_dir = Path(args.out or os.environ.get(ENV_OUT) or cfg.get("out") or "cavmetro-out")
        out_dir.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        return _error(exc, 2)
    except OSError as exc:
        return _error(ConfigError(str(exc)), 2)
    writer = Writer(out_dir)
    try:
        COMMANDS[args.command](cfg, writer)
    except ConfigError as exc:
        return _error(exc, 2)
    except CavmetroError as exc:
        return _error(exc, 3)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return _error(CavmetroError(str(exc)), 3)
    for path in writer.written:
        logger.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
