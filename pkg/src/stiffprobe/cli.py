"""Command-line front end.

::

    stiffprobe forward --config run.json [--out DIR]
    stiffprobe recover --config run.json [--out DIR]
    stiffprobe verify [--level quick|full]

Exit codes: 0 success, 1 verification failure, 2 invalid input, 3 solver
failure or empty observable set. ``STIFFPROBE_THREADS`` caps the BLAS
thread pools.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import fem, fields
from .config import ConfigError, RunConfig, load_config
from .linsolve import SingularSystemError
from .mesh import dof_count
from .pipeline import EmptyObservableSetError, ScenarioError, framing_load, run_scenario, solve_initial
from .verify import FULL, QUICK, format_table, run_checks

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_SOLVER = 3

log = logging.getLogger("stiffprobe")


def _thread_limit():
    value = os.environ.get("STIFFPROBE_THREADS")
    if not value:
        return contextlib.nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"STIFFPROBE_THREADS must be a positive integer, got '{value}'") from None
    if n < 1:
        raise ConfigError(f"STIFFPROBE_THREADS must be a positive integer, got '{value}'")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _summary(cfg: RunConfig) -> dict:
    sc = cfg.scenario
    total, free = dof_count(sc.mesh)
    return {
        "mesh": {"nodes": sc.mesh.n_nodes, "elements": sc.mesh.n_elements, "kind": sc.mesh.kind,
                 "dofs_total": total, "dofs_free": free},
        "framing": sc.load_framing,
        "expansion": sc.include_expansion,
        "noise_sigma": sc.noise_sigma,
        "seed": sc.seed,
    }


def _write_all(out: Path, files: dict[str, str]) -> None:
    for name in sorted(files):
        fields.atomic_write(out / name, files[name])


def _nan_field(mesh, idx, values) -> np.ndarray:
    full = np.full(mesh.n_free, np.nan)
    full[idx] = values
    return full


def forward(cfg: RunConfig, out: Path) -> dict:
    sc = cfg.scenario
    try:
        u0, sigma0 = solve_initial(sc)
    except (ValueError, ArithmeticError) as exc:
        raise ScenarioError("initial", exc) from exc
    K0 = fem.assemble_stiffness(sc.mesh, sc.material, sc.theta_ref_field)
    P0 = framing_load(sc, sc.theta_ref_field)
    report = _summary(cfg)
    report.update(
        command="forward",
        u0_max_abs=float(np.abs(u0).max()) if u0.size else 0.0,
        sigma0_max_abs=float(np.abs(sigma0).max()) if sigma0.size else 0.0,
        equilibrium_residual=fem.equilibrium_residual(K0, u0, P0),
        files=["report.json", "sigma0.csv", "u0.csv"],
    )
    _write_all(out, {
        "u0.csv": fields.write_displacement(sc.mesh, u0),
        "sigma0.csv": fields.write_stress(sigma0),
        "report.json": fields.dump_report(report),
    })
    return report


def recover(cfg: RunConfig, out: Path) -> dict:
    sc = cfg.scenario
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_scenario(sc)
    obs = res.observable
    report = _summary(cfg)
    report.update(
        command="recover",
        identity_residual=res.identity_residual,
        observable_size=int(obs.size),
        observable=obs,
        condition=res.condition,
        eta=res.eta,
        recovery_error=res.recovery_error,
        first_order_error=res.first_order_error,
        u0_recovered=res.u0_recovered,
        first_order=res.u0_first_order,
        dP_norm=res.dP_norm,
        max_softening=res.max_softening,
        warnings=res.warnings,
    )
    mesh = sc.mesh
    files = {
        "u0.csv": fields.write_displacement(mesh, res.u0),
        "sigma0.csv": fields.write_stress(res.sigma0),
        "u1.csv": fields.write_displacement(mesh, res.u1),
        "sigma1.csv": fields.write_stress(res.sigma1),
        "du.csv": fields.write_displacement(mesh, res.du, fill_prescribed=False),
        "du_measured.csv": fields.write_displacement(mesh, res.du_measured, fill_prescribed=False),
        "u0_recovered.csv": fields.write_displacement(mesh, _nan_field(mesh, obs, res.u0_recovered)),
        "u0_first_order.csv": fields.write_displacement(mesh, _nan_field(mesh, obs, res.u0_first_order)),
    }
    if res.u_obs is not None:
        files["u_obs.csv"] = fields.write_displacement(mesh, res.u_obs, fill_prescribed=False)
        files["u_TE.csv"] = fields.write_displacement(mesh, res.u_TE, fill_prescribed=False)
        files["u_rel.csv"] = fields.write_displacement(mesh, res.u_rel, fill_prescribed=False)
    report["files"] = sorted(files) + ["report.json"]
    files["report.json"] = fields.dump_report(report)
    _write_all(out, files)
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stiffprobe", description="Stiffness-perturbation forward runs and initial-field recovery.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("forward", "solve the initial state"), ("recover", "run the full experiment and recovery")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--out", help="output directory (overrides the config)")
    v = sub.add_parser("verify", help="run the self-check suite")
    v.add_argument("--level", choices=(QUICK, FULL), default=QUICK)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            if args.command == "verify":
                results = run_checks(args.level)
                print(format_table(results))
                return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED
            cfg = load_config(args.config)
            out = Path(args.out) if args.out else cfg.output
            report = (forward if args.command == "forward" else recover)(cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioError as exc:
        cause = exc.cause
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(cause, EmptyObservableSetError) or isinstance(cause, ArithmeticError):
            return EXIT_SOLVER
        return EXIT_INVALID
    except SingularSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for note in report.get("warnings", []):
        print(f"warning: {note}", file=sys.stderr)
    print(f"{args.command}: wrote {len(report['files'])} files to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
