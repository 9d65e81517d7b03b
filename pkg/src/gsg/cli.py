"""Command-line entry point: ``gsg <command> ...``.

Exit codes: 0 success, 1 internal failure, 2 usage error or unknown
command, 3 unreadable or malformed input file, 4 value out of range
(including a Fock truncation tail above tolerance), 5 infeasible request.
Failures print one JSON object to stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .fock import TruncationError
from .analysis import (
    DEFAULT_FIT_GRID,
    displacement_fidelity_curve,
    fit_bound_constants,
    loss_fidelity_sweep,
    reference_frame,
)
from .circuit import CircuitProgram, LossModel, VoltageFrame, build_two_mode_chip, simulate
from .compiler import GaussianTarget, InfeasibleError, compensate_displacement_for_loss, compile_target
from .gaussian import GaussianState, axis_index, axis_name, fidelity, wigner_slice
from .io import csv_text, dumps, fmt_float, read_json, write_json

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_PARSE, EXIT_RANGE, EXIT_INFEASIBLE = 0, 1, 2, 3, 4, 5

GRID_HELP = 'grid "lo:hi:N" (linear) or "lo:hi:Nlog" (logarithmic, lo > 0)'


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_grid(text: str) -> list[float]:
    try:
        lo, hi, count = text.split(":")
        log = count.endswith("log")
        n = int(count[:-3] if log else count)
        lo, hi = float(lo), float(hi)
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected {GRID_HELP}") from None
    if n < 1:
        raise ValueError(f"grid {text!r} needs at least one point")
    if log:
        if lo <= 0 or hi <= 0:
            raise ValueError(f"log grid {text!r} needs positive bounds")
        return list(np.logspace(math.log10(lo), math.log10(hi), n))
    return list(np.linspace(lo, hi, n))


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"bad complex number {text!r}") from None


def _load(path: str, loader):
    try:
        data = read_json(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    try:
        return loader(data)
    except (KeyError, TypeError, IndexError, AttributeError) as exc:
        raise InputError(f"{path}: malformed content ({type(exc).__name__}: {exc})") from None


def _load_loss(path: str | None) -> LossModel | None:
    return None if path is None else _load(path, LossModel.from_dict)


def _state_from_json(data: dict) -> GaussianState:
    return GaussianState.from_dict(data)


def _emit(args, payload: dict):
    if args.out:
        write_json(args.out, payload)
    else:
        sys.stdout.write(dumps(payload) + "\n")


def _emit_csv(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def run_config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["version"] = __version__
    return cfg


def _state_payload(result, cfg: dict) -> dict:
    out = {"run_config": cfg, **result.output.to_dict()}
    out["purity"] = result.output.purity
    out["full_state"] = result.full.to_dict()
    return out


# --- commands --------------------------------------------------------------------

def cmd_simulate(args) -> int:
    program = _load(args.circuit, CircuitProgram.from_dict)
    loss = _load_loss(args.loss)
    result = simulate(program, loss, oracle=args.oracle, cutoff=args.cutoff)
    payload = _state_payload(result, run_config(args))
    if args.oracle:
        payload["oracle"] = {
            "cutoff": result.cutoff,
            "mean": result.oracle_mean,
            "cov": result.oracle_cov,
            "lost_probability": result.fock_state.lost,
            "max_mean_diff": float(np.abs(result.oracle_mean - result.full.mean).max()),
            "max_cov_diff": float(np.abs(result.oracle_cov - result.full.cov).max()),
        }
    if args.target:
        target = _load(args.target, GaussianTarget.from_dict)
        payload["fidelity"] = fidelity(target.state(), result.output)
    _emit(args, payload)
    return EXIT_OK


def cmd_compile(args) -> int:
    target = _load(args.target, GaussianTarget.from_dict)
    loss = _load_loss(args.loss)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        compiled = compile_target(target, args.alpha0, loss, args.fidelity, args.scheme)
    payload = {"run_config": run_config(args), **compiled.to_dict()}
    payload["fidelity"] = compiled.fidelity()
    payload["warnings"] = compiled.warnings
    _emit(args, payload)
    return EXIT_OK


def cmd_chip(args) -> int:
    frame = _load(args.voltages, VoltageFrame.from_dict)
    loss = _load_loss(args.loss)
    program = build_two_mode_chip(frame)
    if args.mitigate:
        program = compensate_displacement_for_loss(program, loss)
    result = simulate(program, loss)
    payload = _state_payload(result, run_config(args))
    payload["voltages"] = frame.to_dict()
    _emit(args, payload)
    return EXIT_OK


def cmd_wigner(args) -> int:
    state = _load(args.state, _state_from_json)
    try:
        names = [s.strip() for s in args.axes.split(",")]
        if len(names) != 2:
            raise ValueError
        axes = (axis_index(names[0]), axis_index(names[1]))
        fixed = {}
        if args.fixed:
            for item in args.fixed.split(","):
                key, val = item.split("=")
                fixed[axis_index(key)] = float(val)
        lo, hi = (float(x) for x in args.range.split(":"))
    except ValueError:
        raise UsageError("bad --axes/--fixed/--range; e.g. --axes x2,p2 --fixed x1=0 --range -6:6") from None
    sl = wigner_slice(state, axes, fixed, lo, hi, args.n)
    u_name, v_name = sl.axis_names
    fixed_names = {axis_name(k): v for k, v in fixed.items()}
    lines = [
        "# run_config: " + dumps(run_config(args), indent=None),
        "# fixed: " + dumps(fixed_names, indent=None),
        f"axes,{u_name},{v_name}",
        f"grid,{fmt_float(lo)},{fmt_float(hi)},{args.n}",
    ]
    # row i holds W(u_i, v_j) for every j
    lines.extend(",".join(fmt_float(w) for w in row) for row in sl.values)
    _emit_csv(args, "\n".join(lines) + "\n")
    return EXIT_OK


def _sweep_csv(args, sweep) -> str:
    comments = [
        "run_config: " + dumps(run_config(args), indent=None),
        "metadata: " + dumps(sweep.metadata, indent=None),
        "units: " + dumps(sweep.units, indent=None),
    ]
    return csv_text(list(sweep.columns), sweep.rows(), comments)


def cmd_sweep_eta(args) -> int:
    grid = parse_grid(args.grid)
    checks = [int(i) for i in parse_floats(args.fock_checks)] if args.fock_checks else []
    sweep = displacement_fidelity_curve(args.r, parse_complex(args.alpha), grid,
                                        fock_checks=checks, cutoff=args.cutoff, joint=not args.reduced)
    _emit_csv(args, _sweep_csv(args, sweep))
    return EXIT_OK


def cmd_fit_bound(args) -> int:
    r_grid = parse_grid(args.r_grid) if args.r_grid else list(DEFAULT_FIT_GRID)
    fit = fit_bound_constants(args.fidelity, r_grid, parse_complex(args.alpha))
    payload = {"run_config": run_config(args), **fit.to_dict()}
    _emit(args, payload)
    return EXIT_OK


def cmd_sweep_loss(args) -> int:
    levels = parse_floats(args.levels)
    r_grid = parse_grid(args.r_grid)
    template = _load(args.template, VoltageFrame.from_dict) if args.template else reference_frame()
    sweep = loss_fidelity_sweep(r_grid, levels, template, args.mitigate, args.fraction, args.reference)
    _emit_csv(args, _sweep_csv(args, sweep))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gsg", description="Gaussian state generation circuits: simulate, compile, analyse.",
                epilog=f"Grids are given as {GRID_HELP}.  GSG_THREADS caps sweep threads.")
    p.add_argument("--version", action="version", version=f"gsg {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="simulate a circuit program file")
    s.add_argument("circuit")
    s.add_argument("--loss", help="loss model JSON")
    s.add_argument("--oracle", action="store_true", help="also run the truncated Fock oracle (lossless, N <= 4)")
    s.add_argument("--cutoff", type=int, help="Fock cutoff (default: estimated)")
    s.add_argument("--target", help="GaussianTarget JSON to report fidelity against")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compile", help="compile a target state into a circuit program")
    s.add_argument("target")
    s.add_argument("--alpha0", type=float, default=40.0)
    s.add_argument("--loss", help="loss model JSON (enables displacement compensation)")
    s.add_argument("--fidelity", type=float, default=0.95, help="eta budget level (0.95 or 0.98)")
    s.add_argument("--scheme", choices=("clements", "reck"), default="clements")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("chip", help="build and simulate the two-mode chip from voltages")
    s.add_argument("voltages")
    s.add_argument("--loss")
    s.add_argument("--mitigate", action="store_true", help="compensate displacement for loss")
    s.add_argument("--out")
    s.set_defaults(func=cmd_chip)

    s = sub.add_parser("wigner", help="Wigner slice of a state file as CSV")
    s.add_argument("state")
    s.add_argument("--axes", required=True, help="two quadratures, e.g. x2,p2")
    s.add_argument("--fixed", help="values of other quadratures, e.g. x1=0,p1=0.5")
    s.add_argument("--range", default="-6:6", help="lo:hi for both axes")
    s.add_argument("--n", type=int, default=201)
    s.add_argument("--out")
    s.set_defaults(func=cmd_wigner)

    s = sub.add_parser("sweep-eta", help="approximate-displacement fidelity versus eta")
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--alpha", default="0.5")
    s.add_argument("--grid", default="1e-4:1e-1:60log", help=GRID_HELP)
    s.add_argument("--fock-checks", help="comma-separated grid indices to check with the Fock oracle")
    s.add_argument("--cutoff", type=int, default=40)
    s.add_argument("--reduced", action="store_true", help="compare the signal only (ancilla traced out)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep_eta)

    s = sub.add_parser("fit-bound", help="fit eta_dB = a r^b + c to bisected thresholds")
    s.add_argument("--fidelity", type=float, required=True)
    s.add_argument("--r-grid", help=GRID_HELP + " (default 0.3..1.8 step 0.1)")
    s.add_argument("--alpha", default="0.5")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit_bound)

    s = sub.add_parser("sweep-loss", help="chip fidelity versus squeezing and MZI loss")
    s.add_argument("--levels", required=True, help="comma-separated MZI losses in dB")
    s.add_argument("--r-grid", default="0:1:11", help=GRID_HELP)
    s.add_argument("--template", help="VoltageFrame JSON (v1, v3 are overwritten by r)")
    s.add_argument("--fraction", type=float, default=1.0 / 3.0,
                   help="coupler and phase-shifter loss as a fraction of MZI loss")
    s.add_argument("--mitigate", action="store_true")
    s.add_argument("--reference", choices=("lossless", "ideal"), default="lossless",
                   help="compare with the lossless chip output or the ideal displaced target")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep_loss)
    return p


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def _join_negative_values(argv: list[str]) -> list[str]:
    """Let "--range -6:6" through; argparse would read -6:6 as an option."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--range" and i + 1 < len(argv):
            out.append(f"--range={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except InputError as exc:
        return _fail(EXIT_PARSE, exc)
    except InfeasibleError as exc:
        return _fail(EXIT_INFEASIBLE, exc)
    except (ValueError, TruncationError) as exc:
        return _fail(EXIT_RANGE, exc)
    except Exception as exc:  # noqa: BLE001 - report anything else as a structured failure
        return _fail(EXIT_FAILURE, exc)


def main():
    sys.exit(run())
