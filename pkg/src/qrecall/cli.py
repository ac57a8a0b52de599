"""Command-line front end.

Exit codes: 0 on success, 1 when a verdict-bearing command (``check``,
``verify``) reaches a negative verdict, 2 on any input error. Errors are
printed as a single-line JSON record ``{"error": {...}}``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import formats
from .classical import check_classical_implementable, eval_classical, eval_latent
from .constants import VERIFY_TOL
from .constructions import (
    EXAMPLES,
    build_discordant,
    build_latent_diagonal,
    build_universal,
    named_example,
    verify_model,
)
from .errors import QrecallError, UsageError
from .fitting import SearchParams, canonical_metric, fit_local_model
from .quantum import born_joint, commutation_witness, discord_one_sided

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT = 0, 1, 2

EVAL_KINDS = ("classical", "latent", "quantum")
CONSTRUCT_KINDS = ("thm1", "thm2", "diag-universal", "example")
COMMANDS = ("eval", "check", "fit", "construct", "verify", "discord", "witness-cc")


@dataclass
class RunConfig:
    command: str
    kind: Optional[str] = None
    example: Optional[str] = None
    process: Optional[str] = None
    model: Optional[str] = None
    target: Optional[str] = None
    spec: Optional[str] = None
    state: Optional[str] = None
    states: Optional[str] = None
    metric: str = "tv"
    seed: int = 0
    grid: Optional[int] = None
    tol: Optional[float] = None
    restarts: int = 8
    max_iter: int = 200
    side: str = "B"
    dims: Optional[list[int]] = None
    output_format: str = "machine"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _dims(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dims {text!r}; expected e.g. 2,2") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--metric", choices=("tv", "l2", "kl"), default="tv")
    common.add_argument("--grid", type=int, default=None, help="fit: grid points per unit; discord: Bloch grid resolution")
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--restarts", type=int, default=8)
    common.add_argument("--max-iter", type=int, default=200)
    common.add_argument("--format", dest="output_format", choices=("human", "machine"), default="machine")
    common.add_argument("--process")
    common.add_argument("--model")
    common.add_argument("--target")

    p = _Parser(prog="qrecall", description="Classical and quantum implementability under restricted information.")
    sub = p.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", parents=[common], help="joint distribution induced by a model")
    ev.add_argument("kind", choices=EVAL_KINDS)

    sub.add_parser("check", parents=[common], help="decide classical implementability")
    sub.add_parser("fit", parents=[common], help="nearest classical local model")

    con = sub.add_parser("construct", parents=[common], help="build a quantum implementation")
    con.add_argument("kind", choices=CONSTRUCT_KINDS)
    con.add_argument("example", nargs="?")
    con.add_argument("--spec", help="discordant construction data (thm2)")

    sub.add_parser("verify", parents=[common], help="compare a quantum model against a target")

    dis = sub.add_parser("discord", parents=[common], help="one-sided measured discord of a bipartite state")
    dis.add_argument("--state", required=True)
    dis.add_argument("--side", choices=("A", "B"), default="B")
    dis.add_argument("--dims", type=_dims)

    wit = sub.add_parser("witness-cc", parents=[common], help="commutation witness of an ensemble")
    wit.add_argument("--states", required=True)
    return p


def config_from_args(argv: list[str]) -> RunConfig:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(command=ns.command)
    for key in vars(ns):
        if hasattr(cfg, key):
            setattr(cfg, key, getattr(ns, key))
    return cfg


def _read(path: Optional[str], flag: str) -> dict:
    if path is None:
        raise UsageError(f"missing required option {flag}")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {flag} {path!r}: {exc.strerror}") from None
    return formats.loads(text, path)


def _process(cfg):
    return formats.parse_process(formats.section(_read(cfg.process, "--process"), "process"))


def _target(cfg, proc=None):
    dist = formats.parse_distribution(formats.section(_read(cfg.target, "--target"), "target"))
    if proc is not None:
        dist.check_compatible(proc)
    return dist


def _model_doc(cfg):
    return formats.section(_read(cfg.model, "--model"), "model")


def _witness_doc(w):
    return {"k": w.stage, "y": w.label, "h": list(w.prefix), "h2": list(w.other_prefix), "gap": w.discrepancy}


def _run(cfg: RunConfig) -> tuple[int, dict]:
    if cfg.command == "eval":
        proc = _process(cfg)
        doc = _model_doc(cfg)
        if cfg.kind == "classical":
            dist = eval_classical(formats.parse_local_model(doc), proc)
        elif cfg.kind == "latent":
            dist = eval_latent(formats.parse_latent_model(doc, proc), proc)
        else:
            dist = born_joint(formats.parse_quantum_model(doc), proc)
        return EXIT_OK, formats.dump_distribution(dist)

    if cfg.command == "check":
        proc = _process(cfg)
        report = check_classical_implementable(_target(cfg, proc), proc)
        if report.feasible:
            return EXIT_OK, {"feasible": True, "certificate": formats.dump_local_model(report.certificate)}
        return EXIT_NEGATIVE, {"feasible": False, "witness": _witness_doc(report.witness)}

    if cfg.command == "fit":
        proc = _process(cfg)
        grid = cfg.grid if cfg.grid is not None else 100
        if grid < 1:
            raise UsageError("--grid must be >= 1")
        params = SearchParams(seed=cfg.seed, restarts=cfg.restarts, grid_step=1.0 / grid, max_iter=cfg.max_iter)
        rep = fit_local_model(_target(cfg, proc), proc, canonical_metric(cfg.metric), params)
        return EXIT_OK, {
            "metric": rep.metric,
            "distance": rep.distance,
            "restarts_used": rep.restarts_used,
            "iterations": rep.iterations,
            "best_restart": rep.best_restart,
            "model": formats.dump_local_model(rep.best_model),
        }

    if cfg.command == "construct":
        return EXIT_OK, _construct(cfg)

    if cfg.command == "verify":
        proc = _process(cfg)
        q = formats.parse_quantum_model(_model_doc(cfg))
        tol = cfg.tol if cfg.tol is not None else VERIFY_TOL
        rep = verify_model(q, proc, _target(cfg, proc), tol)
        doc = {
            "passed": rep.passed,
            "max_abs_error": rep.max_abs_error,
            "tol": rep.tol,
            "residuals": [formats._num(r) for r in rep.residuals],
        }
        return (EXIT_OK if rep.passed else EXIT_NEGATIVE), doc

    if cfg.command == "discord":
        state, dims = formats.parse_state(formats.section(_read(cfg.state, "--state"), "model"))
        dims = cfg.dims or dims
        grid = cfg.grid if cfg.grid is not None else 512
        value = discord_one_sided(state, dims, cfg.side, grid)
        return EXIT_OK, {"discord": value, "measured_side": cfg.side, "dims": list(dims), "grid": grid}

    if cfg.command == "witness-cc":
        ensemble = formats.parse_ensemble(_read(cfg.states, "--states"))
        value = commutation_witness(ensemble)
        tol = cfg.tol if cfg.tol is not None else 1e-12
        return EXIT_OK, {"witness": value, "commuting": value <= tol}

    raise UsageError(f"unknown command {cfg.command!r}; valid: {', '.join(COMMANDS)}")


def _construct(cfg: RunConfig) -> dict:
    if cfg.kind == "example":
        if cfg.example is None:
            raise UsageError(f"construct example needs a name; valid: {', '.join(EXAMPLES)}")
        q, proc, target = named_example(cfg.example)
        return {
            "process": formats.dump_process(proc),
            "model": formats.dump_quantum_model(q),
            "target": formats.dump_distribution(target),
        }
    if cfg.kind == "thm2":
        build = build_discordant(formats.parse_discordant_spec(_read(cfg.spec, "--spec")))
        return {
            "process": formats.dump_process(build.process),
            "model": formats.dump_quantum_model(build.model),
            "target": formats.dump_distribution(build.target),
            "diagnostics": {"commutation_witness": build.commutation, "declared_basis_off_diagonal": build.off_diagonal},
        }
    proc = _process(cfg)
    if cfg.kind == "thm1":
        latent = formats.parse_latent_model(_model_doc(cfg), proc)
        q = build_latent_diagonal(latent, proc)
        target = eval_latent(latent, proc)
    else:
        target = _target(cfg, proc)
        q = build_universal(target, proc)
    return {
        "process": formats.dump_process(proc),
        "model": formats.dump_quantum_model(q),
        "target": formats.dump_distribution(target),
    }


def _error_record(exc: Exception) -> dict:
    rec = {"type": type(exc).__name__, "message": str(exc)}
    if hasattr(exc, "check"):
        rec["check"] = exc.check
    if hasattr(exc, "magnitude"):
        rec["magnitude"] = exc.magnitude
    return {"error": rec}


def run_command(cfg: RunConfig) -> tuple[int, str]:
    """Execute ``cfg`` and return ``(exit code, report text)``."""
    machine = cfg.output_format == "machine"
    try:
        code, doc = _run(cfg)
    except (QrecallError, ValueError) as exc:
        return EXIT_INPUT, formats.dumps(_error_record(exc), machine=True)
    return code, formats.dumps(doc, machine=machine)


def main(argv: Optional[list[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = config_from_args(argv)
    except (QrecallError, argparse.ArgumentTypeError) as exc:
        print(formats.dumps(_error_record(exc)))
        return EXIT_INPUT
    code, text = run_command(cfg)
    print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
