"""
main.py — Dependency Wiring (Composition Root)
------------------------------------------------
Parses the command line, wires the pieces together and runs one use case.

This is the single place where concrete classes are chosen. Every other
class receives its collaborators via constructor injection, which keeps
each of them testable on its own.

Dependency graph (what depends on what):
                         main.py  (wires everything)
                            │
              ┌─────────────┼──────────────────┐
              ▼             ▼                  ▼
      ExperimentService  FileRunStorage  GnuplotScriptRenderer
              │
              ▼
      EnsembleOrchestrator ── integrate / diagnostics
              │
              ▼
      ModelSpec registry ── models, discrete Lagrangians, schemes

Usage:
    python main.py simulate --model damped-oscillator-additive --scheme both --seed 7 --out runs/ex1
    python main.py diagnose --model kepler-drag --q0 5 --p0 4 --steps 2000
    python main.py converge --levels 4 --paths 50 --deterministic
    python main.py criticality --steps 20 --scheme em
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from pathlib import Path

from src.application.config import SCHEMES, load_config
from src.application.experiment_service import EXIT_CONFIG, ExperimentService
from src.application.registry import model_names
from src.domain.errors import ConfigError
from src.infrastructure.file_storage import FileRunStorage
from src.infrastructure.gnuplot_scripts import GnuplotScriptRenderer

log = logging.getLogger(__name__)

COMMANDS = ("simulate", "diagnose", "converge", "criticality")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Stochastic contact variational integrators: simulations and structural diagnostics"
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat JSON config file; flags override its values")
    parser.add_argument("--model", help=f"one of: {', '.join(model_names())}")
    parser.add_argument("--scheme", choices=SCHEMES)
    parser.add_argument("--seed", type=int, help="unsigned 64-bit noise seed")
    parser.add_argument("--h", type=float, help="step size")
    parser.add_argument("--steps", type=int, dest="N", help="number of steps N")
    parser.add_argument("--T", type=float, help="final time; must equal N*h when both are given")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--ensemble", type=int, help="number of seeds to simulate (seed, seed+1, ...)")
    parser.add_argument("--tol", type=float, help="pass/fail tolerance for the contact check")
    parser.add_argument("--fd-step", type=float, dest="fd_step", help="finite-difference step for diagnostics")
    parser.add_argument("--levels", type=int, help="dyadic levels for converge")
    parser.add_argument("--paths", type=int, help="number of seeds for converge")
    parser.add_argument("--index", type=int, help="single interior index for criticality")
    parser.add_argument("--deterministic", action="store_const", const=True, help="integrate with all increments zero")
    parser.add_argument("--workers", type=int, help="concurrent ensemble members")
    for name in ("alpha", "epsilon", "beta", "gamma", "q0", "p0", "s0"):
        parser.add_argument(f"--{name}", type=float)
    parser.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s [%(levelname)s] %(name)s - %(message)s",
        datefmt="%H:%M:%S",
    )

    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "log_level")}
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        log.error("Configuration error: %s", exc)
        return EXIT_CONFIG

    service = ExperimentService(
        storage_factory=lambda out: FileRunStorage(Path(out)),
        renderer=GnuplotScriptRenderer(),
    )
    result = asyncio.run(service.execute(args.command, config))

    if result.status == "success":
        log.info("Success | %s | %d files | %.2fs | out=%s", result.command, len(result.files), result.elapsed_secs, config.out)
    else:
        log.error("Failed | %s | exit=%d | error: %s", result.command, result.exit_code, result.error_message)
    return result.exit_code


# Entry point
if __name__ == "__main__":
    sys.exit(main())
