from __future__ import annotations

import logging
import platform
from collections.abc import Callable
from datetime import datetime, timezone
from typing import Any

import numpy as np
import scipy

from src.domain.entities import ContactState, RunManifest, RunResult, Trajectory, WienerPath
from src.domain.errors import ConfigError, ContactError
from src.domain.interfaces import ContactModel, IRunStorage, IScriptRenderer, IStepper

from .config import ExperimentConfig
from .diagnostics import (
    conformal_compare,
    contact_residuals,
    convergence_sample,
    criticality_profile,
    criticality_residual,
    discrete_reference,
    ensemble_norm_series,
    recomputed_conformal_factors,
    summarize_convergence,
)
from .integrator import integrate
from .noise import deterministic_path, generate_path
from .orchestrator import EnsembleOrchestrator
from .registry import ModelSpec, get_model_spec

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

CRITICALITY_TOLERANCE = 1e-5

StorageFactory = Callable[[str], IRunStorage]


def trajectory_table(trajectory: Trajectory, m: int) -> tuple[list[str], list[list[Any]]]:
    """
    Header t,q1..qn,p1..pn,s,lambda,dW1..dWm. Row j carries lambda_j and dW_j
    of the step leaving x_j; the last row leaves them empty.
    """
    n = trajectory.states[0].n
    header = (
        ["t"] + [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
        + ["s", "lambda"] + [f"dW{k + 1}" for k in range(m)]
    )
    rows = []
    for j, x in enumerate(trajectory.states):
        if j < trajectory.steps:
            tail = [trajectory.conformal_factors[j], *trajectory.increments[j].tolist()]
        else:
            tail = [None] * (m + 1)
        rows.append([x.t, *x.q.tolist(), *x.p.tolist(), x.s, *tail])
    return header, rows


class _Run:
    """Per-invocation state: the model, its wiring and the files written so far."""

    def __init__(self, config: ExperimentConfig, storage: IRunStorage) -> None:
        self.config = config
        self.storage = storage
        self.spec: ModelSpec = get_model_spec(config.model)
        self.model: ContactModel = self.spec.model(config.params)
        self.initial = ContactState(q=config.q0, p=config.p0, s=config.s0)
        self.newton_iters = 0
        self.max_residual = 0.0
        self.partial = False

    def path(self, seed: int) -> WienerPath:
        if self.config.deterministic:
            return deterministic_path(self.config.N, self.config.h)
        return generate_path(seed, self.model.m, self.config.N, self.config.h)

    def stepper(self, scheme: str) -> IStepper:
        return self.spec.stepper(self.model, scheme, self.config.solver)

    def record(self, trajectory: Trajectory) -> None:
        self.newton_iters += trajectory.newton_iters
        self.max_residual = max(self.max_residual, trajectory.max_residual)
        if not trajectory.is_complete:
            self.partial = True

    def write_trajectory(self, name: str, trajectory: Trajectory, m: int) -> str:
        header, rows = trajectory_table(trajectory, m)
        return self.storage.write_csv(name, header, rows)


class ExperimentService:
    """
    The CLI use cases: simulate, diagnose, converge, criticality.

    Receives its collaborators via constructor injection: a factory for the
    per-run storage, the plot-script renderer and a factory for the ensemble
    orchestrator. Every use case returns a RunResult; failures become a
    failed result with the exit code of the contract (2 config, 3 runtime).
    """

    def __init__(
        self,
        storage_factory: StorageFactory,
        renderer: IScriptRenderer,
        orchestrator_factory: Callable[..., EnsembleOrchestrator] = EnsembleOrchestrator,
    ) -> None:
        self._storage_factory = storage_factory
        self._renderer = renderer
        self._orchestrator_factory = orchestrator_factory

    async def execute(self, command: str, config: ExperimentConfig) -> RunResult:
        handlers = {
            "simulate": self._simulate,
            "diagnose": self._diagnose,
            "converge": self._converge,
            "criticality": self._criticality,
        }
        if command not in handlers:
            raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(handlers)}")

        started_at = datetime.now(tz=timezone.utc)
        log.info("ExperimentService | %s | model=%s | scheme=%s | out=%s", command, config.model, config.scheme, config.out)

        storage: IRunStorage | None = None
        run: _Run | None = None
        summary: dict[str, Any] = {}
        status, exit_code, message = "success", EXIT_OK, None
        try:
            storage = self._storage_factory(config.out)
            run = _Run(config, storage)
            summary = await handlers[command](run)
            if run.partial:
                status, exit_code, message = "failed", EXIT_RUNTIME, summary.get("error")
        except ConfigError as exc:
            log.error("Configuration error: %s", exc)
            status, exit_code, message = "failed", EXIT_CONFIG, str(exc)
        except ContactError as exc:
            log.error("%s failed: %s", command, exc, exc_info=True)
            status, exit_code, message = "failed", EXIT_RUNTIME, str(exc)
        except OSError as exc:
            log.error("Output directory %s is not writable: %s", config.out, exc)
            status, exit_code, message = "failed", EXIT_CONFIG, str(exc)

        elapsed = (datetime.now(tz=timezone.utc) - started_at).total_seconds()
        if storage is None:
            # nowhere to put a manifest
            log.info("%s finished | status=%s | exit=%d | %.2fs", command, status, exit_code, elapsed)
            return RunResult(
                command=command, status=status, exit_code=exit_code, elapsed_secs=elapsed,
                files=(), summary=summary, error_message=message,
            )

        manifest = RunManifest(
            command=command,
            config=config.as_dict(),
            versions={"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
            files=dict(storage.written()),
            elapsed_secs=elapsed,
            solver={
                "newton_iters": run.newton_iters if run else 0,
                "max_residual": run.max_residual if run else 0.0,
            },
            partial=exit_code == EXIT_RUNTIME,
        )
        manifest_name = storage.write_manifest(manifest)
        log.info("%s finished | status=%s | exit=%d | %.2fs", command, status, exit_code, elapsed)
        return RunResult(
            command=command,
            status=status,
            exit_code=exit_code,
            elapsed_secs=elapsed,
            files=(*manifest.files, manifest_name),
            summary=summary,
            error_message=message,
        )

    async def _integrate_all(self, run: _Run, stepper: IStepper, seeds: list[int]) -> dict[int, Trajectory]:
        orchestrator = self._orchestrator_factory(
            lambda seed: integrate(stepper, run.initial, run.path(seed)),
            max_concurrent=run.config.workers,
        )
        results = await orchestrator.collect(seeds)
        for trajectory in results.values():
            run.record(trajectory)
        return results

    # -----------------------------------------------------------------------
    # simulate
    # -----------------------------------------------------------------------

    async def _simulate(self, run: _Run) -> dict[str, Any]:
        config = run.config
        seeds = [config.seed + i for i in range(config.ensemble)]
        summary: dict[str, Any] = {"schemes": {}}
        plotted: dict[str, str] = {}

        for scheme in config.schemes:
            stepper = run.stepper(scheme)
            trajectories = await self._integrate_all(run, stepper, seeds)
            entry: dict[str, Any] = {"seeds": len(seeds), "failed_seeds": []}

            for seed, trajectory in trajectories.items():
                name = f"trajectory_{scheme}.csv" if len(seeds) == 1 else f"trajectory_{scheme}_seed{seed}.csv"
                run.write_trajectory(name, trajectory, stepper.m)
                plotted.setdefault(scheme, name)
                if not trajectory.is_complete:
                    entry["failed_seeds"].append({"seed": seed, "error": str(trajectory.error)})
                    summary["error"] = str(trajectory.error)

            if len(seeds) > 1:
                series = ensemble_norm_series([t for t in trajectories.values() if t.is_complete] or list(trajectories.values()))
                run.storage.write_csv(
                    f"ensemble_{scheme}.csv",
                    ["t", "norm", "q_norm", "p_norm", "s_norm", "samples"],
                    [[j * config.h, s.norm, s.q_norm, s.p_norm, s.s_norm, s.sample_count] for j, s in enumerate(series)],
                )
            first = trajectories[seeds[0]]
            entry.update(steps=first.steps, complete=first.is_complete, terminal=first.states[-1].as_vector().tolist())
            summary["schemes"][scheme] = entry

        run.storage.write_text("trajectories.gp", self._renderer.trajectories(plotted, n=run.initial.n))
        return summary

    # -----------------------------------------------------------------------
    # diagnose
    # -----------------------------------------------------------------------

    async def _diagnose(self, run: _Run) -> dict[str, Any]:
        config = run.config
        discretization = run.spec.discretize(run.model)
        summary: dict[str, Any] = {"schemes": {}, "tolerance": config.tol}
        residual_files: dict[str, str] = {}
        lambda_files: dict[str, str] = {}

        for scheme in config.schemes:
            stepper = run.stepper(scheme)
            trajectory = (await self._integrate_all(run, stepper, [config.seed]))[config.seed]
            run.write_trajectory(f"trajectory_{scheme}.csv", trajectory, stepper.m)
            if not trajectory.is_complete:
                summary["error"] = str(trajectory.error)

            report = contact_residuals(stepper, trajectory, config.h, fd_step=config.fd_step, model=run.model)
            comparison = conformal_compare(trajectory, run.model, config.h, mode="continuous")
            discrete = discrete_reference(discretization, trajectory, config.h)
            times = trajectory.times[:-1]

            residual_files[scheme] = run.storage.write_csv(
                f"residuals_{scheme}.csv",
                ["j", "t", "residual", "lambda", "lambda_ref"],
                [[j, times[j], report.residuals[j], report.lambdas[j], report.lambda_ref[j]] for j in range(trajectory.steps)],
            )
            lambda_files[scheme] = run.storage.write_csv(
                f"lambda_{scheme}.csv",
                ["j", "t", "lambda", "reference", "discrete_reference", "nominal", "abs_diff"],
                [
                    [j, times[j], comparison.lambdas[j], comparison.reference[j], discrete[j], comparison.nominal[j], comparison.abs_diff[j]]
                    for j in range(trajectory.steps)
                ],
            )

            entry: dict[str, Any] = {
                "steps": trajectory.steps,
                "label": report.label,
                "max_residual": report.max_residual,
                "mean_residual": report.mean_residual,
                "contact_check": "pass" if report.max_residual <= config.tol else "fail",
            }
            if trajectory.steps and stepper.scheme != "em":
                lambdas = trajectory.lambdas
                recorded = np.max(np.abs(lambdas - recomputed_conformal_factors(discretization, trajectory, config.h)))
                entry.update(
                    lambda_min=float(np.min(lambdas)),
                    lambda_max=float(np.max(lambdas)),
                    lambda_record_deviation=float(recorded),
                    max_abs_diff_continuous=float(np.max(comparison.abs_diff)),
                    max_abs_diff_nominal=float(np.max(np.abs(lambdas - comparison.nominal))),
                )
            if getattr(stepper, "has_analytic_jacobian", False):
                analytic = contact_residuals(stepper, trajectory, config.h, method="analytic")
                entry["analytic_max_residual"] = analytic.max_residual
            summary["schemes"][scheme] = entry

        run.storage.write_json("summary.json", summary)
        run.storage.write_text("diagnostics.gp", self._renderer.diagnostics(residual_files, lambda_files))
        return summary

    # -----------------------------------------------------------------------
    # converge
    # -----------------------------------------------------------------------

    async def _converge(self, run: _Run) -> dict[str, Any]:
        config = run.config
        seeds = [config.seed + i for i in range(config.paths)]
        m = 0 if config.deterministic else run.model.m
        summary: dict[str, Any] = {"schemes": {}, "levels": config.levels, "paths": config.paths}
        first_csv = None

        for scheme in config.schemes:
            stepper = run.stepper(scheme)
            orchestrator = self._orchestrator_factory(
                lambda seed: convergence_sample(stepper, run.initial, seed, config.h, config.N, config.levels, m),
                max_concurrent=config.workers,
            )
            samples = await orchestrator.collect(seeds)
            table = summarize_convergence([samples[s] for s in seeds], config.h, config.levels)
            if table.failures:
                log.warning("Convergence | scheme=%s | %d of %d seeds excluded", scheme, table.failures, len(seeds))
            if table.samples == 0:
                run.partial = True
                summary["error"] = f"every seed failed for the {scheme} scheme"

            name = run.storage.write_csv(
                f"convergence_{scheme}.csv",
                ["h", "strong_error"],
                [[h, e] for h, e in zip(table.h.tolist(), table.strong_error.tolist())],
            )
            first_csv = first_csv or name
            summary["schemes"][scheme] = {
                "h": table.h.tolist(),
                "strong_error": table.strong_error.tolist(),
                "samples": table.samples,
                "failures": table.failures,
                "slope": table.slope,
            }

        run.storage.write_json("summary.json", summary)
        run.storage.write_text("convergence.gp", self._renderer.convergence(first_csv))
        return summary

    # -----------------------------------------------------------------------
    # criticality
    # -----------------------------------------------------------------------

    async def _criticality(self, run: _Run) -> dict[str, Any]:
        config = run.config
        discretization = run.spec.discretize(run.model)
        if not discretization.momentum_independent:
            raise ConfigError(f"{config.model}: criticality needs a discrete Lagrangian without momentum dependence")
        if config.N < 2:
            raise ConfigError("criticality needs N >= 2 so that an interior index exists")
        if config.index is not None and not 1 <= config.index <= config.N - 1:
            raise ConfigError(f"index must lie in 1..{config.N - 1}, got {config.index}")
        fd_step = config.fd_step or 1e-6
        summary: dict[str, Any] = {"schemes": {}, "fd_step": fd_step, "tolerance": CRITICALITY_TOLERANCE}

        for scheme in config.schemes:
            stepper = run.stepper(scheme)
            trajectory = (await self._integrate_all(run, stepper, [config.seed]))[config.seed]
            if not trajectory.is_complete:
                run.write_trajectory(f"trajectory_{scheme}.csv", trajectory, stepper.m)
                summary["error"] = str(trajectory.error)
                continue

            if config.index is not None:
                indices = [config.index]
                residuals = np.array([criticality_residual(discretization, trajectory, config.h, config.index, fd_step)])
            else:
                indices = list(range(1, trajectory.steps))
                residuals = criticality_profile(discretization, trajectory, config.h, fd_step)

            run.storage.write_csv(
                f"criticality_{scheme}.csv",
                ["j", "t", "residual"],
                [[j, trajectory.states[j].t, r] for j, r in zip(indices, residuals.tolist())],
            )
            worst = float(np.max(residuals))
            summary["schemes"][scheme] = {
                "indices": len(indices),
                "max_residual": worst,
                "argmax": indices[int(np.argmax(residuals))],
                "critical": worst <= CRITICALITY_TOLERANCE,
            }

        run.storage.write_json("summary.json", summary)
        return summary
