"""
Batch driver: subcommands, output files and exit codes

    ode-run        step ODE from the sampled test profile
    pde-run        continuum PDE in the h or phi formulation
    consistency    consistency residuals and their orders
    convergence    ODE vs PDE error sweep and fitted slope
    energy-report  energies of the initial profile in every formulation
    selftest       invariant suites

Outputs go to {output.directory}/{output.prefix}-{command}/ and a one-line
JSON summary is printed to stdout.
"""
import argparse
import logging
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from cli.config import RunConfig, build_config, load_config_file
from core import __version__
from core.acceptance import SuiteSettings, require_all, run_suites
from core.analysis import consistency_report, convergence_study, height_profile_error
from core.continuum import energy_bundle, integrate_pde
from core.errors import ConfigError, StepFlowError
from core.geometry import build_height_field, height_to_phi, sample_step_train
from core.integrators import Trajectory
from core.mesoscopic import integrate_ode
from utils.console_utils import ConsoleUtils
from utils.file_utils import FileUtils

LOGGER = logging.getLogger(__name__)

COMMANDS = ("ode-run", "pde-run", "consistency", "convergence", "energy-report", "selftest")

TRAJECTORY_HEADER = ("t", "index", "value")
ENERGY_HEADER = ("t", "E", "dissipation", "identity_residual")
CONVERGENCE_HEADER = ("N", "a", "error")
CONSISTENCY_HEADER = ("family", "N", "a", "residual")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stepflow-lab",
        description="Step-flow model of vicinal surfaces: discrete ODE, continuum PDE and "
                    "their consistency and convergence",
        epilog="Any configuration key can be overridden with --section.key=value, "
               "e.g. --profile.A=0.3 --ode.N=64")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="FILE", help="flat 'section.key = value' file")
    parser.add_argument("--variant", help="potential variant (overrides ode.variant)")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent sub-runs")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    return parser


def parse_overrides(extra: Sequence[str]) -> Dict[str, str]:
    """Collect --section.key=value flags; anything else is an error"""
    overrides = {}
    for argument in extra:
        if not argument.startswith("--") or "=" not in argument:
            raise ConfigError(f"invalid config: unrecognised argument '{argument}'",
                              key=argument.lstrip("-").split("=", 1)[0])
        key, value = argument[2:].split("=", 1)
        overrides[key] = value
    return overrides


def _trajectory_rows(trajectory: Trajectory, stride: int, values: Callable[[Any], np.ndarray],
                     first_index: int):
    count = len(trajectory.states)
    for position, (t, state) in enumerate(zip(trajectory.times, trajectory.states)):
        if position % stride and position != count - 1:
            continue
        for index, value in enumerate(values(state), start=first_index):
            yield (t, index, value)


def _energy_rows(trajectory: Trajectory):
    for record in trajectory.energy_series:
        yield (record.t, record.energy, record.dissipation, record.identity_residual)


def _write_trajectory(directory: Path, trajectory: Optional[Trajectory], stride: int,
                      values: Callable[[Any], np.ndarray], first_index: int):
    if trajectory is None or not trajectory.states:
        return
    FileUtils.write_csv(directory / "trajectory.csv", TRAJECTORY_HEADER,
                        _trajectory_rows(trajectory, stride, values, first_index))
    FileUtils.write_csv(directory / "energy.csv", ENERGY_HEADER, _energy_rows(trajectory))


class Driver:
    """Runs one subcommand against a resolved configuration"""

    def __init__(self, config: RunConfig, command: str, jobs: int = 1):
        self.config = config
        self.command = command
        self.jobs = max(1, jobs)
        self.progress = ConsoleUtils.progress_logger("stepflow.progress")
        self.suites: Dict[str, bool] = {}
        self.directory = FileUtils.run_directory(config.output.directory, config.output.prefix,
                                                 command)

    def write_meta(self):
        FileUtils.write_json(self.directory / "meta.json", {
            "command": self.command,
            "config": self.config.as_dict(),
            "jobs": self.jobs,
            "version": __version__,
        })

    def initial_height(self, M: Optional[int] = None):
        return build_height_field(self.config.profile, self.config.domain.L,
                                  M or self.config.domain.M)

    def ode_run(self) -> Dict[str, Any]:
        config = self.config
        phi = height_to_phi(self.initial_height(), config.domain.K)
        train = sample_step_train(phi, config.ode.N)
        trajectory = None
        try:
            trajectory = integrate_ode(train, config.ode.T, config.ode_options(), config.variant,
                                       self.progress)
        except StepFlowError as exc:
            trajectory = getattr(exc, "trajectory", None)
            raise
        finally:
            _write_trajectory(self.directory, trajectory, config.output.snapshot_stride,
                              lambda state: state.x, 1)
        return {}

    def pde_run(self) -> Dict[str, Any]:
        config = self.config
        h = self.initial_height()
        if config.pde.formulation == "phi":
            state = height_to_phi(h, config.domain.K)
        else:
            state = h
        trajectory = None
        try:
            trajectory = integrate_pde(state, config.pde.T, config.pde_options(), self.progress)
        except StepFlowError as exc:
            trajectory = getattr(exc, "trajectory", None)
            raise
        finally:
            _write_trajectory(self.directory, trajectory, config.output.snapshot_stride,
                              lambda field_: field_.values, 0)
        return {}

    def consistency(self) -> Dict[str, Any]:
        config = self.config
        report = consistency_report(config.profile, config.consistency.N_sweep, config.domain.L,
                                    config.consistency.M, self.jobs, self.progress)
        FileUtils.write_csv(self.directory / "consistency.csv", CONSISTENCY_HEADER,
                            ((r.family, r.N, r.a, r.residual) for r in report.records))
        staircase = height_profile_error(config.profile, config.consistency.N_sweep,
                                         config.domain.L)
        FileUtils.write_csv(self.directory / "height_profile.csv", CONVERGENCE_HEADER,
                            ((row.N, row.a, row.error) for row in staircase.rows))
        orders = {family: {"order": estimate.order, "status": estimate.status}
                  for family, estimate in report.orders.items()}
        orders["height_profile"] = {"order": staircase.slope,
                                    "status": "skipped" if staircase.slope is None else "fitted"}
        FileUtils.write_json(self.directory / "orders.json", orders)
        if not report.passed:
            LOGGER.warning("Consistency orders below threshold: %s", ", ".join(report.failures()))
        return {}

    def convergence(self) -> Dict[str, Any]:
        config = self.config
        table = convergence_study(config.profile, config.ode.N_sweep, config.ode.T,
                                  config.variant, config.ode_options(), config.domain.L,
                                  config.domain.K, self.jobs, self.progress)
        FileUtils.write_csv(self.directory / "convergence.csv", CONVERGENCE_HEADER,
                            ((row.N, row.a, row.error) for row in table.rows))
        if not table.monotone:
            LOGGER.warning("Convergence errors are not monotone in N")
        return {"slope": table.slope}

    def energy_report(self) -> Dict[str, Any]:
        bundle = energy_bundle(self.initial_height(), self.config.domain.K)
        FileUtils.write_json(self.directory / "energies.json", {
            "E_h": bundle.E_h, "E_h_bar": bundle.E_h_bar, "W": bundle.W,
            "E_rho": bundle.E_rho, "E_u": bundle.E_u, "E_phi": bundle.E_phi,
            "cross_residuals": bundle.cross_residuals,
        })
        return {}

    def selftest(self) -> Dict[str, Any]:
        settings = SuiteSettings(self.config.profile, self.config.domain.L)
        results = run_suites(settings, progress_callback=self.progress)
        FileUtils.write_json(self.directory / "selftest.json", {
            result.name: {"passed": result.passed, "detail": result.detail}
            for result in results
        })
        self.suites = {result.name: result.passed for result in results}
        require_all(results)
        return {"suites": self.suites}

    def execute(self) -> Dict[str, Any]:
        self.write_meta()
        handler = getattr(self, self.command.replace("-", "_"))
        try:
            return handler()
        finally:
            LOGGER.info("Outputs in %s: %s", self.directory,
                        ", ".join(FileUtils.list_outputs(self.directory)))


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and print the JSON summary

    Returns:
        Process exit code (0 success, 2 config, 3 collision, 4 monotonicity,
        5 integrator, 6 acceptance, 1 unexpected)
    """
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    ConsoleUtils.configure_logging(args.verbose)
    start = time.perf_counter()
    summary: Dict[str, Any] = {"command": args.command, "status": "ok"}
    driver = None
    try:
        layers = [load_config_file(args.config) if args.config else None, parse_overrides(extra)]
        dedicated = {}
        if args.variant is not None:
            dedicated["ode.variant"] = args.variant
        config = build_config(*layers, dedicated)
        driver = Driver(config, args.command, args.jobs)
        summary.update(driver.execute())
        code = 0
    except StepFlowError as exc:
        LOGGER.error("%s: %s", type(exc).__name__, exc)
        summary["status"] = "error"
        summary["error"] = str(exc)
        if driver is not None and driver.suites:
            summary["suites"] = driver.suites
        code = exc.exit_code
    except Exception:
        LOGGER.exception("Unexpected failure")
        summary["status"] = "error"
        code = 1
    summary["runtime_seconds"] = round(time.perf_counter() - start, 3)
    ConsoleUtils.print_summary(summary)
    return code
