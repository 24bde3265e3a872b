"""CLI commands for running simulations and the verification harnesses.

Exit codes: 0 when every asserted invariant passes, 1 on an invariant failure,
2 on usage or configuration errors, 3 on a numerical failure.
"""

import argparse
import dataclasses
import json
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

from rnpsim.config.logging import get_logger, setup_logging
from rnpsim.config.settings import ChoConfig, SolverConfig
from rnpsim.core.cho import cho_run
from rnpsim.core.diagnostics import twin_run_stability, weighted_probes
from rnpsim.core.errors import ConfigError, NumericalError, ValidationError
from rnpsim.core.grid import Grid
from rnpsim.core.models import CHO_CSV_COLUMNS, CSV_COLUMNS
from rnpsim.core.mz import SAMPLERS, MzParams, verify_mz
from rnpsim.core.stepper import run
from rnpsim.output.schemas import InvariantSummary, RunManifest
from rnpsim.output.sink import DirectorySink
from rnpsim.parser.config_parser import load_config
from rnpsim.version import __version__

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

MANIFEST_FILENAME = "manifest.json"
DEFAULT_OUT_ROOT = Path("runs")


def _error(message: str) -> None:
    print(f"Error: {message}", file=sys.stderr)


def _now() -> datetime:
    return datetime.now().astimezone()


def _manifest(command: str, config: Union[SolverConfig, ChoConfig]) -> RunManifest:
    return RunManifest(
        command=command,
        version=__version__,
        section=config.SECTION,
        config=config.to_dict(),
        started_at=_now(),
    )


def _emit_manifest(manifest: RunManifest, out_dir: Optional[Path]) -> bool:
    """Print the manifest and write it into out_dir; False when the file cannot be written."""
    text = manifest.model_dump_json(indent=2)
    print(text)
    if out_dir is None:
        return True
    path = out_dir / MANIFEST_FILENAME
    try:
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as e:
        _error(f"cannot write manifest {path}: {e}")
        return False
    return True


def _print_json(data: dict[str, Any]) -> None:
    print(json.dumps(data, indent=2, default=float))


def _load(path: str, expected: type) -> Union[SolverConfig, ChoConfig]:
    config = load_config(path)
    if not isinstance(config, expected):
        raise ConfigError(
            f"{path} holds a [{config.SECTION}] section, expected [{expected.SECTION}]"
        )
    return config


def _out_dir(args: argparse.Namespace) -> Path:
    if args.out:
        return Path(args.out)
    return DEFAULT_OUT_ROOT / Path(args.config).stem


def _simulate(
    args: argparse.Namespace,
    config_cls: type,
    columns: Sequence[str],
    execute: Callable[[Any, DirectorySink], Any],
    results: Callable[[Any, Any], dict[str, Any]],
) -> int:
    """Shared body of the run and cho commands."""
    try:
        config = _load(args.config, config_cls)
    except ConfigError as e:
        _error(str(e))
        return EXIT_USAGE

    out_dir = _out_dir(args)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        _error(f"cannot create output directory {out_dir}: {e}")
        return EXIT_USAGE
    setup_logging(log_dir=out_dir, console=True, verbose=getattr(args, "verbose", False))
    logger = get_logger()

    manifest = _manifest(args.command, config)
    sink = DirectorySink(out_dir, columns=columns)
    try:
        result = execute(config, sink)
    except ValidationError as e:
        manifest.error = str(e)
        manifest.finished_at = _now()
        _emit_manifest(manifest, out_dir)
        _error(str(e))
        return EXIT_USAGE
    except NumericalError as e:
        logger.error("Numerical failure: %s", e)
        manifest.error = str(e)
        manifest.passed = False
        manifest.finished_at = _now()
        _emit_manifest(manifest, out_dir)
        _error(str(e))
        return EXIT_NUMERICAL
    except OSError as e:
        _error(f"cannot write run output: {e}")
        return EXIT_USAGE

    manifest.finished_at = _now()
    manifest.invariants = [InvariantSummary.from_check(c) for c in result.invariants]
    manifest.passed = result.passed
    manifest.results = results(config, result)
    if not _emit_manifest(manifest, out_dir):
        return EXIT_USAGE
    if not result.passed:
        failed = [c.name for c in result.invariants if c.asserted and not c.passed]
        _error(f"invariant failure: {', '.join(failed)}")
        return EXIT_INVARIANT
    return EXIT_OK


def _run_results(config: SolverConfig, result) -> dict[str, Any]:
    probes = weighted_probes(result.records, config.alpha, config.grid.area)
    final = result.records[-1]
    later = [r.sep for r in result.records if r.t >= config.sigma]
    return {
        "t_final": final.t,
        "records": len(result.records),
        "sup_half_gradmu": probes.sup_half_gradmu,
        "sup_alpha_mu": probes.sup_alpha_mu,
        "min_sep_after_sigma": min(later) if later else None,
        "yosida_gap": final.yosida_gap,
    }


def _cho_results(config: ChoConfig, result) -> dict[str, Any]:
    final = result.records[-1]
    return {
        "t_final": final.t,
        "phi_mean": final.phi_mean,
        "analytic_mean": final.analytic_mean,
        "max_recursion_error": result.max_recursion_error,
        "error_constant": result.error_constant,
    }


def cmd_run(args: argparse.Namespace) -> int:
    """Run the coupled phase-field / reaction-diffusion system."""
    return _simulate(args, SolverConfig, CSV_COLUMNS, run, _run_results)


def cmd_cho(args: argparse.Namespace) -> int:
    """Run the scalar Cahn-Hilliard-Oono model."""
    return _simulate(args, ChoConfig, CHO_CSV_COLUMNS, cho_run, _cho_results)


def cmd_check_config(args: argparse.Namespace) -> int:
    """Validate a config file and print the resolved manifest without running."""
    setup_logging(console=True)
    try:
        config = load_config(args.config)
    except ConfigError as e:
        _error(str(e))
        return EXIT_USAGE
    _emit_manifest(_manifest(args.command, config), None)
    return EXIT_OK


def cmd_verify_mz(args: argparse.Namespace) -> int:
    """Search random fields for violations of the mean-zero gradient inequality."""
    setup_logging(console=True)
    if args.trials < 0 or args.nx < 4 or not args.ceiling > 0:
        _error("need --trials >= 0, --nx >= 4 and --ceiling > 0")
        return EXIT_USAGE
    report = verify_mz(
        SAMPLERS[args.sampler],
        args.trials,
        MzParams(ceiling=args.ceiling),
        grid=Grid(args.nx, args.nx),
        seed=args.seed,
    )
    data = dataclasses.asdict(report)
    data["sampler"] = args.sampler
    data["seed"] = args.seed
    data["passed"] = report.passed
    _print_json(data)
    return EXIT_OK if report.passed else EXIT_INVARIANT


def cmd_stability(args: argparse.Namespace) -> int:
    """Twin-run continuous-dependence probe (tilde variant)."""
    setup_logging(console=True, verbose=getattr(args, "verbose", False))
    try:
        config = _load(args.config, SolverConfig)
        sigma = config.sigma if args.sigma is None else args.sigma
        report = twin_run_stability(config, sigma, args.eps)
    except (ConfigError, ValidationError, ValueError) as e:
        _error(str(e))
        return EXIT_USAGE
    except NumericalError as e:
        _error(str(e))
        return EXIT_NUMERICAL
    _print_json(dataclasses.asdict(report))
    return EXIT_OK


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser."""
    parser = argparse.ArgumentParser(
        prog="rnpsim",
        description="RNA-protein condensate phase-field simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    subparsers = parser.add_subparsers(dest="command", help="Commands")

    # run command
    run_parser = subparsers.add_parser("run", help="Run the coupled system")
    run_parser.add_argument("config", type=str, help="Config file with an [rnp] section")
    run_parser.add_argument(
        "--out",
        type=str,
        help="Output directory (default: runs/<config name>)",
    )
    run_parser.add_argument(
        "--verbose",
        action="store_true",
        help="Log solver detail",
    )

    # cho command
    cho_parser = subparsers.add_parser("cho", help="Run the Cahn-Hilliard-Oono model")
    cho_parser.add_argument("config", type=str, help="Config file with a [cho] section")
    cho_parser.add_argument(
        "--out",
        type=str,
        help="Output directory (default: runs/<config name>)",
    )
    cho_parser.add_argument("--verbose", action="store_true", help="Log solver detail")

    # verify-mz command
    mz_parser = subparsers.add_parser(
        "verify-mz", help="Falsification harness for the entropy gradient inequality"
    )
    mz_parser.add_argument(
        "--trials",
        type=int,
        default=1000,
        help="Number of random fields (default: 1000)",
    )
    mz_parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    mz_parser.add_argument(
        "--sampler",
        choices=sorted(SAMPLERS),
        default="piecewise",
        help="Field generator (default: piecewise)",
    )
    mz_parser.add_argument("--nx", type=int, default=32, help="Grid cells per side (default: 32)")
    mz_parser.add_argument(
        "--ceiling",
        type=float,
        default=1e3,
        help="Largest acceptable constant (default: 1000)",
    )

    # check-config command
    check_parser = subparsers.add_parser(
        "check-config", help="Validate a config file and print the resolved manifest"
    )
    check_parser.add_argument("config", type=str, help="Config file")

    # stability command
    stability_parser = subparsers.add_parser(
        "stability", help="Twin-run continuous-dependence probe"
    )
    stability_parser.add_argument("config", type=str, help="Config file with an [rnp] section")
    stability_parser.add_argument(
        "--sigma",
        type=float,
        default=None,
        help="Start of the comparison window (default: config sigma)",
    )
    stability_parser.add_argument(
        "--eps",
        type=float,
        default=1e-6,
        help="Sup-norm of the protein perturbation (default: 1e-6)",
    )
    stability_parser.add_argument("--verbose", action="store_true", help="Log solver detail")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point."""
    parser = create_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    commands = {
        "run": cmd_run,
        "cho": cmd_cho,
        "verify-mz": cmd_verify_mz,
        "check-config": cmd_check_config,
        "stability": cmd_stability,
    }

    cmd_func = commands.get(args.command)
    if cmd_func is None:
        _error(f"Unknown command: {args.command}")
        return EXIT_USAGE

    return cmd_func(args)


if __name__ == "__main__":
    sys.exit(main())
