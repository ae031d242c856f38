"""holomech command-line entry point."""

import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from holomech import __version__
from holomech.commands import error_record, run_command
from holomech.config import get_settings, get_template_summary
from holomech.data.expression import parse_expression
from holomech.data.stores import RecordStore
from holomech.errors import FormatError, HolomechError
from holomech.models import CommandOptions

logger = logging.getLogger("holomech.cli")


def parse_number(text: str) -> float:
    """A real given as a constant expression ("0.25", "pi/6", "2*pi")."""
    expr = parse_expression(text)
    if not expr.is_constant:
        raise FormatError(f"'{text}' must be a constant, it depends on {sorted(expr.variables)}")
    return expr.evaluate({})


def parse_overrides(items: Sequence[str]) -> dict[str, float]:
    overrides = {}
    for item in items:
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep or not name:
            raise FormatError(f"--set expects name=value, got '{item}'")
        overrides[name] = parse_number(value.strip())
    return overrides


def parse_values(items: Sequence[str]) -> list[float]:
    """Sweep values; each item may itself be comma separated."""
    values = []
    for item in items:
        for piece in item.split(","):
            if piece.strip():
                values.append(parse_number(piece.strip()))
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holomech",
        description="Covariant Schroedinger propagation, Berry transport and holonomy on composite bundles.",
        epilog=get_template_summary(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="Scenario file or built-in template name")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="NAME=VALUE",
                        help="Override a declared scenario constant (repeatable)")
    common.add_argument("--path", "--loop", dest="path", help="Named path in the scenario")
    common.add_argument("--t0", help="Start time (default: path start)")
    common.add_argument("--t1", help="End time (default: path end)")
    common.add_argument("--tol", type=float, help="Integrator tolerance")
    common.add_argument("--method", choices=["exp-midpoint-2", "magnus-cf-4"], help="Integrator scheme")
    common.add_argument("--out", help="JSON-lines output file (default: stdout)")
    common.add_argument("--jobs", type=int, default=1, help="Concurrent sweep rows")
    common.add_argument("--sign-convention", choices=["paper", "physics"],
                        help="Sign of the generator (paper: dpsi/dt = +iK psi)")
    common.add_argument("--t-slice", default="0", help="Time slice at which the connection is frozen")
    common.add_argument("-v", "--verbose", action="store_true", help="Log progress at INFO level")

    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("run", parents=[common], help="Propagate a state along the path") \
        .add_argument("--state", type=int, help="Initial basis state index (default: scenario initial_state or 0)")
    sub.add_parser("transport", parents=[common], help="Parallel transport / holonomy along a curve")
    sub.add_parser("factor-check", parents=[common], help="Compare W_geo . U_dyn with the full propagator")
    sub.add_parser("blocks", parents=[common], help="Adiabatic block decomposition and phases")
    sweep = sub.add_parser("sweep", parents=[common], help="Repeat a command over values of a constant")
    sweep.add_argument("--variable", required=True, help="Declared scenario constant to vary")
    sweep.add_argument("--values", nargs="*", default=[], help="Values (space or comma separated)")
    sweep.add_argument("--inner", default="transport",
                       choices=["run", "transport", "factor-check", "blocks", "convergence"])
    sweep.add_argument("--table", help="Also write the rows as CSV")
    sub.add_parser("convergence", parents=[common], help="Measured integrator order") \
        .add_argument("--base-steps", type=int, default=16, help="Coarsest fixed step count")
    sub.add_parser("check", parents=[common], help="Invariant suite (round trip, determinism, exit codes)")
    return parser


def build_options(args: argparse.Namespace) -> CommandOptions:
    try:
        return CommandOptions(
            scenario=args.scenario,
            overrides=parse_overrides(args.overrides),
            path=args.path,
            t0=None if args.t0 is None else parse_number(args.t0),
            t1=None if args.t1 is None else parse_number(args.t1),
            tol=args.tol,
            method=args.method,
            out=args.out,
            jobs=args.jobs,
            sign_convention=args.sign_convention,
            t_slice=parse_number(args.t_slice),
            state=getattr(args, "state", None),
            base_steps=getattr(args, "base_steps", 16),
            variable=getattr(args, "variable", None),
            values=parse_values(getattr(args, "values", [])),
            inner=getattr(args, "inner", "transport"),
            table=getattr(args, "table", None),
        )
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"])
        raise FormatError(f"invalid option --{field.replace('_', '-')}: {error['msg']}") from None


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command, return the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = get_settings()
    logging.basicConfig(
        level=logging.INFO if args.verbose else settings.log_level.upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        options = build_options(args)
    except HolomechError as exc:
        logger.error(f"[CLI] {exc.code}: {exc}")
        fallback = CommandOptions.model_construct(scenario=args.scenario, out=args.out)
        RecordStore(args.out).append(error_record(args.command, fallback, exc))
        return exc.exit_code

    logger.info(f"[CLI] {args.command} --scenario {options.scenario}")
    return run_command(args.command, options)


if __name__ == "__main__":
    sys.exit(main())
