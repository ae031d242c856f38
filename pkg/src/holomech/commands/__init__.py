"""CLI commands.

Each command takes resolved CommandOptions and returns CommandRecords; it
never prints. `run_command` turns errors into error records and exit codes.
"""

import logging
from typing import Callable, Optional

from holomech.commands.blocks import blocks
from holomech.commands.check import check
from holomech.commands.convergence import convergence
from holomech.commands.factor_check import factor_check
from holomech.commands.run import run
from holomech.commands.sweep import sweep
from holomech.commands.transport import transport
from holomech.data.stores import RecordStore
from holomech.errors import CheckFailed, HolomechError, exit_code_for
from holomech.models import CommandOptions, CommandRecord

logger = logging.getLogger("holomech.commands")

# commands a sweep may repeat
INNER_COMMANDS: dict[str, Callable[[CommandOptions], CommandRecord]] = {
    "run": run,
    "transport": transport,
    "factor-check": factor_check,
    "blocks": blocks,
    "convergence": convergence,
}

COMMANDS: tuple[str, ...] = ("run", "transport", "factor-check", "blocks", "sweep", "convergence", "check")


def execute(cmd: str, options: CommandOptions) -> list[CommandRecord]:
    """Run one command and return its records (errors propagate)."""
    if cmd == "sweep":
        return sweep(options, INNER_COMMANDS)
    if cmd == "check":
        return [check(options)]
    if cmd not in INNER_COMMANDS:
        raise HolomechError(f"unknown command '{cmd}'")
    return [INNER_COMMANDS[cmd](options)]


def error_record(cmd: str, options: CommandOptions, exc: HolomechError) -> CommandRecord:
    return CommandRecord(
        command=cmd,
        scenario=options.scenario,
        status="error",
        error_code=exc.code,
        error=str(exc),
    )


def run_command(cmd: str, options: CommandOptions, store: Optional[RecordStore] = None) -> int:
    """Execute `cmd`, write its records to `store` and return the exit code.

    Exit codes: 0 success, 1 numerical failure, 2 input error. Failed sweep
    rows are reported in their rows and do not change the exit code.
    """
    store = store or RecordStore(options.out)
    try:
        records = execute(cmd, options)
    except HolomechError as exc:
        logger.error(f"[CLI] {cmd} failed: {exc.code}: {exc}")
        store.append(error_record(cmd, options, exc))
        return exit_code_for(exc)

    store.extend(records)
    if cmd == "check" and records[0].status == "error":
        return CheckFailed.exit_code
    return 0


__all__ = ["COMMANDS", "INNER_COMMANDS", "execute", "run_command"]
