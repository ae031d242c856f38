"""sweep - repeat an inner command over values of one scenario constant.

Rows run independently (up to --jobs at a time) and come back in input
order. A failing row becomes an error row; the sweep continues.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

from holomech.config import get_settings
from holomech.data.scenario import load_scenario
from holomech.data.stores import write_table
from holomech.errors import FormatError, HolomechError
from holomech.models import CommandOptions, CommandRecord

logger = logging.getLogger("holomech.commands.sweep")

Inner = Callable[[CommandOptions], CommandRecord]


def _row(inner_name: str, inner: Inner, options: CommandOptions, index: int, value: float) -> CommandRecord:
    overrides = {**options.overrides, options.variable: value}
    row_options = options.model_copy(update={"overrides": overrides})
    head = {options.variable: value}
    try:
        result = inner(row_options)
    except HolomechError as exc:
        logger.warning(f"[SWEEP] row {index} ({options.variable}={value:g}) failed: {exc.code}: {exc}")
        return CommandRecord(
            command="sweep",
            scenario=options.scenario,
            status="error",
            error_code=exc.code,
            error=str(exc),
            summary=head,
            data={"inner": inner_name, "row": index},
        )
    return CommandRecord(
        command="sweep",
        scenario=options.scenario,
        summary={**head, **result.summary},
        data={"inner": inner_name, "row": index, **result.data},
    )


def table_columns(variable: str, rows: list[CommandRecord]) -> list[str]:
    columns = [variable, "status", "error_code"]
    for row in rows:
        for key in row.summary:
            if key not in columns:
                columns.append(key)
    return columns


def sweep(options: CommandOptions, inner_commands: dict[str, Inner]) -> list[CommandRecord]:
    """One record per value of options.variable, in input order."""
    if not options.variable:
        raise FormatError("sweep needs --variable")
    if options.inner not in inner_commands:
        raise FormatError(f"--inner must be one of {', '.join(sorted(inner_commands))}, got '{options.inner}'")
    scenario = load_scenario(options.scenario, options.overrides, options.sign_convention)
    if options.variable not in scenario.constants:
        raise FormatError(
            f"'{options.variable}' is not a declared constant of '{scenario.name}' "
            f"(declared: {', '.join(scenario.constants) or 'none'})",
            "constants",
        )

    inner = inner_commands[options.inner]
    jobs = max(1, min(options.jobs, get_settings().max_jobs))
    logger.info(f"[SWEEP] {options.variable} over {len(options.values)} values, inner={options.inner}, jobs={jobs}")
    if jobs == 1:
        rows = [_row(options.inner, inner, options, i, v) for i, v in enumerate(options.values)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(
                lambda item: _row(options.inner, inner, options, item[0], item[1]),
                enumerate(options.values),
            ))

    if options.table:
        columns = table_columns(options.variable, rows)
        write_table(options.table, columns, [
            {**row.summary, "status": row.status, "error_code": row.error_code or ""} for row in rows
        ])
    return rows
