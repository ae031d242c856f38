"""run - propagate a state along the scenario path."""

import logging

import numpy as np

from holomech.commands.common import record, resolve
from holomech.errors import FormatError
from holomech.models import CommandOptions, CommandRecord
from holomech.services.propagator import time_ordered_exp

logger = logging.getLogger("holomech.commands.run")


def initial_state(ctx) -> np.ndarray:
    """Scenario initial_state if declared and --state was not given, else basis vector e_state."""
    n = ctx.scenario.system.n
    index = ctx.options.state
    if index is None:
        if ctx.scenario.initial_state is not None:
            return ctx.scenario.initial_state
        index = 0
    if index >= n:
        raise FormatError(f"--state {index} out of range for dimension {n}")
    psi = np.zeros(n, dtype=complex)
    psi[index] = 1.0
    return psi


def run(options: CommandOptions) -> CommandRecord:
    ctx = resolve(options)
    psi0 = initial_state(ctx)
    prop = time_ordered_exp(ctx.scenario.system, ctx.path, ctx.t0, ctx.t1, ctx.cfg)
    psi1 = prop.U @ psi0
    overlap = np.vdot(psi0, psi1)
    fidelity = float(abs(overlap) ** 2)
    logger.info(f"[RUN] '{ctx.path.name}' [{ctx.t0:g}, {ctx.t1:g}]: fidelity {fidelity:.12f}")
    return record(
        "run",
        options,
        summary={
            "t0": ctx.t0,
            "t1": ctx.t1,
            "fidelity": fidelity,
            "norm": float(np.linalg.norm(psi1)),
            "defect": prop.defect,
            "steps_taken": float(prop.steps_taken),
        },
        data={
            "path": ctx.path.name,
            "method": ctx.cfg.method,
            "initial_state": psi0,
            "final_state": psi1,
            "overlap": complex(overlap),
            "propagator": prop.U,
        },
    )
