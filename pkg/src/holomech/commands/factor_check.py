"""factor-check - compare W_geo . U_dyn with the full propagator."""

import logging

from holomech.commands.common import record, resolve
from holomech.config import get_settings
from holomech.models import CommandOptions, CommandRecord
from holomech.services.holonomy import commutation_defect, factorized_propagator

logger = logging.getLogger("holomech.commands.factor_check")


def factor_check(options: CommandOptions) -> CommandRecord:
    ctx = resolve(options)
    path = ctx.path.restricted(ctx.t0, ctx.path.t1)
    system = ctx.scenario.system
    defect = commutation_defect(system, path.restricted(path.t0, ctx.t1), get_settings().commutation_samples)
    result = factorized_propagator(system, path, ctx.t1, ctx.cfg, t_slice=options.t_slice)
    logger.info(f"[FACTOR] mismatch {result.mismatch:.3e}, commutation defect {defect:.3e}")
    return record(
        "factor-check",
        options,
        summary={
            "t0": ctx.t0,
            "t1": ctx.t1,
            "mismatch": result.mismatch,
            "commutation_defect": defect,
            "tol": ctx.cfg.tol,
        },
        data={
            "path": path.name,
            "W_geo": result.W_geo,
            "U_dyn": result.U_dyn,
            "G": result.G,
        },
    )
