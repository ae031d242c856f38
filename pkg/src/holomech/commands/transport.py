"""transport - parallel transport along a curve in a Z slice."""

from holomech.commands.common import record, resolve
from holomech.models import CommandOptions, CommandRecord
from holomech.services.holonomy import ZCurve, ZLoop, parallel_transport


def transport(options: CommandOptions) -> CommandRecord:
    ctx = resolve(options)
    path = ctx.path.restricted(ctx.t0, ctx.t1)
    curve = ZLoop(path, options.t_slice) if path.closed else ZCurve(path, options.t_slice)
    result = parallel_transport(ctx.scenario.system, curve, ctx.cfg)
    return record(
        "transport",
        options,
        summary={
            "phase": result.abelian,
            "loop_length": result.loop_length,
            "defect": result.defect,
            "steps_taken": float(result.steps_taken),
        },
        data={
            "path": path.name,
            "closed": path.closed,
            "t_slice": options.t_slice,
            "W": result.W,
            "eigenphases": result.eigenphases,
        },
    )
