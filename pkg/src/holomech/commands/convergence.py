"""convergence - measured order of accuracy of the integrator on the scenario."""

from holomech.commands.common import record, resolve
from holomech.models import CommandOptions, CommandRecord
from holomech.services.propagator import convergence_study, fit_order


def convergence(options: CommandOptions) -> CommandRecord:
    ctx = resolve(options)
    steps, errors = convergence_study(
        ctx.scenario.system, ctx.path, (ctx.t0, ctx.t1), ctx.cfg.method, options.base_steps
    )
    order = fit_order(steps, errors)
    summary = {"order": order, "expected_order": float(ctx.cfg.order)}
    for k, error in enumerate(errors):
        summary[f"error_{k}"] = error
    return record(
        "convergence",
        options,
        summary=summary,
        data={"path": ctx.path.name, "method": ctx.cfg.method, "steps": steps, "errors": errors},
    )
