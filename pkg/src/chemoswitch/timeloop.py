"""Time loop shared by all drivers.

Diagnostic times are the fixed multiples ``k * dt * diag_every`` (and
``t_end``). Between two of them the loop takes the fewest equal substeps
that respect ``min(params.dt, CFL)``, so runs with different gamma are
sampled at identical times, and a run whose CFL limit never binds takes
exactly ``diag_every`` steps of size ``dt`` per row.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

from .core import Params, StepReport
from .full import cfl_limit


@dataclass
class RunOutcome:
    state: object
    steps: int
    event: str | None = None  # None, "stopped" or "max_steps"
    last_report: StepReport | None = None


def diag_times(params: Params, t_end: float) -> list[float]:
    interval = params.dt * params.diag_every
    count = math.ceil(t_end / interval - 1e-9)
    return [min(k * interval, t_end) for k in range(1, count + 1)]


def advance(
    state,
    stepper: Callable,
    params: Params,
    *,
    t_end: float | None = None,
    on_diag: Callable | None = None,
    blowup_threshold: float | None = None,
    max_steps: int | None = None,
    stop: Callable | None = None,
) -> RunOutcome:
    """Run ``stepper(state, params, dt, blowup_threshold)`` from ``state.t = 0`` to ``t_end``.

    ``on_diag(state, steps)`` is called on the initial state and at every
    diagnostic time. ``stop(state, report)`` may end the run early; the
    state at which it fired is also passed to ``on_diag``. ``BlowupAbort``
    and ``SolverError`` propagate to the caller.
    """
    t_end = params.t_end if t_end is None else t_end
    g = state.grid
    steps = 0
    report = None
    if on_diag is not None:
        on_diag(state, steps)
    for target in diag_times(params, t_end):
        while True:
            remaining = target - state.t
            cap = min(params.dt, cfl_limit(state.w.array, params, g.hx, g.hy))
            nsub = max(1, math.ceil(remaining / cap - 1e-9))
            dt = remaining / nsub
            state, report = stepper(state, params, dt, blowup_threshold)
            steps += 1
            if nsub == 1:
                state = dataclasses.replace(state, t=target)
            if stop is not None and stop(state, report):
                if on_diag is not None:
                    on_diag(state, steps)
                return RunOutcome(state, steps, "stopped", report)
            if max_steps is not None and steps >= max_steps and nsub > 1:
                return RunOutcome(state, steps, "max_steps", report)
            if nsub == 1:
                break
        if on_diag is not None:
            on_diag(state, steps)
        if max_steps is not None and steps >= max_steps and state.t < t_end:
            return RunOutcome(state, steps, "max_steps", report)
    return RunOutcome(state, steps, None, report)
