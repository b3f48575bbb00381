"""
Mean-field occupancy dynamics under PAS and their equilibrium.

The state holds, per server group k and occupancy n = 0..B_k, the mass x_{k,n} of servers at base scale
(sum_n x_{k,n} = R_k^0). Servers with n jobs complete at rate mu_k (exponential sizes, any work-conserving
discipline). The flow lambda_j^0 of every job type is offered to the groups of K_j by descending priority:
a group absorbs all of the remaining flow while it has non-full mass above the saturation threshold,
and a proportional share of it below. Within a group the absorbed flow goes
  - proportionally to the mass of the non-full states (exchangeable servers),
  - to the lowest occupancy first (shortest-queue tie breaking), or
  - to the highest non-full occupancy first (lowest-label tie breaking fills servers one by one).
What a type cannot place anywhere is dropped (blocked).

Higher priority groups never see lower ones, so the equilibrium is resolved group by group from the first to the
last (in the limit of a vanishing saturation threshold). Integrating the regularised dynamics is the alternative;
it is fast for the smooth splits but crawls when highest-first keeps a state at the saturation threshold.
"""

import logging
from dataclasses import dataclass, replace
from enum import StrEnum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, root

from farmsim.exceptions import FluidConvergenceError
from farmsim.fluid.ordering import VIRTUAL_GROUP, OccupancyVector, StateOrdering
from farmsim.model import Scenario, TieBreak
from farmsim_commons.config import ensure_config_loaded

logger = logging.getLogger(__name__)

# start polishing with a root solver once the integrated state is this close to rest
POLISH_RESIDUAL = 1e-4


class WithinGroupSplit(StrEnum):
    PROPORTIONAL = "proportional"
    LOWEST_FIRST = "lowest-first"
    HIGHEST_FIRST = "highest-first"

    @classmethod
    def for_tie_break(cls, tie_break: TieBreak) -> "WithinGroupSplit":
        return cls.LOWEST_FIRST if tie_break == TieBreak.SQTB else cls.HIGHEST_FIRST


class EquilibriumMethod(StrEnum):
    RESOLVE = "resolve"
    INTEGRATE = "integrate"


@dataclass
class FluidModel:
    scenario: Scenario
    split: WithinGroupSplit
    saturation: float

    def __post_init__(self) -> None:
        scenario = self.scenario
        self.ordering = StateOrdering.for_scenario(scenario)
        self.offsets: dict[int, int] = {}
        offset = 0
        for g in scenario.groups:
            self.offsets[g.id] = offset
            offset += g.buffer + 1
        self.size = offset
        self.mu = np.zeros(self.size)
        for g in scenario.groups:
            o = self.offsets[g.id]
            self.mu[o + 1:o + g.buffer + 1] = g.mu
        self.rates = {j.id: j.base_rate for j in scenario.job_types}
        self.types_of_group = {g.id: scenario.types_of_group(g.id) for g in scenario.groups}

    def initial_state(self) -> np.ndarray:
        x = np.zeros(self.size)
        for g in self.scenario.groups:
            x[self.offsets[g.id]] = g.base_count
        return x

    def route(self, x: np.ndarray) -> tuple[np.ndarray, dict[int, float]]:
        """Arrival flux between states, and the flow of every job type that could not be placed."""
        flux = np.zeros(self.size)
        remaining = dict(self.rates)
        theta = self.saturation
        for k in self.ordering.group_priority:
            types = [j for j in self.types_of_group[k] if remaining[j] > 0]
            if not types:
                continue
            g = self.scenario.group(k)
            o = self.offsets[k]
            nonfull = np.clip(x[o:o + g.buffer], 0.0, None)
            free = float(nonfull.sum())
            if free <= 0:
                continue
            if self.split == WithinGroupSplit.PROPORTIONAL:
                share = min(1.0, free / theta)
                absorbed = share * sum(remaining[j] for j in types)
                moved = absorbed * nonfull / free
                for j in types:
                    remaining[j] *= 1.0 - share
            else:
                order = range(g.buffer) if self.split == WithinGroupSplit.LOWEST_FIRST else reversed(range(g.buffer))
                moved = np.zeros(g.buffer)
                for n in order:
                    if nonfull[n] <= 0:
                        continue
                    share = min(1.0, nonfull[n] / theta)
                    moved[n] = share * sum(remaining[j] for j in types)
                    for j in types:
                        remaining[j] *= 1.0 - share
            flux[o:o + g.buffer] -= moved
            flux[o + 1:o + g.buffer + 1] += moved
        return flux, remaining

    def resolve(self) -> np.ndarray:
        """
        Rest point for a vanishing saturation threshold, one group at a time in priority order.
        A group takes what is left of its types' flow up to its capacity R_k^0 mu_k. Servers complete at rate mu_k
        whenever busy, so absorbing a leaves a / mu_k busy mass, spread over the occupancies by the split.
        """
        x = np.zeros(self.size)
        remaining = dict(self.rates)
        for k in self.ordering.group_priority:
            g = self.scenario.group(k)
            o = self.offsets[k]
            types = self.types_of_group[k]
            offered = sum(remaining[j] for j in types)
            capacity = g.base_count * g.mu
            if offered >= capacity:
                x[o + g.buffer] = g.base_count
                absorbed = capacity
            else:
                x[o:o + g.buffer + 1] = self.spread(g.base_count, g.buffer, offered / g.mu)
                absorbed = offered
            if offered > 0:
                for j in types:
                    remaining[j] *= 1.0 - absorbed / offered
        return x

    def spread(self, mass: float, buffer: int, busy: float) -> np.ndarray:
        """Occupancy masses 0..buffer of a group that is not saturated and has the given busy mass."""
        y = np.zeros(buffer + 1)
        y[0] = mass - busy
        if busy <= 0:
            return y
        if self.split == WithinGroupSplit.LOWEST_FIRST:
            y[1] = busy
        elif self.split == WithinGroupSplit.HIGHEST_FIRST:
            y[buffer] = busy
        else:
            # balance across every cut gives a truncated geometric profile y_n = y_0 r^n with sum_n y_n = mass
            target = mass / y[0]
            ratio = brentq(lambda r: float(np.polyval(np.ones(buffer + 1), r)) - target,
                           0.0, target ** (1.0 / buffer), xtol=1e-15)
            y = y[0] * ratio ** np.arange(buffer + 1)
        return y

    def derivative(self, x: np.ndarray) -> np.ndarray:
        """dx/dt at base scale. Every flux leaves one state of a group and enters another of the same group."""
        x = np.clip(x, 0.0, None)
        deaths = self.mu * x
        dx, _ = self.route(x)
        dx -= deaths
        # n = 0 states have no deaths, so the shift never crosses a group boundary
        dx[:-1] += deaths[1:]
        return dx

    def residual(self, x: np.ndarray) -> float:
        """||dz/dt||_inf in proportions normalised by S_0."""
        return float(np.max(np.abs(self.derivative(x)))) / self.scenario.s0

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(x, 0.0, None)
        for g in self.scenario.groups:
            o = self.offsets[g.id]
            mass = x[o:o + g.buffer + 1].sum()
            if mass > 0:
                x[o:o + g.buffer + 1] *= g.base_count / mass
            else:
                x[o] = g.base_count
        return x

    def polish(self, x: np.ndarray) -> np.ndarray:
        """Newton-type refinement of a near-equilibrium, with group masses pinned."""
        last_states = [self.offsets[g.id] + g.buffer for g in self.scenario.groups]

        def equations(y: np.ndarray) -> np.ndarray:
            eq = self.derivative(y)
            for g, last in zip(self.scenario.groups, last_states):
                o = self.offsets[g.id]
                eq[last] = y[o:o + g.buffer + 1].sum() - g.base_count
            return eq

        solution = root(equations, x, method="hybr", options={"xtol": 1e-15})
        return self.project(solution.x)

    def to_occupancy(self, x: np.ndarray) -> OccupancyVector:
        s0 = self.scenario.s0
        z = np.zeros(len(self.ordering))
        z[self.ordering.index(VIRTUAL_GROUP, 0)] = 1.0 / s0
        for g in self.scenario.groups:
            o = self.offsets[g.id]
            for n in range(g.buffer + 1):
                z[self.ordering.index(g.id, n)] = x[o + n] / s0
        return OccupancyVector(self.ordering, z, s0)

    def group_fractions(self, x: np.ndarray) -> dict[int, np.ndarray]:
        return {g.id: x[self.offsets[g.id]:self.offsets[g.id] + g.buffer + 1] / g.base_count for g in self.scenario.groups}


def fluid_equilibrium(scenario: Scenario, tol: float | None = None, max_time: float | None = None,
                      split: WithinGroupSplit | str | None = None,
                      method: EquilibriumMethod | str | None = None) -> OccupancyVector:
    """
    Rest point of the dynamics, resolved group by group or integrated from the empty farm until ||dz/dt||_inf < tol.
    max_time is measured in mean service times of the slowest group and only bounds the integration.
    The within-group split defaults to the one matching the scenario's tie breaking rule.
    """
    return solve_fluid(scenario, tol, max_time, split, method)[0]


def solve_fluid(scenario: Scenario, tol: float | None = None, max_time: float | None = None,
                split: WithinGroupSplit | str | None = None, method: EquilibriumMethod | str | None = None,
                max_evaluations: int | None = None) -> tuple[OccupancyVector, FluidModel, np.ndarray]:
    fluid_config = ensure_config_loaded().FLUID
    tol = tol if tol is not None else fluid_config.tol
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    split = WithinGroupSplit(split) if split is not None else WithinGroupSplit.for_tie_break(scenario.tie_break)
    method = EquilibriumMethod(method if method is not None else fluid_config.method)
    saturation = fluid_config.saturation_tol if fluid_config.saturation_tol is not None else tol
    # the fluid model lives at base scale, the scaling parameter does not enter it
    model = FluidModel(replace(scenario, h=1), split, saturation)
    if method == EquilibriumMethod.RESOLVE:
        x = model.resolve()
        logger.debug("fluid equilibrium of %s resolved (%s)", scenario.name, split)
    else:
        x = integrate(model, tol,
                      max_time if max_time is not None else fluid_config.max_time,
                      max_evaluations if max_evaluations is not None else fluid_config.max_evaluations)
    return model.to_occupancy(x), model, x


def integrate(model: FluidModel, tol: float, max_time: float, max_evaluations: int) -> np.ndarray:
    """
    Integrate from the empty farm until the state is at rest.
    Raises FluidConvergenceError when max_time or the budget of vector field evaluations runs out.
    """
    name = model.scenario.name
    # time in units of the slowest mean service time
    time_unit = 1.0 / min(g.mu for g in model.scenario.groups)
    evaluations = 0

    def rhs(_: float, y: np.ndarray) -> np.ndarray:
        nonlocal evaluations
        evaluations += 1
        if evaluations > max_evaluations:
            last = model.project(y)
            raise FluidConvergenceError(
                f"fluid dynamics of {name} not at rest after {max_evaluations} evaluations", model.to_occupancy(last),
                model.residual(last))
        return model.derivative(y) * time_unit

    x = model.initial_state()
    residual = model.residual(x)
    t, chunk = 0.0, 1.0
    while residual >= tol:
        if t >= max_time:
            raise FluidConvergenceError(
                f"fluid dynamics of {name} not at rest after {max_time} time units (residual {residual:.3g})",
                model.to_occupancy(x), residual)
        span = min(chunk, max_time - t)
        # only the end of the chunk is kept
        solution = solve_ivp(rhs, (0.0, span), x, method="BDF", t_eval=(span,), rtol=1e-10, atol=1e-13)
        if not solution.success:
            raise FluidConvergenceError(f"integration failed: {solution.message}", model.to_occupancy(x), residual)
        x = model.project(solution.y[:, -1])
        t += span
        chunk *= 2
        residual = model.residual(x)
        if tol <= residual < POLISH_RESIDUAL:
            polished = model.polish(x)
            polished_residual = model.residual(polished)
            if polished_residual < residual:
                x, residual = polished, polished_residual
    logger.debug("fluid dynamics of %s at rest at t=%.1f after %d evaluations, residual %.3g",
                 name, t, evaluations, residual)
    return x
