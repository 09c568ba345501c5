"""Dynamic probability kinematics: sequential Jeffrey updating of one measure."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from probkin.errors import InvalidModel, NullNonemptyConditioner, PriorNullBlock, ShapeMismatch
from probkin.measure import MASS_TOL, ProbMeasure, condition, tv_distance
from probkin.observation import (
    ObservationModel,
    Partition,
    PartitionMasses,
    induce_partition,
    is_terminal,
    mechanical_masses,
    observable_symbols,
    refine_partition,
)

log = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10


class StopReason(str, Enum):
    TERMINAL = "terminal"
    TOLERANCE = "tolerance"
    BUDGET = "budget"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class StopRule:
    tolerance: float = DEFAULT_TOLERANCE
    budget: Optional[int] = None

    def budget_for(self, model: ObservationModel) -> int:
        return self.budget if self.budget is not None else 10 * len(model.symbols)


@dataclass(frozen=True)
class DpkState:
    measure: ProbMeasure
    partition: Partition
    step: int = 0


@dataclass
class DpkTrace:
    states: List[DpkState]
    tv_steps: List[float] = field(default_factory=list)
    stop_reason: StopReason = StopReason.EXHAUSTED

    @property
    def final(self) -> DpkState:
        return self.states[-1]

    @property
    def limit(self) -> ProbMeasure:
        return self.states[-1].measure


def jeffrey_update(
    prior: ProbMeasure, partition: Partition, masses: PartitionMasses
) -> ProbMeasure:
    """Sum over cells of P(. | E_j) times the new mass of E_j.

    An empty cell contributes nothing since its conditional is all zeros.
    """
    if partition.m != prior.m:
        raise ShapeMismatch(f"partition has {partition.m} atoms, prior {prior.m}")
    if len(masses.block_masses) != len(partition.blocks):
        raise ShapeMismatch(
            f"{len(masses.block_masses)} block masses for {len(partition.blocks)} blocks"
        )
    posterior = np.zeros(prior.m)
    for j, (cell, w) in enumerate(zip(partition.cells, masses.cell_masses)):
        try:
            posterior += w * condition(prior, cell)
        except NullNonemptyConditioner as e:
            raise PriorNullBlock(str(e), cell=j) from e
    return ProbMeasure(posterior)


def initial_state(prior: ProbMeasure, model: ObservationModel) -> DpkState:
    if prior.m != model.m:
        raise ShapeMismatch(f"prior has {prior.m} atoms, model {model.m}")
    return DpkState(measure=prior, partition=induce_partition(model, []), step=0)


def dpk_step(state: DpkState, model: ObservationModel, new_symbols: Sequence[str]) -> DpkState:
    partition = refine_partition(state.partition, model, new_symbols)
    if partition is state.partition:
        return DpkState(measure=state.measure, partition=partition, step=state.step + 1)
    masses = mechanical_masses(model, partition)
    measure = jeffrey_update(state.measure, partition, masses)
    return DpkState(measure=measure, partition=partition, step=state.step + 1)


def dpk_run(
    prior: ProbMeasure,
    model: ObservationModel,
    schedule: Sequence[Sequence[str]],
    stop: Optional[StopRule] = None,
) -> DpkTrace:
    stop = stop or StopRule()
    state = initial_state(prior, model)
    trace = DpkTrace(states=[state])
    budget = stop.budget_for(model)
    if is_terminal(state.partition):
        trace.stop_reason = StopReason.TERMINAL
        return trace
    for batch in schedule:
        if state.step >= budget:
            trace.stop_reason = StopReason.BUDGET
            break
        nxt = dpk_step(state, model, batch)
        refined = nxt.partition is not state.partition
        tv = tv_distance(state.measure, nxt.measure)
        trace.states.append(nxt)
        trace.tv_steps.append(tv)
        state = nxt
        log.debug("dpk step %d: observed %s, tv step %.3g", state.step, list(batch), tv)
        if is_terminal(state.partition):
            trace.stop_reason = StopReason.TERMINAL
            break
        if refined and model.tail is not None and tv < stop.tolerance:
            trace.stop_reason = StopReason.TOLERANCE
            break
    else:
        trace.stop_reason = StopReason.EXHAUSTED
    log.debug("dpk run stopped after %d steps: %s", state.step, trace.stop_reason.value)
    return trace


def check_jeffrey_condition(
    prior: ProbMeasure, posterior: ProbMeasure, partition: Partition
) -> bool:
    """Whether conditionals given every posterior-charged cell are unchanged."""
    if prior.m != posterior.m or partition.m != prior.m:
        return False
    for cell in partition.cells:
        if cell.is_empty():
            continue
        idx = list(cell)
        if float(posterior.masses[idx].sum()) <= 0.0:
            continue
        try:
            before = condition(prior, cell)
        except NullNonemptyConditioner:
            return False
        after = condition(posterior, cell)
        if not np.allclose(before, after, rtol=0.0, atol=MASS_TOL):
            return False
    return True


def steps_to_terminal(model: ObservationModel, batch_size: int) -> int:
    """Steps needed to reach the terminal partition observing batch_size new symbols per step."""
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    if model.tail is not None or not model.covers():
        raise InvalidModel("steps_to_terminal needs preimages covering the state space")
    symbols = observable_symbols(model)
    partition = induce_partition(model, [])
    steps = 0
    while not is_terminal(partition):
        batch = symbols[steps * batch_size : (steps + 1) * batch_size]
        partition = refine_partition(partition, model, batch)
        steps += 1
    return steps


def limit_measure(prior: ProbMeasure, model: ObservationModel) -> ProbMeasure:
    """Closed-form limit once every observable symbol has been seen."""
    terminal = induce_partition(model, observable_symbols(model))
    return jeffrey_update(prior, terminal, mechanical_masses(model, terminal))
