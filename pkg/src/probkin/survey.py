"""Coarsened updating for surveys that bin answers more coarsely than they are observed.

Observations always refine the fine partition. Before each update the fine
blocks are gathered into the coarser bins of the current questionnaire, and
the measure is updated against those bins instead.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from probkin.dipk import CredalSet, DipkState, initial_dipk_state, update_generators
from probkin.dpk import (
    DpkState,
    StopReason,
    StopRule,
    dpk_step,
    initial_state,
    jeffrey_update,
)
from probkin.errors import EmptyPreimage, InvalidCoarsening, InvalidModel
from probkin.measure import MASS_TOL, Event, ProbMeasure, tv_distance
from probkin.observation import (
    ObservationModel,
    Partition,
    PartitionMasses,
    is_terminal,
    mechanical_masses,
    refine_partition,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoarseningMap:
    """Groups of fine block indices; the fine remainder stays its own cell."""

    groups: Tuple[Tuple[int, ...], ...]
    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(tuple(int(i) for i in g) for g in self.groups))
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        if len(self.groups) != len(self.labels):
            raise InvalidCoarsening(f"{len(self.groups)} groups for {len(self.labels)} labels")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidCoarsening("coarse labels must be distinct")
        if any(not g for g in self.groups):
            raise InvalidCoarsening("coarse groups must be nonempty")

    def validate(self, n_blocks: int) -> None:
        flat = [i for g in self.groups for i in g]
        if len(flat) != len(set(flat)):
            raise InvalidCoarsening("coarse groups overlap")
        if sorted(flat) != list(range(n_blocks)):
            raise InvalidCoarsening(
                f"coarse groups must cover block indices 0..{n_blocks - 1}, got {sorted(flat)}"
            )

    @classmethod
    def from_symbol_groups(
        cls,
        partition: Partition,
        groups: Sequence[Sequence[str]],
        labels: Optional[Sequence[str]] = None,
    ) -> "CoarseningMap":
        """Map from groups of symbols. Symbols not yet observed are dropped."""
        if labels is not None and len(labels) != len(groups):
            raise InvalidCoarsening(f"{len(groups)} symbol groups for {len(labels)} labels")
        position = {s: i for i, s in enumerate(partition.observed)}
        owner: dict = {}
        index_groups: List[Tuple[int, ...]] = []
        kept_labels: List[str] = []
        for g, group in enumerate(groups):
            kept = []
            for s in group:
                if s in owner:
                    raise InvalidCoarsening(f"symbol {s!r} is in more than one group")
                owner[s] = g
                if s in position:
                    kept.append(position[s])
            if kept:
                index_groups.append(tuple(kept))
                kept_labels.append(labels[g] if labels is not None else "+".join(group))
        missing = [s for s in partition.observed if s not in owner]
        if missing:
            raise InvalidCoarsening(f"observed symbols {missing} belong to no group")
        cmap = cls(groups=tuple(index_groups), labels=tuple(kept_labels))
        cmap.validate(len(partition.blocks))
        return cmap


def identity_map(partition: Partition) -> CoarseningMap:
    return CoarseningMap(
        groups=tuple((i,) for i in range(len(partition.blocks))),
        labels=partition.observed,
    )


def _stage_map(fine: Partition, groups: Optional[Sequence[Sequence[str]]]) -> CoarseningMap:
    if groups is None:
        return identity_map(fine)
    return CoarseningMap.from_symbol_groups(fine, groups)


def coarsen_partition(fine: Partition, cmap: CoarseningMap) -> Partition:
    cmap.validate(len(fine.blocks))
    blocks = []
    for g in cmap.groups:
        block = Event()
        for i in g:
            block = block | fine.blocks[i]
        blocks.append(block)
    return Partition(
        blocks=tuple(blocks), remainder=fine.remainder, observed=cmap.labels, m=fine.m
    )


def coarsen_masses(masses: PartitionMasses, cmap: CoarseningMap) -> PartitionMasses:
    cmap.validate(len(masses.block_masses))
    block_masses = tuple(float(sum(masses.block_masses[i] for i in g)) for g in cmap.groups)
    return PartitionMasses(block_masses=block_masses, remainder_mass=masses.remainder_mass)


def _coarse_cells(
    model: ObservationModel, fine: Partition, cmap: CoarseningMap
) -> Tuple[Partition, PartitionMasses]:
    return coarsen_partition(fine, cmap), coarsen_masses(mechanical_masses(model, fine), cmap)


def coarse_dpk_step(
    state: DpkState, model: ObservationModel, cmap: CoarseningMap, new_symbols: Sequence[str]
) -> DpkState:
    """``state.partition`` is the fine partition; ``cmap`` indexes its refinement."""
    fine = refine_partition(state.partition, model, new_symbols)
    coarse, masses = _coarse_cells(model, fine, cmap)
    measure = jeffrey_update(state.measure, coarse, masses)
    return DpkState(measure=measure, partition=fine, step=state.step + 1)


def coarse_dipk_step(
    state: DipkState, model: ObservationModel, cmap: CoarseningMap, new_symbols: Sequence[str]
) -> DipkState:
    fine = refine_partition(state.partition, model, new_symbols)
    coarse, masses = _coarse_cells(model, fine, cmap)
    return DipkState(credal=update_generators(state.credal, coarse, masses), partition=fine)


@dataclass(frozen=True)
class CoarseStage:
    step: int
    fine: ProbMeasure
    coarse: ProbMeasure
    fine_partition: Partition
    coarse_partition: Partition
    tv: float
    tv_step: float = 0.0


@dataclass
class CoarseTrace:
    stages: List[CoarseStage] = field(default_factory=list)
    stop_reason: StopReason = StopReason.EXHAUSTED


def coarse_run(
    prior: ProbMeasure,
    model: ObservationModel,
    schedule: Sequence[Sequence[str]],
    stage_groups: Sequence[Optional[Sequence[Sequence[str]]]],
    stop: Optional[StopRule] = None,
) -> CoarseTrace:
    """Fine and coarse runs side by side; ``None`` groups mean the identity map.

    Budget and tolerance work as in ``dpk_run``, the tolerance tested against
    the coarse measure's change on steps that observed something. A terminal
    fine partition does not end the run: later stages may still regroup it.
    """
    if len(stage_groups) != len(schedule):
        raise InvalidCoarsening(
            f"{len(stage_groups)} coarsening stages for {len(schedule)} batches"
        )
    stop = stop or StopRule()
    budget = stop.budget_for(model)
    fine_state = initial_state(prior, model)
    coarse_measure = prior
    trace = CoarseTrace()
    for step, (batch, groups) in enumerate(zip(schedule, stage_groups), start=1):
        if fine_state.step >= budget:
            trace.stop_reason = StopReason.BUDGET
            break
        nxt = dpk_step(fine_state, model, batch)
        refined = nxt.partition is not fine_state.partition
        fine_state = nxt
        partition, fine_measure = fine_state.partition, fine_state.measure
        cmap = _stage_map(partition, groups)
        coarse, masses = _coarse_cells(model, partition, cmap)
        updated = jeffrey_update(coarse_measure, coarse, masses)
        tv_step = tv_distance(coarse_measure, updated)
        coarse_measure = updated
        tv = tv_distance(fine_measure, coarse_measure)
        log.debug("coarse stage %d: %d coarse blocks, tv to fine %.3g", step, len(cmap.groups), tv)
        trace.stages.append(
            CoarseStage(
                step=step,
                fine=fine_measure,
                coarse=coarse_measure,
                fine_partition=partition,
                coarse_partition=coarse,
                tv=tv,
                tv_step=tv_step,
            )
        )
        if refined and model.tail is not None and tv_step < stop.tolerance:
            trace.stop_reason = StopReason.TOLERANCE
            break
    else:
        terminal = is_terminal(fine_state.partition)
        trace.stop_reason = StopReason.TERMINAL if terminal else StopReason.EXHAUSTED
    return trace


def coarse_dipk_run(
    credal: CredalSet,
    model: ObservationModel,
    schedule: Sequence[Sequence[str]],
    stage_groups: Sequence[Optional[Sequence[Sequence[str]]]],
) -> List[DipkState]:
    if len(stage_groups) != len(schedule):
        raise InvalidCoarsening(
            f"{len(stage_groups)} coarsening stages for {len(schedule)} batches"
        )
    state = initial_dipk_state(credal, model)
    states = [state]
    for batch, groups in zip(schedule, stage_groups):
        fine = refine_partition(state.partition, model, batch)
        coarse, masses = _coarse_cells(model, fine, _stage_map(fine, groups))
        state = DipkState(credal=update_generators(state.credal, coarse, masses), partition=fine)
        states.append(state)
    return states


def product_observation_model(
    model1: ObservationModel,
    model2: ObservationModel,
    joint_pmf,
    embedding=None,
    sep: str = ":",
) -> ObservationModel:
    """Joint model over symbol pairs.

    Without an embedding the atoms are the product grid, (i, j) at index
    i * model2.m + j. An embedding is an (m1, m2) integer array giving each
    grid point's atom, or -1 for grid points outside the space.
    """
    if model1.tail is not None or model2.tail is not None:
        raise InvalidModel("product models need finite observable ranges")
    joint = np.asarray(joint_pmf, dtype=np.float64)
    shape = (len(model1.symbols), len(model2.symbols))
    if joint.shape != shape:
        raise InvalidModel(f"joint pmf has shape {joint.shape}, expected {shape}")
    if np.any(joint <= 0) or abs(float(joint.sum()) - 1.0) > MASS_TOL:
        raise InvalidModel("joint pmf must be positive and sum to 1")
    if embedding is None:
        grid = np.arange(model1.m * model2.m).reshape(model1.m, model2.m)
        m = model1.m * model2.m
    else:
        grid = np.asarray(embedding, dtype=np.int64)
        if grid.shape != (model1.m, model2.m):
            raise InvalidModel(f"embedding has shape {grid.shape}, expected {(model1.m, model2.m)}")
        m = int(grid.max()) + 1
    symbols, pmf, preimages = [], [], []
    for a, (s1, pre1) in enumerate(zip(model1.symbols, model1.preimages)):
        for b, (s2, pre2) in enumerate(zip(model2.symbols, model2.preimages)):
            cells = grid[np.ix_(list(pre1), list(pre2))].ravel()
            pre = Event.of(int(c) for c in cells if c >= 0)
            if pre.is_empty():
                raise EmptyPreimage(f"no atom carries the pair ({s1!r}, {s2!r})")
            symbols.append(f"{s1}{sep}{s2}")
            pmf.append(float(joint[a, b]))
            preimages.append(pre)
    return ObservationModel(
        symbols=tuple(symbols), pmf=tuple(pmf), preimages=tuple(preimages), m=m
    )
