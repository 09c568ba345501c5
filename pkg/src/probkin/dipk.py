"""Dynamic imprecise probability kinematics over finite credal sets.

A credal set is stored as its generators. Lower and upper probabilities are
the min and max over generators, which coincide with the envelopes of the
convex core the generators span. Conditional envelopes are also taken over
generators; ``core_gen_bayes_bounds`` solves the core version for comparison.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from probkin.dpk import StopReason, StopRule, jeffrey_update
from probkin.errors import (
    BudgetExceeded,
    EnvelopeBoundViolation,
    InvalidMeasure,
    InvalidWitness,
    NullConditioner,
    NullEnvelope,
    PriorNullBlock,
    ProbKinError,
    ShapeMismatch,
    SpaceMismatch,
)
from probkin.measure import (
    CMP_TOL,
    MASS_TOL,
    MAX_ENUM_ATOMS,
    Event,
    ProbMeasure,
    check_event,
    subset_sums,
    tv_distance,
)
from probkin.observation import (
    ObservationModel,
    Partition,
    PartitionMasses,
    induce_partition,
    is_terminal,
    mechanical_masses,
    refine_partition,
)

log = logging.getLogger(__name__)

MAX_SWEEP_ATOMS = 12
MAX_CORE_LP_ATOMS = 10


@dataclass(frozen=True)
class CredalSet:
    generators: Tuple[ProbMeasure, ...]
    step_tag: int = 0

    def __post_init__(self) -> None:
        gens = tuple(self.generators)
        if not gens:
            raise InvalidMeasure("a credal set needs at least one generator")
        for g in gens[1:]:
            if g.m != gens[0].m:
                raise SpaceMismatch(f"generators live on {gens[0].m} and {g.m} atoms")
        object.__setattr__(self, "generators", gens)

    @property
    def m(self) -> int:
        return self.generators[0].m

    @property
    def k(self) -> int:
        return len(self.generators)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Unique generators stacked row-wise, in first-occurrence order."""
        seen = set()
        rows = []
        for g in self.generators:
            if g.key() not in seen:
                seen.add(g.key())
                rows.append(g.masses)
        return np.vstack(rows)

    @property
    def duplicates(self) -> List[int]:
        """Indices of generators repeating an earlier one."""
        seen = set()
        out = []
        for i, g in enumerate(self.generators):
            if g.key() in seen:
                out.append(i)
            seen.add(g.key())
        return out

    def values(self, A: Event) -> np.ndarray:
        """P(A) for every generator, duplicates included."""
        check_event(A, self.m)
        return np.array([float(g.masses[list(A.indices)].sum()) for g in self.generators])


def _envelope_values(credal: CredalSet, A: Event) -> np.ndarray:
    check_event(A, credal.m)
    if A.is_empty():
        return np.zeros(credal.matrix.shape[0])
    return credal.matrix[:, list(A.indices)].sum(axis=1)


def lower_prob(credal: CredalSet, A: Event) -> float:
    return float(_envelope_values(credal, A).min())


def upper_prob(credal: CredalSet, A: Event) -> float:
    return float(_envelope_values(credal, A).max())


def event_envelopes(credal: CredalSet) -> Tuple[np.ndarray, np.ndarray]:
    """Lower and upper probability of every event, indexed by bitmask."""
    table = subset_sums(credal.matrix)
    return table.min(axis=0), table.max(axis=0)


@dataclass(frozen=True)
class DipkState:
    credal: CredalSet
    partition: Partition

    @property
    def step(self) -> int:
        return self.credal.step_tag


@dataclass
class DipkTrace:
    states: List[DipkState]
    hausdorff_steps: List[float] = field(default_factory=list)
    stop_reason: StopReason = StopReason.EXHAUSTED

    @property
    def final(self) -> DipkState:
        return self.states[-1]

    def hausdorff_to_final(self) -> List[float]:
        last = self.final.credal
        return [hausdorff(s.credal, last) for s in self.states]

    def paired_tv_to_final(self) -> List[float]:
        """Largest TV distance between a generator and its own final update."""
        last = self.final.credal.generators
        return [
            max(tv_distance(g, h) for g, h in zip(s.credal.generators, last))
            for s in self.states
        ]


def update_generators(
    credal: CredalSet, partition: Partition, masses: PartitionMasses
) -> CredalSet:
    updated = []
    for i, g in enumerate(credal.generators):
        try:
            updated.append(jeffrey_update(g, partition, masses))
        except PriorNullBlock as e:
            raise PriorNullBlock(str(e), cell=e.cell, generator=i) from e
    return CredalSet(tuple(updated), step_tag=credal.step_tag + 1)


def initial_dipk_state(credal: CredalSet, model: ObservationModel) -> DipkState:
    if credal.m != model.m:
        raise ShapeMismatch(f"credal set has {credal.m} atoms, model {model.m}")
    return DipkState(credal=credal, partition=induce_partition(model, []))


def dipk_step(state: DipkState, model: ObservationModel, new_symbols: Sequence[str]) -> DipkState:
    partition = refine_partition(state.partition, model, new_symbols)
    if partition is state.partition:
        same = CredalSet(state.credal.generators, step_tag=state.step + 1)
        return DipkState(credal=same, partition=partition)
    masses = mechanical_masses(model, partition)
    return DipkState(credal=update_generators(state.credal, partition, masses), partition=partition)


def dipk_run(
    credal: CredalSet,
    model: ObservationModel,
    schedule: Sequence[Sequence[str]],
    stop: Optional[StopRule] = None,
) -> DipkTrace:
    stop = stop or StopRule()
    state = initial_dipk_state(credal, model)
    trace = DipkTrace(states=[state])
    budget = stop.budget_for(model)
    if is_terminal(state.partition):
        trace.stop_reason = StopReason.TERMINAL
        return trace
    for batch in schedule:
        if state.step >= budget:
            trace.stop_reason = StopReason.BUDGET
            break
        nxt = dipk_step(state, model, batch)
        refined = nxt.partition is not state.partition
        d = hausdorff(state.credal, nxt.credal)
        trace.states.append(nxt)
        trace.hausdorff_steps.append(d)
        state = nxt
        log.debug("dipk step %d: observed %s, hausdorff step %.3g", state.step, list(batch), d)
        if is_terminal(state.partition):
            trace.stop_reason = StopReason.TERMINAL
            break
        if refined and model.tail is not None and d < stop.tolerance:
            trace.stop_reason = StopReason.TOLERANCE
            break
    else:
        trace.stop_reason = StopReason.EXHAUSTED
    return trace


# Conditional envelopes


class ConditioningRule(str, Enum):
    GENERALIZED_BAYES = "generalized_bayes"
    GEOMETRIC = "geometric"


@dataclass(frozen=True)
class ConditionalBounds:
    lower: float
    upper: float
    rule: ConditioningRule

    def __post_init__(self) -> None:
        for v in (self.lower, self.upper):
            if v < -CMP_TOL or v > 1.0 + CMP_TOL:
                raise EnvelopeBoundViolation(f"{self.rule.value} bound {v!r} outside [0, 1]")


def gen_bayes_bounds(credal: CredalSet, A: Event, E: Event) -> ConditionalBounds:
    check_event(A, credal.m)
    if E.is_empty():
        return ConditionalBounds(0.0, 0.0, ConditioningRule.GENERALIZED_BAYES)
    pe = credal.values(E)
    null = np.flatnonzero(pe <= 0.0)
    if null.size:
        raise NullConditioner(f"P({E!r}) = 0", generator=int(null[0]))
    ratios = credal.values(A & E) / pe
    return ConditionalBounds(
        float(ratios.min()), float(ratios.max()), ConditioningRule.GENERALIZED_BAYES
    )


def geometric_bounds(credal: CredalSet, A: Event, E: Event) -> ConditionalBounds:
    check_event(A, credal.m)
    if E.is_empty():
        raise NullEnvelope("geometric conditioning on the empty event")
    low_e = lower_prob(credal, E)
    if low_e <= 0.0:
        raise NullEnvelope(f"lower probability of {E!r} is 0")
    lower = lower_prob(credal, A & E) / low_e
    upper = upper_prob(credal, A & E) / upper_prob(credal, E)
    return ConditionalBounds(lower, upper, ConditioningRule.GEOMETRIC)


def _check_masses(partition: Partition, masses: PartitionMasses) -> None:
    if len(masses.block_masses) != len(partition.blocks):
        raise ShapeMismatch(
            f"{len(masses.block_masses)} block masses for {len(partition.blocks)} blocks"
        )


def _weighted_sum(
    credal: CredalSet, partition: Partition, masses: PartitionMasses, A: Event, rule, upper: bool
) -> float:
    _check_masses(partition, masses)
    total = 0.0
    for cell, w in zip(partition.cells, masses.cell_masses):
        if cell.is_empty():
            continue
        b = rule(credal, A, cell)
        total += (b.upper if upper else b.lower) * w
    return total


def jeffrey_lower_bound(
    credal: CredalSet, partition: Partition, masses: PartitionMasses, A: Event
) -> float:
    """Lower bound on the updated lower probability of A, without updating."""
    return _weighted_sum(credal, partition, masses, A, gen_bayes_bounds, upper=False)


def jeffrey_upper_bound(
    credal: CredalSet, partition: Partition, masses: PartitionMasses, A: Event
) -> float:
    return _weighted_sum(credal, partition, masses, A, gen_bayes_bounds, upper=True)


def jeffrey_bound_table(
    credal: CredalSet, partition: Partition, masses: PartitionMasses
) -> Tuple[np.ndarray, np.ndarray]:
    """jeffrey_lower_bound and jeffrey_upper_bound for every event, by bitmask."""
    _check_masses(partition, masses)
    n_events = 1 << credal.m
    lower = np.zeros(n_events)
    upper = np.zeros(n_events)
    for cell, w in zip(partition.cells, masses.cell_masses):
        if cell.is_empty():
            continue
        idx = list(cell.indices)
        pe = credal.matrix[:, idx].sum(axis=1)
        null = np.flatnonzero(pe <= 0.0)
        if null.size:
            raise NullConditioner(f"P({cell!r}) = 0", generator=int(null[0]))
        cond = np.zeros_like(credal.matrix)
        cond[:, idx] = credal.matrix[:, idx] / pe[:, None]
        table = subset_sums(cond)
        lower += w * table.min(axis=0)
        upper += w * table.max(axis=0)
    return lower, upper


@dataclass(frozen=True)
class GeometricBounds:
    lower: float
    upper: float
    assumption_held: bool


def _ratios_stationary(
    before: CredalSet, after: CredalSet, cell: Event, events: Sequence[Event]
) -> bool:
    low_e0, up_e0 = lower_prob(before, cell), upper_prob(before, cell)
    low_e1, up_e1 = lower_prob(after, cell), upper_prob(after, cell)
    for B in events:
        inter = B & cell
        if abs(lower_prob(after, inter) / low_e1 - lower_prob(before, inter) / low_e0) > MASS_TOL:
            return False
        if abs(upper_prob(after, inter) / up_e1 - upper_prob(before, inter) / up_e0) > MASS_TOL:
            return False
    return True


def _ratios_stationary_table(before: CredalSet, after: CredalSet, cell: Event) -> bool:
    low0, up0 = event_envelopes(before)
    low1, up1 = event_envelopes(after)
    e = cell.bits()
    inter = np.arange(1 << before.m) & e
    ok_low = np.abs(low1[inter] / low1[e] - low0[inter] / low0[e]) <= MASS_TOL
    ok_up = np.abs(up1[inter] / up1[e] - up0[inter] / up0[e]) <= MASS_TOL
    return bool(ok_low.all() and ok_up.all())


def geometric_jeffrey_bounds(
    credal: CredalSet,
    partition: Partition,
    masses: PartitionMasses,
    A: Event,
    extra_events: Sequence[Event] = (),
) -> GeometricBounds:
    """Geometric-rule analogues of the Jeffrey bounds plus the stationarity flag.

    The flag records whether lower and upper conditional ratios on every
    charged cell survive the actual update, over all events when m <= 12 and
    over A plus ``extra_events`` otherwise. The sums bound the updated
    envelopes only when it holds.
    """
    lower = _weighted_sum(credal, partition, masses, A, geometric_bounds, upper=False)
    upper = _weighted_sum(credal, partition, masses, A, geometric_bounds, upper=True)
    after = update_generators(credal, partition, masses)
    held = True
    for cell, w in zip(partition.cells, masses.cell_masses):
        if cell.is_empty() or w <= 0.0:
            continue
        if credal.m <= MAX_SWEEP_ATOMS:
            held = _ratios_stationary_table(credal, after, cell)
        else:
            held = _ratios_stationary(credal, after, cell, [A, *extra_events])
        if not held:
            break
    return GeometricBounds(lower=lower, upper=upper, assumption_held=held)


def hausdorff(a: CredalSet, b: CredalSet) -> float:
    if a.m != b.m:
        raise SpaceMismatch(f"credal sets live on {a.m} and {b.m} atoms")
    d = 0.5 * np.abs(a.matrix[:, None, :] - b.matrix[None, :, :]).sum(axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# Behaviour of updated sets


class Behavior(str, Enum):
    SURE_LOSS = "sure_loss"
    STRICTLY_CONTRACTS = "strictly_contracts"
    CONTRACTS = "contracts"
    STRICTLY_DILATES = "strictly_dilates"
    DILATES = "dilates"
    NONE = "none"


class Guarantee(str, Enum):
    GUARANTEED = "guaranteed"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class BehaviorReport:
    event: Event
    classification: Behavior
    lower_before: float
    lower_after: float
    upper_before: float
    upper_after: float

    @property
    def contracts(self) -> bool:
        return (
            self.lower_after >= self.lower_before - CMP_TOL
            and self.upper_after <= self.upper_before + CMP_TOL
        )

    @property
    def dilates(self) -> bool:
        return (
            self.lower_after <= self.lower_before + CMP_TOL
            and self.upper_after >= self.upper_before - CMP_TOL
        )

    @property
    def sure_loss(self) -> bool:
        return (
            self.lower_after > self.upper_before + CMP_TOL
            or self.upper_after < self.lower_before - CMP_TOL
        )


def _classify(lb: float, ub: float, la: float, ua: float) -> Behavior:
    if la > ub + CMP_TOL or ua < lb - CMP_TOL:
        return Behavior.SURE_LOSS
    if la > lb + CMP_TOL and ua < ub - CMP_TOL:
        return Behavior.STRICTLY_CONTRACTS
    if la >= lb - CMP_TOL and ua <= ub + CMP_TOL:
        return Behavior.CONTRACTS
    if la < lb - CMP_TOL and ua > ub + CMP_TOL:
        return Behavior.STRICTLY_DILATES
    if la <= lb + CMP_TOL and ua >= ub - CMP_TOL:
        return Behavior.DILATES
    return Behavior.NONE


def classify_behavior(prev: CredalSet, next: CredalSet, A: Event) -> BehaviorReport:
    if prev.m != next.m:
        raise SpaceMismatch(f"credal sets live on {prev.m} and {next.m} atoms")
    lb, ub = lower_prob(prev, A), upper_prob(prev, A)
    la, ua = lower_prob(next, A), upper_prob(next, A)
    return BehaviorReport(
        event=A,
        classification=_classify(lb, ub, la, ua),
        lower_before=lb,
        lower_after=la,
        upper_before=ub,
        upper_after=ua,
    )


def classify_sweep(prev: CredalSet, next: CredalSet) -> Dict[str, int]:
    """Classification counts over every event of the space."""
    if prev.m > MAX_SWEEP_ATOMS:
        raise BudgetExceeded(f"sweep needs m <= {MAX_SWEEP_ATOMS}, got {prev.m}")
    lb, ub = event_envelopes(prev)
    la, ua = event_envelopes(next)
    counts = {b.value: 0 for b in Behavior}
    for row in zip(lb, ub, la, ua):
        counts[_classify(*row).value] += 1
    return counts


def sufficient_contraction(
    prev: CredalSet, partition: Partition, masses: PartitionMasses, A: Event
) -> Guarantee:
    lo = jeffrey_lower_bound(prev, partition, masses, A)
    hi = jeffrey_upper_bound(prev, partition, masses, A)
    if lo >= lower_prob(prev, A) and hi <= upper_prob(prev, A):
        return Guarantee.GUARANTEED
    return Guarantee.UNKNOWN


def sufficient_sure_loss(
    prev: CredalSet, partition: Partition, masses: PartitionMasses, A: Event
) -> Guarantee:
    lo = jeffrey_lower_bound(prev, partition, masses, A)
    hi = jeffrey_upper_bound(prev, partition, masses, A)
    if lo > upper_prob(prev, A) + CMP_TOL or hi < lower_prob(prev, A) - CMP_TOL:
        return Guarantee.GUARANTEED
    return Guarantee.UNKNOWN


def _witness_values(credal: CredalSet, A: Event, *indices: int) -> List[float]:
    values = credal.values(A)
    for i in indices:
        if not 0 <= i < credal.k:
            raise InvalidWitness(f"generator index {i} out of range for {credal.k} generators")
    return [float(values[i]) for i in indices]


def dilation_witness(
    prev: CredalSet, next: CredalSet, A: Event, s_index: int, k_index: int
) -> bool:
    """Witnesses s, k index the updated set."""
    p_s, p_k = _witness_values(next, A, s_index, k_index)
    return lower_prob(prev, A) >= p_s and upper_prob(prev, A) <= p_k


def contraction_witness(
    prev: CredalSet, next: CredalSet, A: Event, s_index: int, k_index: int
) -> bool:
    """Witnesses s, k index the previous set."""
    p_s, p_k = _witness_values(prev, A, s_index, k_index)
    return lower_prob(next, A) >= p_k and upper_prob(next, A) <= p_s


def best_witnesses(prev: CredalSet, next: CredalSet, A: Event) -> Tuple[int, int, int, int]:
    """(dilation s, dilation k, contraction s, contraction k) most likely to pass."""
    after = next.values(A)
    before = prev.values(A)
    return (
        int(after.argmin()),
        int(after.argmax()),
        int(before.argmax()),
        int(before.argmin()),
    )


# Core checks


def core_membership(
    credal: CredalSet,
    candidate: ProbMeasure,
    event_budget: Optional[int] = None,
    seed: int = 0,
) -> bool:
    if candidate.m != credal.m:
        raise SpaceMismatch(f"candidate has {candidate.m} atoms, credal set {credal.m}")
    if event_budget is None:
        if credal.m > MAX_ENUM_ATOMS:
            raise BudgetExceeded(
                f"{credal.m} atoms needs an event budget (limit {MAX_ENUM_ATOMS})"
            )
        lower, _ = event_envelopes(credal)
        return bool(np.all(subset_sums(candidate.masses) >= lower - CMP_TOL))
    rng = np.random.default_rng(seed)
    masks = rng.random((event_budget, credal.m)) < 0.5
    lower = (masks[:, None, :] * credal.matrix[None, :, :]).sum(axis=2).min(axis=1)
    return bool(np.all(masks @ candidate.masses >= lower - CMP_TOL))


def core_gen_bayes_bounds(credal: CredalSet, A: Event, E: Event) -> ConditionalBounds:
    """Generalized-Bayes conditional envelope over the whole core, by linear programming.

    Charnes-Cooper: with y = t p and t = 1 / p(E) the ratio p(A & E) / p(E)
    becomes the linear objective y(A & E) under y(E) = 1.
    """
    m = credal.m
    if m > MAX_CORE_LP_ATOMS:
        raise BudgetExceeded(f"core LP needs m <= {MAX_CORE_LP_ATOMS}, got {m}")
    check_event(A, m)
    if E.is_empty():
        return ConditionalBounds(0.0, 0.0, ConditioningRule.GENERALIZED_BAYES)
    if lower_prob(credal, E) <= 0.0:
        raise NullEnvelope(f"lower probability of {E!r} is 0, core ratio unbounded")
    lower_table, _ = event_envelopes(credal)
    bits = np.arange(1 << m)
    events = ((bits[:, None] >> np.arange(m)) & 1).astype(np.float64)
    a_ub = np.hstack([-events, lower_table[:, None]])
    b_ub = np.zeros(1 << m)
    a_eq = np.vstack(
        [
            np.append(E.mask(m).astype(np.float64), 0.0),
            np.append(np.ones(m), -1.0),
        ]
    )
    b_eq = np.array([1.0, 0.0])
    c = np.append((A & E).mask(m).astype(np.float64), 0.0)
    values = []
    for sign in (1.0, -1.0):
        res = linprog(sign * c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                      bounds=(0, None), method="highs")
        if not res.success:
            raise ProbKinError(f"core LP failed: {res.message}")
        values.append(sign * float(res.fun))
    lo, hi = min(max(values[0], 0.0), 1.0), min(max(values[1], 0.0), 1.0)
    return ConditionalBounds(lo, hi, ConditioningRule.GENERALIZED_BAYES)


def core_gap(credal: CredalSet, A: Event, E: Event) -> Tuple[float, float]:
    """How much looser the core envelope is than the generator envelope, per side."""
    gen = gen_bayes_bounds(credal, A, E)
    core = core_gen_bayes_bounds(credal, A, E)
    return gen.lower - core.lower, core.upper - gen.upper
