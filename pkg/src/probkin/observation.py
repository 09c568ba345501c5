"""Observation models and the partitions their observations induce.

Each observed symbol carves its preimage out of the remainder block; the
remainder is whatever no observed preimage covers yet.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from probkin.errors import DuplicateObservation, InvalidModel, ModelMismatch, UnknownSymbol
from probkin.measure import MASS_TOL, Event, check_event

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObservationModel:
    symbols: Tuple[str, ...]
    pmf: Tuple[float, ...]
    preimages: Tuple[Event, ...]
    m: int
    tail: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        object.__setattr__(self, "pmf", tuple(float(p) for p in self.pmf))
        object.__setattr__(self, "preimages", tuple(self.preimages))
        if not (len(self.symbols) == len(self.pmf) == len(self.preimages)):
            raise InvalidModel(
                f"{len(self.symbols)} symbols, {len(self.pmf)} pmf values, "
                f"{len(self.preimages)} preimages"
            )
        if self.m < 1:
            raise InvalidModel("state space needs at least one atom")
        if len(set(self.symbols)) != len(self.symbols):
            raise InvalidModel("symbols must be distinct")
        if self.tail is not None and self.tail not in self.symbols:
            raise InvalidModel(f"tail symbol {self.tail!r} is not a model symbol")
        for pre in self.preimages:
            check_event(pre, self.m)

    def position(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise UnknownSymbol(f"unknown symbol {symbol!r}") from None

    def preimage(self, symbol: str) -> Event:
        return self.preimages[self.position(symbol)]

    def mass(self, symbol: str) -> float:
        return self.pmf[self.position(symbol)]

    def covers(self) -> bool:
        covered = set()
        for pre in self.preimages:
            covered.update(pre)
        return len(covered) == self.m


def observable_symbols(model: ObservationModel) -> List[str]:
    return [s for s in model.symbols if s != model.tail]


def validate_model(model: ObservationModel) -> List[str]:
    """Every violated model invariant, as readable messages. Empty means ok."""
    violations: List[str] = []
    for s, p in zip(model.symbols, model.pmf):
        if not p > 0.0:
            violations.append(f"pmf of {s!r} is not positive ({p!r})")
    total = float(np.sum(model.pmf))
    if abs(total - 1.0) > MASS_TOL:
        violations.append(f"pmf sum ≠ 1 ({total!r})")
    for s, pre in zip(model.symbols, model.preimages):
        if pre.is_empty():
            violations.append(f"preimage of {s!r} is empty")
    for i in range(len(model.symbols)):
        for j in range(i + 1, len(model.symbols)):
            if not model.preimages[i].isdisjoint(model.preimages[j]):
                violations.append(
                    f"preimages overlap: {model.symbols[i]!r} and {model.symbols[j]!r}"
                )
    return violations


@dataclass(frozen=True)
class Partition:
    blocks: Tuple[Event, ...]
    remainder: Event
    observed: Tuple[str, ...]
    m: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "observed", tuple(self.observed))
        if len(self.blocks) != len(self.observed):
            raise InvalidModel(f"{len(self.blocks)} blocks for {len(self.observed)} symbols")
        seen: set = set()
        for cell in self.cells:
            check_event(cell, self.m)
            if not seen.isdisjoint(cell):
                raise InvalidModel("partition cells overlap")
            seen.update(cell)
        if len(seen) != self.m:
            raise InvalidModel("partition cells do not cover the state space")
        if any(b.is_empty() for b in self.blocks):
            raise InvalidModel("partition blocks must be nonempty")

    @property
    def cells(self) -> Tuple[Event, ...]:
        """Blocks followed by the remainder."""
        return self.blocks + (self.remainder,)

    def block_of(self, symbol: str) -> Event:
        try:
            return self.blocks[self.observed.index(symbol)]
        except ValueError:
            raise UnknownSymbol(f"symbol {symbol!r} is not observed in this partition") from None


@dataclass(frozen=True)
class PartitionMasses:
    block_masses: Tuple[float, ...]
    remainder_mass: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "block_masses", tuple(float(x) for x in self.block_masses))
        values = self.block_masses + (self.remainder_mass,)
        if any(x < 0 for x in values):
            raise InvalidModel(f"negative partition mass in {values}")
        if abs(sum(values) - 1.0) > MASS_TOL:
            raise InvalidModel(f"partition masses sum to {sum(values)!r}")

    @property
    def cell_masses(self) -> Tuple[float, ...]:
        return self.block_masses + (self.remainder_mass,)


def _dedupe(symbols: Iterable[str]) -> List[str]:
    out: List[str] = []
    for s in symbols:
        if s not in out:
            out.append(s)
    return out


def _check_observable(model: ObservationModel, symbol: str) -> None:
    model.position(symbol)
    if symbol == model.tail:
        raise UnknownSymbol(f"tail symbol {symbol!r} is never observed")


def induce_partition(model: ObservationModel, observed: Sequence[str]) -> Partition:
    symbols = _dedupe(observed)
    for s in symbols:
        _check_observable(model, s)
    blocks = tuple(model.preimage(s) for s in symbols)
    remainder = Event.full(model.m)
    for b in blocks:
        remainder = remainder - b
    return Partition(blocks=blocks, remainder=remainder, observed=tuple(symbols), m=model.m)


def refine_partition(
    partition: Partition, model: ObservationModel, new_symbols: Sequence[str]
) -> Partition:
    symbols = _dedupe(new_symbols)
    for s in symbols:
        _check_observable(model, s)
        if s in partition.observed:
            raise DuplicateObservation(f"symbol {s!r} was already observed")
    if not symbols:
        return partition
    new_blocks = tuple(model.preimage(s) for s in symbols)
    remainder = partition.remainder
    for b in new_blocks:
        if not b.issubset(remainder):
            raise ModelMismatch(f"preimage {b!r} is not inside the remainder {remainder!r}")
        remainder = remainder - b
    log.debug("refined partition with %s, remainder now %d atoms", symbols, len(remainder))
    return Partition(
        blocks=partition.blocks + new_blocks,
        remainder=remainder,
        observed=partition.observed + tuple(symbols),
        m=partition.m,
    )


def is_refinement(fine: Partition, coarse: Partition) -> bool:
    if fine.m != coarse.m:
        return False
    for f in fine.cells:
        if f.is_empty():
            continue
        for c in coarse.cells:
            if not (f.issubset(c) or f.isdisjoint(c)):
                return False
    return True


def is_terminal(partition: Partition) -> bool:
    return partition.remainder.is_empty()


def mechanical_masses(model: ObservationModel, partition: Partition) -> PartitionMasses:
    if partition.m != model.m:
        raise ModelMismatch(f"partition has {partition.m} atoms, model {model.m}")
    block_masses = []
    for s, block in zip(partition.observed, partition.blocks):
        try:
            pre = model.preimage(s)
        except UnknownSymbol:
            raise ModelMismatch(f"partition symbol {s!r} is not in the model") from None
        if pre != block:
            raise ModelMismatch(f"block for {s!r} differs from its preimage")
        block_masses.append(model.mass(s))
    if len(partition.observed) == len(model.symbols):
        remainder_mass = 0.0
    else:
        remainder_mass = max(0.0, 1.0 - float(np.sum(block_masses)))
    return PartitionMasses(block_masses=tuple(block_masses), remainder_mass=remainder_mass)

