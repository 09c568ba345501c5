"""Finite state spaces, events and probability measures.

The sigma-algebra is the power set of a finite atom set, so every event is a
set of atom indices and every measure is a dense mass vector.
"""

from dataclasses import dataclass
from typing import Iterable, Iterator, List, Sequence, Tuple

import numpy as np

from probkin.errors import (
    BudgetExceeded,
    InvalidEvent,
    InvalidMeasure,
    InvalidWeights,
    NullNonemptyConditioner,
    SpaceMismatch,
)

MASS_TOL = 1e-9
CMP_TOL = 1e-12
MAX_ENUM_ATOMS = 20


@dataclass(frozen=True)
class Event:
    indices: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        canon = tuple(sorted({int(i) for i in self.indices}))
        if any(i < 0 for i in canon):
            raise InvalidEvent(f"negative atom index in {canon}")
        object.__setattr__(self, "indices", canon)

    @classmethod
    def of(cls, indices: Iterable[int]) -> "Event":
        return cls(tuple(indices))

    @classmethod
    def full(cls, m: int) -> "Event":
        return cls(tuple(range(m)))

    @classmethod
    def from_mask(cls, bits: int, m: int) -> "Event":
        return cls(tuple(i for i in range(m) if bits >> i & 1))

    def bits(self) -> int:
        out = 0
        for i in self.indices:
            out |= 1 << i
        return out

    def mask(self, m: int) -> np.ndarray:
        check_event(self, m)
        out = np.zeros(m, dtype=bool)
        out[list(self.indices)] = True
        return out

    def complement(self, m: int) -> "Event":
        check_event(self, m)
        inside = set(self.indices)
        return Event(tuple(i for i in range(m) if i not in inside))

    def is_empty(self) -> bool:
        return not self.indices

    def issubset(self, other: "Event") -> bool:
        return set(self.indices) <= set(other.indices)

    def isdisjoint(self, other: "Event") -> bool:
        return set(self.indices).isdisjoint(other.indices)

    def __and__(self, other: "Event") -> "Event":
        return Event(tuple(set(self.indices) & set(other.indices)))

    def __or__(self, other: "Event") -> "Event":
        return Event(self.indices + other.indices)

    def __sub__(self, other: "Event") -> "Event":
        return Event(tuple(set(self.indices) - set(other.indices)))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __repr__(self) -> str:
        return "Event{" + ",".join(str(i) for i in self.indices) + "}"


def check_event(A: Event, m: int) -> None:
    if A.indices and A.indices[-1] >= m:
        raise InvalidEvent(f"atom index {A.indices[-1]} out of range for {m} atoms")


def all_events(m: int) -> Iterator[Event]:
    """Every event of an m-atom space, in bitmask order (bit i is atom i)."""
    if m > MAX_ENUM_ATOMS:
        raise BudgetExceeded(f"{m} atoms exceeds enumeration budget of {MAX_ENUM_ATOMS}")
    for bits in range(1 << m):
        yield Event.from_mask(bits, m)


@dataclass(frozen=True)
class StateSpace:
    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            raise InvalidEvent("state space needs at least one atom")
        if len(set(labels)) != len(labels):
            raise InvalidEvent("atom labels must be distinct")
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidEvent(f"unknown atom label {label!r}") from None

    def event(self, labels: Iterable[str]) -> Event:
        return Event(tuple(self.index(x) for x in labels))

    def labels_of(self, A: Event) -> List[str]:
        check_event(A, self.m)
        return [self.labels[i] for i in A]


class ProbMeasure:
    """Nonnegative mass vector summing to one. Immutable."""

    __slots__ = ("_masses",)

    def __init__(self, masses: Iterable[float]) -> None:
        arr = np.array(masses, dtype=np.float64).ravel()
        if arr.size == 0:
            raise InvalidMeasure("measure needs at least one atom")
        if not np.all(np.isfinite(arr)):
            raise InvalidMeasure("masses must be finite")
        if np.any(arr < 0):
            raise InvalidMeasure(f"negative mass {arr.min()!r}")
        total = float(arr.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidMeasure(f"masses sum to {total!r}, not 1")
        arr.setflags(write=False)
        self._masses = arr

    @property
    def masses(self) -> np.ndarray:
        return self._masses

    @property
    def m(self) -> int:
        return int(self._masses.size)

    def key(self) -> Tuple[float, ...]:
        return tuple(self._masses.tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProbMeasure):
            return NotImplemented
        return self.m == other.m and bool(np.array_equal(self._masses, other._masses))

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"ProbMeasure({np.array2string(self._masses, precision=6)})"


def uniform(m: int) -> ProbMeasure:
    return ProbMeasure(np.full(m, 1.0 / m))


def point_mass(m: int, i: int) -> ProbMeasure:
    masses = np.zeros(m)
    masses[i] = 1.0
    return ProbMeasure(masses)


def same_space(P: ProbMeasure, Q: ProbMeasure) -> None:
    if P.m != Q.m:
        raise SpaceMismatch(f"measures live on {P.m} and {Q.m} atoms")


def prob(P: ProbMeasure, A: Event) -> float:
    check_event(A, P.m)
    if A.is_empty():
        return 0.0
    return float(P.masses[list(A.indices)].sum())


def condition(P: ProbMeasure, E: Event) -> np.ndarray:
    """Mass vector of P(. | E); all zeros when E is empty."""
    check_event(E, P.m)
    out = np.zeros(P.m)
    if E.is_empty():
        return out
    idx = list(E.indices)
    pe = float(P.masses[idx].sum())
    if pe <= 0.0:
        raise NullNonemptyConditioner(f"P({E!r}) = 0 for a nonempty conditioner")
    out[idx] = P.masses[idx] / pe
    return out


def cond_prob(P: ProbMeasure, A: Event, E: Event) -> float:
    check_event(A, P.m)
    if E.is_empty():
        return 0.0
    pe = prob(P, E)
    if pe <= 0.0:
        raise NullNonemptyConditioner(f"P({E!r}) = 0 for a nonempty conditioner")
    return prob(P, A & E) / pe


def tv_distance(P: ProbMeasure, Q: ProbMeasure) -> float:
    same_space(P, Q)
    return 0.5 * float(np.abs(P.masses - Q.masses).sum())


def subset_sums(values: np.ndarray) -> np.ndarray:
    """Sum of ``values`` over every event, indexed by bitmask (bit i is atom i).

    Works on the last axis, so a (k, m) array gives a (k, 2**m) table.
    """
    values = np.asarray(values, dtype=np.float64)
    m = values.shape[-1]
    if m > MAX_ENUM_ATOMS:
        raise BudgetExceeded(f"{m} atoms exceeds enumeration budget of {MAX_ENUM_ATOMS}")
    sums = np.zeros(values.shape[:-1] + (1,))
    for i in range(m):
        sums = np.concatenate([sums, sums + values[..., i : i + 1]], axis=-1)
    return sums


def tv_distance_bruteforce(P: ProbMeasure, Q: ProbMeasure) -> float:
    same_space(P, Q)
    return float(np.abs(subset_sums(P.masses - Q.masses)).max())


def convex_combine(weights: Sequence[float], measures: Sequence[ProbMeasure]) -> ProbMeasure:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(measures),) or not measures:
        raise InvalidWeights(f"{w.size} weights for {len(measures)} measures")
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > MASS_TOL:
        raise InvalidWeights(f"weights must be nonnegative and sum to 1, got {w.tolist()}")
    for other in measures[1:]:
        same_space(measures[0], other)
    stacked = np.vstack([mu.masses for mu in measures])
    return ProbMeasure(w @ stacked)


def product_measure(P1: ProbMeasure, P2: ProbMeasure) -> ProbMeasure:
    """Product measure on the grid; atom (i, j) has index i * P2.m + j."""
    return ProbMeasure(np.outer(P1.masses, P2.masses).ravel())
