"""Random instance generators shared by the test modules."""

from typing import List, Optional

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra import numpy as npst

from probkin.dipk import CredalSet
from probkin.measure import Event, ProbMeasure
from probkin.observation import ObservationModel


def random_measure(rng: np.random.Generator, m: int) -> ProbMeasure:
    return ProbMeasure(rng.dirichlet(np.ones(m)))


def random_credal(rng: np.random.Generator, m: int, k: int) -> CredalSet:
    return CredalSet(tuple(random_measure(rng, m) for _ in range(k)))


def random_model(
    rng: np.random.Generator, m: int, n_symbols: int, tail: bool = False
) -> ObservationModel:
    """Covering model: every atom lies in exactly one preimage."""
    owner = np.empty(m, dtype=int)
    perm = rng.permutation(m)
    owner[perm[:n_symbols]] = np.arange(n_symbols)
    owner[perm[n_symbols:]] = rng.integers(0, n_symbols, size=m - n_symbols)
    symbols = tuple(f"x{i}" for i in range(n_symbols))
    preimages = tuple(Event.of(np.flatnonzero(owner == i).tolist()) for i in range(n_symbols))
    return ObservationModel(
        symbols=symbols,
        pmf=tuple(rng.dirichlet(np.ones(n_symbols))),
        preimages=preimages,
        m=m,
        tail=symbols[-1] if tail else None,
    )


def random_schedule(
    rng: np.random.Generator, symbols: List[str], max_batch: Optional[int] = None
) -> List[List[str]]:
    order = [symbols[i] for i in rng.permutation(len(symbols))]
    batches = []
    while order:
        size = int(rng.integers(1, (max_batch or len(order)) + 1))
        batches.append(order[:size])
        order = order[size:]
    return batches


def conditional_sharing_credal(rng: np.random.Generator, cells: List[Event], m: int, k: int):
    """Generators that differ only in how much mass each cell gets."""
    within = np.zeros(m)
    for cell in cells:
        idx = list(cell)
        within[idx] = rng.dirichlet(np.ones(len(idx)))
    gens = []
    for _ in range(k):
        weights = rng.dirichlet(np.ones(len(cells)))
        masses = np.zeros(m)
        for w, cell in zip(weights, cells):
            idx = list(cell)
            masses[idx] = w * within[idx]
        gens.append(ProbMeasure(masses))
    return CredalSet(tuple(gens))


@st.composite
def mass_vectors(draw, min_size=2, max_size=8):
    size = draw(st.integers(min_value=min_size, max_value=max_size))
    values = draw(
        npst.arrays(
            dtype=np.float64,
            shape=(size,),
            elements=st.floats(min_value=0.01, max_value=1e3, allow_nan=False),
        )
    )
    return values / values.sum()


@st.composite
def measure_pairs(draw, min_size=2, max_size=8):
    size = draw(st.integers(min_value=min_size, max_value=max_size))
    a = draw(mass_vectors(min_size=size, max_size=size))
    b = draw(mass_vectors(min_size=size, max_size=size))
    return ProbMeasure(a), ProbMeasure(b)


def geometric_tail_model(k: int) -> ObservationModel:
    """Symbols s0..s{k-1} with pmf 2^-(i+1); the tail symbol keeps the last 2^-k."""
    symbols = tuple(f"s{i}" for i in range(k)) + ("tail",)
    pmf = tuple(2.0 ** -(i + 1) for i in range(k)) + (2.0**-k,)
    preimages = tuple(Event((i,)) for i in range(k + 1))
    return ObservationModel(symbols=symbols, pmf=pmf, preimages=preimages, m=k + 1, tail="tail")
