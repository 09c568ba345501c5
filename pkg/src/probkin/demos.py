"""Built-in sessions: a binomial observation model, an order-dependence example
and a three-questionnaire survey with coarsening."""

import logging
from fractions import Fraction
from typing import Callable, Dict, List

import numpy as np
from scipy.stats import binom

from probkin.config import SessionConfig
from probkin.dpk import dpk_run
from probkin.errors import ProbKinError
from probkin.measure import Event, ProbMeasure, StateSpace, prob, product_measure
from probkin.observation import ObservationModel, mechanical_masses
from probkin.report import RunReport, rnd, run_dpk
from probkin.survey import coarse_run, product_observation_model

log = logging.getLogger(__name__)


def binomial_config(n: int = 10, p: float = 0.8) -> SessionConfig:
    """Flat prior over 0..n; the symbol k points at atom k with pmf Binomial(n, p)."""
    atoms = tuple(str(k) for k in range(n + 1))
    return SessionConfig(
        atoms=atoms,
        symbols=atoms,
        pmf=tuple(float(x) for x in binom(n, p).pmf(np.arange(n + 1))),
        preimages=tuple((a,) for a in atoms),
        prior=tuple([1.0 / (n + 1)] * (n + 1)),
        events=(("observed", ("3", "5", "7")),),
    )


def binomial_example(seed: int = 0) -> RunReport:
    config = binomial_config()
    stream = [["3", "5", "7"]]
    report = run_dpk(config, stream, seed=seed)
    model = config.model()
    partition = dpk_run(config.prior_measure(), model, stream, config.stop_rule()).final.partition
    masses = mechanical_masses(model, partition)
    report.command = "demo binomial-example"
    report.summary = {
        "block_masses": {s: rnd(x) for s, x in zip(partition.observed, masses.block_masses)},
        "remainder_mass": rnd(masses.remainder_mass),
        "rounded": [round(float(x), 5) for x in masses.cell_masses],
        "posterior": report.records[-1].masses,
    }
    return report


NONCOMMUTATIVE_ATOMS = ("[0,1/8)", "[1/8,1/4)", "[1/4,3/4)", "[3/4,1]")


def noncommutativity_config() -> SessionConfig:
    """Lebesgue measure on [0, 1], discretised to the four intervals the symbols pick out."""
    return SessionConfig(
        atoms=NONCOMMUTATIVE_ATOMS,
        symbols=("1", "2", "3", "4"),
        pmf=(1 / 6, 1 / 3, 1 / 8, 3 / 8),
        preimages=tuple((a,) for a in NONCOMMUTATIVE_ATOMS),
        prior=(1 / 8, 1 / 8, 1 / 2, 1 / 4),
        events=(("A", ("[1/4,3/4)",)), ("B", ("[1/8,1/4)",))),
    )


def noncommutativity(seed: int = 0) -> RunReport:
    config = noncommutativity_config()
    model, prior = config.model(), config.prior_measure()
    events = config.event_map()
    A, B = events["A"], events["B"]
    forward = dpk_run(prior, model, [["1"], ["2", "3", "4"]])
    swapped = dpk_run(prior, model, [["3"], ["1", "2", "4"]])
    first, first_swapped = forward.states[1].measure, swapped.states[1].measure
    summary = {
        "B_prior": rnd(prob(prior, B)),
        "B_after_first": rnd(prob(first, B)),
        "A_after_first": rnd(prob(first, A)),
        "A_after_first_swapped": rnd(prob(first_swapped, A)),
        "A_limit": rnd(prob(forward.limit, A)),
        "A_limit_swapped": rnd(prob(swapped.limit, A)),
        "limits_agree": bool(np.allclose(forward.limit.masses, swapped.limit.masses, atol=1e-12)),
        "exact": {
            "B_after_first": str(Fraction(5, 42)),
            "A_after_first": str(Fraction(10, 21)),
            "A_limit": str(Fraction(1, 8)),
        },
    }
    report = run_dpk(config, [["1"], ["2", "3", "4"]], seed=seed)
    report.command = "demo noncommutativity"
    report.summary = summary
    return report


AGE_ATOMS = ("0-9", "10-17", "18-20", "21-29", "30-44", "45-54", "55-64", "65-79", "80+")
AGE_BINS = {"1": (0, 1), "2": (2,), "3": (3, 4), "4": (5, 6), "5": (7, 8)}
RACES = ("W", "B", "A", "O")

# synthetic: no numbers are given for the survey population
AGE_PRIOR = (0.12, 0.11, 0.04, 0.13, 0.17, 0.14, 0.12, 0.11, 0.06)
RACE_PRIOR = (0.55, 0.15, 0.10, 0.20)
AGE_Q = (0.22, 0.05, 0.30, 0.25, 0.18)
RACE_Q = (0.60, 0.13, 0.07, 0.20)


def survey_model() -> ObservationModel:
    ages = ObservationModel(
        symbols=tuple(AGE_BINS),
        pmf=AGE_Q,
        preimages=tuple(Event.of(idx) for idx in AGE_BINS.values()),
        m=len(AGE_ATOMS),
    )
    races = ObservationModel(
        symbols=RACES,
        pmf=RACE_Q,
        preimages=tuple(Event.of((i,)) for i in range(len(RACES))),
        m=len(RACES),
    )
    return product_observation_model(ages, races, np.outer(AGE_Q, RACE_Q))


def survey_stages() -> List[tuple]:
    """(batch, coarsening groups) for the three questionnaires."""
    first = [f"{a}:{r}" for a in ("1", "5") for r in RACES]
    second = [f"{a}:{r}" for a in ("2", "3", "4") for r in RACES]
    by_three_ages = [[f"{a}:{r}" for r in RACES] for a in ("1", "5")]
    by_five_ages = [[f"{a}:{r}" for r in RACES] for a in AGE_BINS]
    return [(first, by_three_ages), (second, by_five_ages), ([], None)]


def survey_config() -> SessionConfig:
    model = survey_model()
    space = StateSpace(tuple(f"{a}/{r}" for a in AGE_ATOMS for r in RACES))
    prior = product_measure(ProbMeasure(AGE_PRIOR), ProbMeasure(RACE_PRIOR))
    stages = survey_stages()
    return SessionConfig(
        atoms=space.labels,
        symbols=model.symbols,
        pmf=model.pmf,
        preimages=tuple(tuple(space.labels_of(p)) for p in model.preimages),
        prior=tuple(float(x) for x in prior.masses),
        events=(
            ("under_18", tuple(f"{a}/{r}" for a in AGE_ATOMS[:2] for r in RACES)),
            ("white_21_44", ("21-29/W", "30-44/W")),
        ),
        coarsening=tuple(
            None if groups is None else tuple(tuple(g) for g in groups)
            for _, groups in stages
        ),
    )


def survey(seed: int = 0) -> RunReport:
    config = survey_config()
    stages = survey_stages()
    schedule = [batch for batch, _ in stages]
    runs = coarse_run(
        config.prior_measure(), config.model(), schedule, [g for _, g in stages]
    ).stages
    agreement = []
    for st in runs:
        gap = max(
            abs(prob(st.coarse, cell) - prob(st.fine, cell))
            for cell in st.coarse_partition.cells
        )
        agreement.append(
            {
                "step": st.step,
                "coarse_blocks": len(st.coarse_partition.blocks),
                "max_block_gap": rnd(gap),
                "tv_to_fine": rnd(st.tv),
            }
        )
    report = run_dpk(config, schedule, seed=seed)
    report.command = "demo survey"
    report.summary = {"synthetic_q": True, "stages": agreement}
    return report


DEMOS: Dict[str, Callable[[int], RunReport]] = {
    "binomial-example": binomial_example,
    "noncommutativity": noncommutativity,
    "survey": survey,
}


def demo(name: str, seed: int = 0) -> RunReport:
    try:
        run = DEMOS[name]
    except KeyError:
        raise ProbKinError(f"unknown demo {name!r}; choose from {sorted(DEMOS)}") from None
    log.debug("running demo %s", name)
    return run(seed)
