import numpy as np
import pytest
from helpers import (
    geometric_tail_model,
    random_credal,
    random_measure,
    random_model,
    random_schedule,
)

from probkin.demos import AGE_BINS, RACES, survey_config, survey_model, survey_stages
from probkin.dipk import CredalSet, dipk_run, initial_dipk_state
from probkin.dpk import StopReason, StopRule, dpk_run, dpk_step, initial_state, jeffrey_update
from probkin.errors import EmptyPreimage, InvalidCoarsening, InvalidModel
from probkin.measure import Event, prob, uniform
from probkin.observation import (
    ObservationModel,
    induce_partition,
    is_terminal,
    mechanical_masses,
    refine_partition,
)
from probkin.survey import (
    CoarseningMap,
    coarse_dipk_run,
    coarse_dipk_step,
    coarse_dpk_step,
    coarse_run,
    coarsen_masses,
    coarsen_partition,
    identity_map,
    product_observation_model,
)


@pytest.fixture
def survey():
    return survey_config()


def stage_one(model):
    first, groups = survey_stages()[0]
    return induce_partition(model, first), groups


def test_survey_model_shape(survey):
    model = survey.model()
    assert model.m == 36
    assert len(model.symbols) == 20
    assert model.symbols[0] == "1:W"
    assert model.preimage("3:A") == Event((3 * 4 + 2, 4 * 4 + 2))
    assert model.mass("2:B") == pytest.approx(0.05 * 0.13)


def test_identity_map_keeps_the_partition(survey):
    model = survey.model()
    fine, _ = stage_one(model)
    cmap = identity_map(fine)
    coarse = coarsen_partition(fine, cmap)
    assert coarse.blocks == fine.blocks
    assert coarse.remainder == fine.remainder
    masses = mechanical_masses(model, fine)
    assert coarsen_masses(masses, cmap) == masses


def test_stage_one_groups_by_age(survey):
    model = survey.model()
    fine, groups = stage_one(model)
    cmap = CoarseningMap.from_symbol_groups(fine, groups)
    assert cmap.labels == ("1:W+1:B+1:A+1:O", "5:W+5:B+5:A+5:O")
    coarse = coarsen_partition(fine, cmap)
    assert len(coarse.cells) == 3
    assert coarse.blocks[0] == Event(tuple(a * 4 + r for a in AGE_BINS["1"] for r in range(4)))
    masses = coarsen_masses(mechanical_masses(model, fine), cmap)
    assert masses.block_masses == pytest.approx((0.22, 0.18), abs=1e-12)
    assert masses.remainder_mass == pytest.approx(0.60, abs=1e-12)


def test_all_blocks_in_one_group(survey):
    model = survey.model()
    fine, _ = stage_one(model)
    cmap = CoarseningMap(groups=(tuple(range(len(fine.blocks))),), labels=("asked",))
    coarse = coarsen_partition(fine, cmap)
    assert len(coarse.cells) == 2
    assert coarse.blocks[0] | coarse.remainder == Event.full(36)


def test_invalid_maps(survey):
    model = survey.model()
    fine, groups = stage_one(model)
    with pytest.raises(InvalidCoarsening):
        CoarseningMap(groups=((0,), (1,)), labels=("a",))
    with pytest.raises(InvalidCoarsening):
        CoarseningMap(groups=((0,), ()), labels=("a", "b"))
    with pytest.raises(InvalidCoarsening):
        coarsen_partition(fine, CoarseningMap(groups=((0, 1), (1,)), labels=("a", "b")))
    with pytest.raises(InvalidCoarsening):
        coarsen_partition(fine, CoarseningMap(groups=((0, 1),), labels=("a",)))
    with pytest.raises(InvalidCoarsening):
        CoarseningMap.from_symbol_groups(fine, [groups[0]])
    with pytest.raises(InvalidCoarsening):
        CoarseningMap.from_symbol_groups(fine, [groups[0] + ["5:W"], groups[1]])


def test_unobserved_symbols_are_dropped_from_groups(survey):
    model = survey.model()
    fine, _ = stage_one(model)
    by_age = [[f"{a}:{r}" for r in RACES] for a in AGE_BINS]
    cmap = CoarseningMap.from_symbol_groups(fine, by_age)
    assert len(cmap.groups) == 2


def test_identity_coarse_step_is_a_plain_step(rng):
    for _ in range(30):
        m = int(rng.integers(2, 8))
        model = random_model(rng, m, int(rng.integers(1, m + 1)))
        prior = random_measure(rng, m)
        batch = random_schedule(rng, list(model.symbols))[0]
        state = initial_state(prior, model)
        plain = dpk_step(state, model, batch)
        fine = refine_partition(state.partition, model, batch)
        coarse = coarse_dpk_step(state, model, identity_map(fine), batch)
        assert np.allclose(coarse.measure.masses, plain.measure.masses, atol=1e-12)
        assert coarse.partition == fine and coarse.step == plain.step


def test_coarse_step_matches_update_on_merged_cells(survey):
    model, prior = survey.model(), survey.prior_measure()
    fine, groups = stage_one(model)
    cmap = CoarseningMap.from_symbol_groups(fine, groups)
    state = coarse_dpk_step(initial_state(prior, model), model, cmap, survey_stages()[0][0])
    expected = jeffrey_update(
        prior, coarsen_partition(fine, cmap), coarsen_masses(mechanical_masses(model, fine), cmap)
    )
    assert state.measure == expected
    assert state.partition == fine


def test_survey_runs_agree_on_coarse_cells_and_in_the_limit(survey):
    stages = survey_stages()
    trace = coarse_run(
        survey.prior_measure(), survey.model(), [b for b, _ in stages], [g for _, g in stages]
    )
    assert trace.stop_reason is StopReason.TERMINAL
    runs = trace.stages
    assert [len(st.coarse_partition.cells) for st in runs] == [3, 6, 21]
    for st in runs:
        for cell in st.coarse_partition.cells:
            assert abs(prob(st.coarse, cell) - prob(st.fine, cell)) < 1e-12
    assert runs[0].tv > 1e-6
    assert is_terminal(runs[-1].fine_partition)
    assert runs[-1].tv < 1e-12


def test_coarse_run_stage_count(survey):
    with pytest.raises(InvalidCoarsening):
        coarse_run(survey.prior_measure(), survey.model(), [["1:W"]], [None, None])


def test_coarse_run_honours_budget(survey):
    stages = survey_stages()
    trace = coarse_run(
        survey.prior_measure(),
        survey.model(),
        [b for b, _ in stages],
        [g for _, g in stages],
        StopRule(budget=1),
    )
    assert trace.stop_reason is StopReason.BUDGET
    assert len(trace.stages) == 1


def test_coarse_run_tolerance_on_tail_model():
    model = geometric_tail_model(24)
    schedule = [[f"s{i}"] for i in range(24)]
    stop = StopRule(tolerance=1e-4)
    trace = coarse_run(uniform(25), model, schedule, [None] * 24, stop)
    plain = dpk_run(uniform(25), model, schedule, stop)
    assert trace.stop_reason is StopReason.TOLERANCE
    assert len(trace.stages) == len(plain.tv_steps) == 14
    assert [st.tv_step for st in trace.stages] == pytest.approx(plain.tv_steps, abs=1e-12)
    idle = coarse_run(uniform(7), geometric_tail_model(6), [[], ["s0"]], [None, None], stop)
    assert idle.stop_reason is StopReason.EXHAUSTED
    assert len(idle.stages) == 2


def test_coarse_dipk_with_identity_maps_matches_dipk(rng):
    m = 6
    model = random_model(rng, m, 3)
    credal = random_credal(rng, m, 3)
    schedule = [["x0"], ["x1", "x2"]]
    plain = dipk_run(credal, model, schedule)
    coarse = coarse_dipk_run(credal, model, schedule, [None, None])
    for a, b in zip(plain.states, coarse):
        for g, h in zip(a.credal.generators, b.credal.generators):
            assert np.allclose(g.masses, h.masses, atol=1e-12)
    with pytest.raises(InvalidCoarsening):
        coarse_dipk_run(credal, model, schedule, [None])


def test_coarse_dipk_step_updates_every_generator(survey):
    model = survey.model()
    prior = survey.prior_measure()
    credal = CredalSet((prior, uniform(36)))
    fine, groups = stage_one(model)
    cmap = CoarseningMap.from_symbol_groups(fine, groups)
    state = coarse_dipk_step(initial_dipk_state(credal, model), model, cmap, survey_stages()[0][0])
    assert state.step == 1
    for g in state.credal.generators:
        assert prob(g, coarsen_partition(fine, cmap).blocks[0]) == pytest.approx(0.22, abs=1e-12)


def test_product_model_independence():
    model = survey_model()
    ages = dict(zip(AGE_BINS, (0.22, 0.05, 0.30, 0.25, 0.18)))
    for s, q in zip(model.symbols, model.pmf):
        a, r = s.split(":")
        assert q == pytest.approx(ages[a] * (0.60, 0.13, 0.07, 0.20)[RACES.index(r)])
    assert sum(model.pmf) == pytest.approx(1.0)


def singletons(symbols, m=None):
    n = len(symbols)
    return ObservationModel(
        symbols=tuple(symbols),
        pmf=tuple([1.0 / n] * n),
        preimages=tuple(Event((i,)) for i in range(n)),
        m=m or n,
    )


def test_product_model_with_single_first_symbol():
    whole = ObservationModel(symbols=("all",), pmf=(1.0,), preimages=(Event.full(2),), m=2)
    second = singletons(("u", "v", "w"))
    model = product_observation_model(whole, second, [[0.2, 0.3, 0.5]])
    assert model.symbols == ("all:u", "all:v", "all:w")
    assert model.preimage("all:v") == Event((1, 4))
    assert model.m == 6


def test_product_model_embedding():
    first, second = singletons(("a", "b")), singletons(("x", "y"))
    embedding = [[0, 1], [2, -1]]
    with pytest.raises(EmptyPreimage):
        product_observation_model(first, second, np.full((2, 2), 0.25), embedding=embedding)
    wide = ObservationModel(
        symbols=("a", "b"), pmf=(0.5, 0.5), preimages=(Event((0,)), Event((1, 2))), m=3
    )
    model = product_observation_model(
        wide, second, np.full((2, 2), 0.25), embedding=[[0, 1], [2, -1], [3, 4]]
    )
    assert model.m == 5
    assert model.preimage("b:y") == Event((4,))
    assert model.preimage("b:x") == Event((2, 3))


def test_product_model_errors():
    first, second = singletons(("a", "b")), singletons(("x", "y"))
    with pytest.raises(InvalidModel):
        product_observation_model(first, second, np.full((2, 3), 1 / 6))
    with pytest.raises(InvalidModel):
        product_observation_model(first, second, [[0.5, 0.5], [0.0, 0.0]])
    tailed = ObservationModel(
        symbols=("a", "b"), pmf=(0.5, 0.5), preimages=(Event((0,)), Event((1,))), m=2, tail="b"
    )
    with pytest.raises(InvalidModel):
        product_observation_model(tailed, second, np.full((2, 2), 0.25))
