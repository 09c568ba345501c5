"""Replay a stream through a session and collect per-step records.

Reports are plain dicts for JSON plus a flat polars table, one row per
(step, queried event), for CSV.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import polars as pl

from probkin.config import SessionConfig
from probkin.dipk import (
    MAX_SWEEP_ATOMS,
    CredalSet,
    best_witnesses,
    classify_behavior,
    classify_sweep,
    contraction_witness,
    dilation_witness,
    dipk_run,
    geometric_jeffrey_bounds,
    jeffrey_lower_bound,
    jeffrey_upper_bound,
    lower_prob,
    sufficient_contraction,
    sufficient_sure_loss,
    upper_prob,
)
from probkin.dpk import dpk_run
from probkin.errors import BudgetExceeded, ConfigError, NullEnvelope
from probkin.measure import Event, prob
from probkin.observation import Partition, mechanical_masses
from probkin.survey import coarse_run

log = logging.getLogger(__name__)

GEOMETRIC_SAMPLE_EVENTS = 64

CSV_SCHEMA = {
    "step": pl.Int64,
    "event": pl.Utf8,
    "lower": pl.Float64,
    "upper": pl.Float64,
    "jeffrey_lower": pl.Float64,
    "jeffrey_upper": pl.Float64,
    "geometric_lower": pl.Float64,
    "geometric_upper": pl.Float64,
    "geometric_assumption": pl.Boolean,
    "behavior": pl.Utf8,
    "tv_step": pl.Float64,
    "hausdorff_step": pl.Float64,
    "hausdorff_to_final": pl.Float64,
}


def rnd(x: Optional[float]) -> Optional[float]:
    """12 significant digits, so equal runs print equal text."""
    if x is None:
        return None
    return float(f"{float(x):.12g}")


@dataclass
class StepRecord:
    step: int
    observed: List[str]
    blocks: int
    remainder_atoms: int
    masses: List[float] = field(default_factory=list)
    tv_step: Optional[float] = None
    hausdorff_step: Optional[float] = None
    hausdorff_to_final: Optional[float] = None
    events: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    sweep: Optional[Dict[str, int]] = None


@dataclass
class RunReport:
    command: str
    stop_reason: str
    records: List[StepRecord]
    seed: int = 0
    summary: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "seed": self.seed,
            "stop_reason": self.stop_reason,
            "records": [asdict(r) for r in self.records],
            "summary": self.summary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_frame(self) -> pl.DataFrame:
        rows = []
        for r in self.records:
            base = {
                "step": r.step,
                "tv_step": r.tv_step,
                "hausdorff_step": r.hausdorff_step,
                "hausdorff_to_final": r.hausdorff_to_final,
            }
            if not r.events:
                rows.append({**base, "event": ""})
            for name, ev in r.events.items():
                rows.append({**base, **ev, "event": name})
        rows = [{k: row.get(k) for k in CSV_SCHEMA} for row in rows]
        return pl.DataFrame(rows, schema=CSV_SCHEMA)


def _interval(lo: float, hi: Optional[float] = None) -> Dict[str, Any]:
    return {"lower": rnd(lo), "upper": rnd(lo if hi is None else hi)}


def _new_symbols(prev: Optional[Partition], cur: Partition) -> List[str]:
    start = 0 if prev is None else len(prev.observed)
    return list(cur.observed[start:])


def run_dpk(config: SessionConfig, stream: Sequence[Sequence[str]], seed: int = 0) -> RunReport:
    """Single-measure run. With coarsening stages in the config, updates go through the bins."""
    if config.coarsening is not None:
        return _run_coarse(config, stream, seed)
    model = config.model()
    events = config.event_map()
    trace = dpk_run(config.prior_measure(), model, stream, config.stop_rule())
    records = []
    prev = None
    for i, state in enumerate(trace.states):
        records.append(
            StepRecord(
                step=state.step,
                observed=_new_symbols(prev, state.partition),
                blocks=len(state.partition.blocks),
                remainder_atoms=len(state.partition.remainder),
                masses=[rnd(x) for x in state.measure.masses],
                tv_step=None if i == 0 else rnd(trace.tv_steps[i - 1]),
                events={
                    name: _interval(prob(state.measure, A)) for name, A in events.items()
                },
            )
        )
        prev = state.partition
    return RunReport(
        command="run-dpk", stop_reason=trace.stop_reason.value, records=records, seed=seed
    )


def _run_coarse(config: SessionConfig, stream: Sequence[Sequence[str]], seed: int) -> RunReport:
    stages_groups = list(config.coarsening or ())
    if len(stages_groups) != len(stream):
        raise ConfigError(
            f"{len(stages_groups)} coarsening stages for {len(stream)} stream batches"
        )
    model = config.model()
    events = config.event_map()
    prior = config.prior_measure()
    trace = coarse_run(prior, model, stream, stages_groups, config.stop_rule())
    stages = trace.stages
    records = [
        StepRecord(
            step=0,
            observed=[],
            blocks=0,
            remainder_atoms=model.m,
            masses=[rnd(x) for x in prior.masses],
            events={
                name: _interval(prob(prior, A)) for name, A in events.items()
            },
        )
    ]
    prev = None
    for st in stages:
        records.append(
            StepRecord(
                step=st.step,
                observed=_new_symbols(prev, st.fine_partition),
                blocks=len(st.coarse_partition.blocks),
                remainder_atoms=len(st.coarse_partition.remainder),
                masses=[rnd(x) for x in st.coarse.masses],
                tv_step=rnd(st.tv_step),
                events={
                    name: _interval(prob(st.coarse, A)) for name, A in events.items()
                },
            )
        )
        prev = st.fine_partition
    return RunReport(
        command="run-dpk",
        stop_reason=trace.stop_reason.value,
        records=records,
        seed=seed,
        summary={"coarse_tv_to_fine": [rnd(st.tv) for st in stages]},
    )


def _extra_events(m: int, seed: int) -> List[Event]:
    rng = np.random.default_rng(seed)
    masks = rng.random((GEOMETRIC_SAMPLE_EVENTS, m)) < 0.5
    return [Event.of(np.flatnonzero(row).tolist()) for row in masks]


def _event_record(
    prev: CredalSet,
    nxt: CredalSet,
    partition: Partition,
    masses,
    A: Event,
    extra: Sequence[Event],
) -> Dict[str, Any]:
    report = classify_behavior(prev, nxt, A)
    rec: Dict[str, Any] = {
        "lower": rnd(report.lower_after),
        "upper": rnd(report.upper_after),
        "jeffrey_lower": rnd(jeffrey_lower_bound(prev, partition, masses, A)),
        "jeffrey_upper": rnd(jeffrey_upper_bound(prev, partition, masses, A)),
        "behavior": report.classification.value,
    }
    try:
        geo = geometric_jeffrey_bounds(prev, partition, masses, A, extra)
        rec.update(
            geometric_lower=rnd(geo.lower),
            geometric_upper=rnd(geo.upper),
            geometric_assumption=geo.assumption_held,
        )
    except NullEnvelope:
        rec.update(geometric_lower=None, geometric_upper=None, geometric_assumption=None)
    contraction = sufficient_contraction(prev, partition, masses, A)
    sure_loss = sufficient_sure_loss(prev, partition, masses, A)
    dil_s, dil_k, con_s, con_k = best_witnesses(prev, nxt, A)
    rec.update(
        sufficient_contraction=contraction.value,
        contraction_confirmed=report.contracts,
        sufficient_sure_loss=sure_loss.value,
        sure_loss_confirmed=report.sure_loss,
        dilation_witness=dilation_witness(prev, nxt, A, dil_s, dil_k),
        dilation_confirmed=report.dilates,
        contraction_witness=contraction_witness(prev, nxt, A, con_s, con_k),
    )
    return rec


def run_dipk(
    config: SessionConfig,
    stream: Sequence[Sequence[str]],
    sweep: bool = False,
    seed: int = 0,
) -> RunReport:
    model = config.model()
    events = config.event_map()
    credal = config.credal_set()
    if sweep and model.m > MAX_SWEEP_ATOMS:
        raise BudgetExceeded(f"event sweep needs at most {MAX_SWEEP_ATOMS} atoms, got {model.m}")
    trace = dipk_run(credal, model, stream, config.stop_rule())
    to_final = trace.hausdorff_to_final()
    extra = _extra_events(model.m, seed) if model.m > MAX_SWEEP_ATOMS else []
    records = []
    prev_state = None
    for i, state in enumerate(trace.states):
        rec = StepRecord(
            step=state.step,
            observed=_new_symbols(prev_state and prev_state.partition, state.partition),
            blocks=len(state.partition.blocks),
            remainder_atoms=len(state.partition.remainder),
            hausdorff_step=None if i == 0 else rnd(trace.hausdorff_steps[i - 1]),
            hausdorff_to_final=rnd(to_final[i]),
        )
        if i == 0 or state.partition is prev_state.partition:
            rec.events = {
                name: _interval(lower_prob(state.credal, A), upper_prob(state.credal, A))
                for name, A in events.items()
            }
        else:
            masses = mechanical_masses(model, state.partition)
            rec.events = {
                name: _event_record(
                    prev_state.credal, state.credal, state.partition, masses, A, extra
                )
                for name, A in events.items()
            }
            if sweep:
                rec.sweep = classify_sweep(prev_state.credal, state.credal)
        records.append(rec)
        prev_state = state
        log.debug("recorded dipk step %d", state.step)
    return RunReport(
        command="run-dipk",
        stop_reason=trace.stop_reason.value,
        records=records,
        seed=seed,
        summary={"generators": credal.k, "duplicate_generators": credal.duplicates},
    )
