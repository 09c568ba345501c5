"""Session configs and observation streams.

A config is a JSON document naming the atoms, the observation model, the
prior (or a list of generators) and run options. Every problem is reported
as a ConfigError carrying the line it was found on.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from probkin.dipk import CredalSet
from probkin.dpk import DEFAULT_TOLERANCE, StopRule
from probkin.errors import ConfigError, ProbKinError
from probkin.measure import Event, ProbMeasure, StateSpace
from probkin.observation import ObservationModel, validate_model

log = logging.getLogger(__name__)

Groups = Tuple[Tuple[str, ...], ...]


@dataclass(frozen=True)
class SessionConfig:
    atoms: Tuple[str, ...]
    symbols: Tuple[str, ...]
    pmf: Tuple[float, ...]
    preimages: Tuple[Tuple[str, ...], ...]
    tail: Optional[str] = None
    prior: Optional[Tuple[float, ...]] = None
    generators: Optional[Tuple[Tuple[float, ...], ...]] = None
    tolerance: float = DEFAULT_TOLERANCE
    budget: Optional[int] = None
    events: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()
    coarsening: Optional[Tuple[Optional[Groups], ...]] = None

    def space(self) -> StateSpace:
        return StateSpace(self.atoms)

    def model(self) -> ObservationModel:
        space = self.space()
        return ObservationModel(
            symbols=self.symbols,
            pmf=self.pmf,
            preimages=tuple(space.event(p) for p in self.preimages),
            m=space.m,
            tail=self.tail,
        )

    def prior_measure(self) -> ProbMeasure:
        if self.prior is None:
            raise ConfigError("config has no prior")
        return ProbMeasure(self.prior)

    def credal_set(self) -> CredalSet:
        """The generators, or the prior as the only generator."""
        if self.generators is not None:
            return CredalSet(tuple(ProbMeasure(g) for g in self.generators))
        return CredalSet((self.prior_measure(),))

    def event_map(self) -> Dict[str, Event]:
        space = self.space()
        return {name: space.event(labels) for name, labels in self.events}

    def stop_rule(self) -> StopRule:
        return StopRule(tolerance=self.tolerance, budget=self.budget)


def _line_of(text: str, token: str) -> Optional[int]:
    needle = json.dumps(token)
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _str_list(value: Any, what: str, line: Optional[int]) -> Tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise ConfigError(f"{what} must be a list of strings", line)
    return tuple(value)


def _float_list(value: Any, what: str, line: Optional[int]) -> Tuple[float, ...]:
    if not isinstance(value, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise ConfigError(f"{what} must be a list of numbers", line)
    return tuple(float(x) for x in value)


def _groups(value: Any, line: Optional[int]) -> Optional[Groups]:
    if value is None:
        return None
    if not isinstance(value, list):
        raise ConfigError("coarsening stage must be a list of symbol groups or null", line)
    return tuple(_str_list(g, "coarsening group", line) for g in value)


def parse_config(text: str) -> SessionConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, e.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", 1)

    def line(key: str) -> Optional[int]:
        return _line_of(text, key)

    for key in ("atoms", "model"):
        if key not in doc:
            raise ConfigError(f"missing key {key!r}", 1)
    model = doc["model"]
    if not isinstance(model, dict):
        raise ConfigError("model must be an object", line("model"))
    for key in ("symbols", "pmf", "preimages"):
        if key not in model:
            raise ConfigError(f"model is missing {key!r}", line("model"))
    preimages = model["preimages"]
    if not isinstance(preimages, list):
        raise ConfigError("preimages must be a list of atom-label lists", line("preimages"))
    options = doc.get("options") or {}
    if not isinstance(options, dict):
        raise ConfigError("options must be an object", line("options"))
    events = options.get("events") or {}
    if not isinstance(events, dict):
        raise ConfigError("events must map names to atom-label lists", line("events"))
    coarsening = options.get("coarsening")
    if coarsening is not None and not isinstance(coarsening, list):
        raise ConfigError("coarsening must be a list of stages", line("coarsening"))
    generators = doc.get("generators")
    if generators is not None and not isinstance(generators, list):
        raise ConfigError("generators must be a list of mass lists", line("generators"))
    budget = options.get("budget")
    if budget is not None and (not isinstance(budget, int) or budget < 0):
        raise ConfigError("budget must be a nonnegative integer", line("budget"))
    tolerance = options.get("tolerance", DEFAULT_TOLERANCE)
    if not isinstance(tolerance, (int, float)) or tolerance < 0:
        raise ConfigError("tolerance must be a nonnegative number", line("tolerance"))

    config = SessionConfig(
        atoms=_str_list(doc["atoms"], "atoms", line("atoms")),
        symbols=_str_list(model["symbols"], "symbols", line("symbols")),
        pmf=_float_list(model["pmf"], "pmf", line("pmf")),
        preimages=tuple(_str_list(p, "preimage", line("preimages")) for p in preimages),
        tail=model.get("tail"),
        prior=None
        if doc.get("prior") is None
        else _float_list(doc["prior"], "prior", line("prior")),
        generators=None
        if generators is None
        else tuple(_float_list(g, "generator", line("generators")) for g in generators),
        tolerance=float(tolerance),
        budget=budget,
        events=tuple(
            (name, _str_list(labels, f"event {name!r}", line(name)))
            for name, labels in events.items()
        ),
        coarsening=None
        if coarsening is None
        else tuple(_groups(stage, line("coarsening")) for stage in coarsening),
    )
    _check(config, line)
    return config


def _check(config: SessionConfig, line) -> None:
    try:
        space = config.space()
    except ProbKinError as e:
        raise ConfigError(str(e), line("atoms")) from None
    try:
        model = config.model()
    except ProbKinError as e:
        raise ConfigError(str(e), line("preimages")) from None
    violations = validate_model(model)
    if violations:
        raise ConfigError("; ".join(violations), line("model"))
    if config.prior is None and config.generators is None:
        raise ConfigError("config needs a prior or generators", 1)
    if config.prior is not None:
        if len(config.prior) != space.m:
            raise ConfigError(
                f"prior has {len(config.prior)} masses for {space.m} atoms", line("prior")
            )
        try:
            config.prior_measure()
        except ProbKinError as e:
            raise ConfigError(str(e), line("prior")) from None
    if config.generators is not None:
        if not config.generators:
            raise ConfigError("generators must not be empty", line("generators"))
        for i, g in enumerate(config.generators):
            if len(g) != space.m:
                raise ConfigError(
                    f"generator {i} has {len(g)} masses for {space.m} atoms", line("generators")
                )
        try:
            config.credal_set()
        except ProbKinError as e:
            raise ConfigError(str(e), line("generators")) from None
    for name, labels in config.events:
        try:
            space.event(labels)
        except ProbKinError as e:
            raise ConfigError(f"event {name!r}: {e}", line(name)) from None
    for stage in config.coarsening or ():
        for group in stage or ():
            for s in group:
                if s not in config.symbols:
                    raise ConfigError(f"coarsening names unknown symbol {s!r}", line("coarsening"))


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None


def load_config(path) -> SessionConfig:
    text = _read(path)
    config = parse_config(text)
    log.debug(
        "loaded config %s: %d atoms, %d symbols", path, len(config.atoms), len(config.symbols)
    )
    return config


def config_to_dict(config: SessionConfig) -> Dict[str, Any]:
    options: Dict[str, Any] = {
        "tolerance": config.tolerance,
        "budget": config.budget,
        "events": {name: list(labels) for name, labels in config.events},
        "coarsening": None
        if config.coarsening is None
        else [None if st is None else [list(g) for g in st] for st in config.coarsening],
    }
    return {
        "atoms": list(config.atoms),
        "model": {
            "symbols": list(config.symbols),
            "pmf": list(config.pmf),
            "preimages": [list(p) for p in config.preimages],
            "tail": config.tail,
        },
        "prior": None if config.prior is None else list(config.prior),
        "generators": None
        if config.generators is None
        else [list(g) for g in config.generators],
        "options": options,
    }


def serialize_config(config: SessionConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2) + "\n"


def parse_stream(text: str, model: Optional[ObservationModel] = None) -> List[List[str]]:
    """One batch per line. With a model, symbols are checked as they would be observed."""
    batches: List[List[str]] = []
    seen: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].replace(",", " ").strip()
        if not body:
            continue
        batch = body.split()
        if model is not None:
            for s in batch:
                if s not in model.symbols:
                    raise ConfigError(f"unknown symbol {s!r}", lineno)
                if s == model.tail:
                    raise ConfigError(f"tail symbol {s!r} cannot be observed", lineno)
                if seen.get(s, lineno) != lineno:
                    raise ConfigError(f"symbol {s!r} already observed on line {seen[s]}", lineno)
                seen.setdefault(s, lineno)
        batches.append(batch)
    return batches


def load_stream(path, model: Optional[ObservationModel] = None) -> List[List[str]]:
    return parse_stream(_read(path), model)

