"""Scenario files (JSON, ``version: 1``) and the built-in games.

A scenario bundles a game, dynamics parameters and an initial condition::

    {
      "version": 1,
      "graph": {"nodes": ["o", "d"],
                "edges": [{"id": "e1", "tail": "o", "head": "d"}, ...],
                "origin": "o", "destination": "d"},
      "populations": [{"id": "1", "throughput": 1.0,
                       "delays": {"e1": [1, 1], "e2": [0, 2]}}, ...],
      "dynamics": {"eta": 5.0, "step": 0.01, "horizon": 50.0},
      "initial": {"kind": "seeded-random", "seed": 7}
    }

Delays are polynomial coefficients, lowest degree first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from .dynamics import LogitParams
from .errors import ParseError, ValidationError, WardropLogitError
from .game import Population, RoutingGame, check_state, is_admissible, random_state, uniform_state
from .graph import RoutingMultigraph

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "graph", "populations"],
    "properties": {
        "version": {"const": 1},
        "name": {"type": "string"},
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "required": ["nodes", "edges", "origin", "destination"],
            "properties": {
                "nodes": {"type": "array", "items": {"type": "string"}},
                "edges": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["id", "tail", "head"],
                        "properties": {
                            "id": {"type": "string"},
                            "tail": {"type": "string"},
                            "head": {"type": "string"},
                        },
                    },
                },
                "origin": {"type": "string"},
                "destination": {"type": "string"},
            },
        },
        "populations": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "throughput", "delays"],
                "properties": {
                    "id": {"type": "string"},
                    "throughput": {"type": "number", "minimum": 0},
                    "delays": {"type": "object", "additionalProperties": _NUMBER_LIST},
                },
            },
        },
        "dynamics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eta": {"type": "number", "minimum": 0},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["uniform", "seeded-random", "explicit"]},
                "seed": {"type": "integer"},
                "z": {"type": "array", "items": _NUMBER_LIST},
            },
        },
    },
}


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "uniform"
    seed: int | None = None
    z: tuple | None = None

    def state(self, game: RoutingGame, offset: int = 0) -> np.ndarray:
        """Route flows for this initial condition; ``offset`` shifts the seed for multi-start runs."""
        if self.kind == "uniform":
            return uniform_state(game)
        if self.kind == "seeded-random":
            return random_state(game, (self.seed or 0) + offset)
        z = check_state(game, np.array(self.z, dtype=float))
        if not is_admissible(game, z):
            raise ValidationError("initial.z: route flows must sum to each population's throughput")
        return z

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "seeded-random":
            out["seed"] = int(self.seed or 0)
        if self.kind == "explicit":
            out["z"] = [list(row) for row in self.z]
        return out

    @classmethod
    def parse(cls, text: str) -> "InitialCondition":
        """Parse the command-line form ``uniform | seeded-random:SEED | file:PATH``."""
        if text == "uniform":
            return cls()
        if text.startswith("seeded-random"):
            _, _, seed = text.partition(":")
            try:
                return cls("seeded-random", int(seed or 0))
            except ValueError:
                raise ValidationError(f"--init: bad seed in {text!r}") from None
        if text.startswith("file:"):
            path = Path(text[len("file:"):])
            data = _read_json(path)
            z = data.get("z") if isinstance(data, dict) else data
            if not isinstance(z, list):
                raise ValidationError(f"{path}: expected a JSON matrix or an object with key 'z'")
            return cls("explicit", z=tuple(tuple(float(v) for v in row) for row in z))
        raise ValidationError(f"--init: unknown initial condition {text!r}")


@dataclass(frozen=True)
class Scenario:
    game: RoutingGame
    params: LogitParams = field(default_factory=LogitParams)
    initial: InitialCondition = field(default_factory=InitialCondition)
    name: str = ""

    def initial_state(self, offset: int = 0) -> np.ndarray:
        return self.initial.state(self.game, offset)

    def with_overrides(self, eta=None, step=None, horizon=None, initial=None) -> "Scenario":
        changes = {k: v for k, v in (("eta", eta), ("step", step), ("horizon", horizon)) if v is not None}
        try:
            params = replace(self.params, **changes)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        return replace(self, params=params, initial=initial or self.initial)

    def to_dict(self) -> dict:
        out = {"version": 1}
        if self.name:
            out["name"] = self.name
        out.update(self.game.to_dict())
        out["dynamics"] = {"eta": self.params.eta, "step": self.params.step, "horizon": self.params.horizon}
        out["initial"] = self.initial.to_dict()
        return out


def _read_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None


def _field_path(error) -> str:
    parts = []
    for p in error.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else (f".{p}" if parts else str(p)))
    return "".join(parts) or "<root>"


def scenario_from_dict(data) -> Scenario:
    """Validate a decoded scenario document; messages name the offending field."""
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(SCHEMA).iter_errors(data))
    if err is not None:
        raise ValidationError(f"{_field_path(err)}: {err.message}")

    try:
        graph = RoutingMultigraph.from_dict(data["graph"])
    except WardropLogitError as exc:
        raise ValidationError(f"graph: {exc}") from None
    pops = []
    for i, p in enumerate(data["populations"]):
        try:
            pops.append(Population(p["id"], p["throughput"], p["delays"]))
        except WardropLogitError as exc:
            raise ValidationError(f"populations[{i}]: {exc}") from None
    try:
        game = RoutingGame(graph, pops)
    except WardropLogitError as exc:
        raise ValidationError(f"populations: {exc}") from None

    dyn = data.get("dynamics", {})
    try:
        params = LogitParams(**dyn)
    except ValueError as exc:
        raise ValidationError(f"dynamics: {exc}") from None

    init = data.get("initial", {"kind": "uniform"})
    kind = init["kind"]
    if kind == "explicit":
        if "z" not in init:
            raise ValidationError("initial.z: required for kind 'explicit'")
        initial = InitialCondition(kind, z=tuple(tuple(float(v) for v in row) for row in init["z"]))
        try:
            initial.state(game)
        except WardropLogitError as exc:
            raise ValidationError(f"initial.z: {exc}") from None
    elif kind == "seeded-random":
        initial = InitialCondition(kind, int(init.get("seed", 0)))
    else:
        initial = InitialCondition()
    return Scenario(game, params, initial, data.get("name", ""))


def load_scenario(source) -> Scenario:
    """Load ``builtin:<name>`` or a JSON scenario file."""
    source = str(source)
    if source.startswith("builtin:"):
        return builtin_scenario(source[len("builtin:"):])
    return scenario_from_dict(_read_json(source))


def dump_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n", encoding="utf-8")


# --- built-in games -------------------------------------------------------


def example1_game() -> RoutingGame:
    """Two parallel edges, two populations with mirrored affine delays."""
    g = RoutingMultigraph(["o", "d"], [("e1", "o", "d"), ("e2", "o", "d")], "o", "d")
    return RoutingGame(
        g,
        [
            Population("1", 1.0, {"e1": [1, 1], "e2": [0, 2]}),
            Population("2", 1.0, {"e1": [0, 2], "e2": [1, 1]}),
        ],
    )


def example2_graph() -> RoutingMultigraph:
    edges = [
        ("e1", "o", "a"),
        ("e2", "a", "d"),
        ("e3", "a", "d"),
        ("e4", "o", "b"),
        ("e5", "b", "d"),
        ("e6", "b", "d"),
    ]
    return RoutingMultigraph(["o", "a", "b", "d"], edges, "o", "d")


def example2_game() -> RoutingGame:
    """Three populations that each ignore two roads; two distinct equilibria."""
    base, far, steep, mid = [19, 1], [100, 1], [0, 20], [21, 1]
    return RoutingGame(
        example2_graph(),
        [
            Population("1", 1.2, {"e1": base, "e2": base, "e3": far, "e4": base, "e5": far, "e6": base}),
            Population("2", 1.0, {"e1": base, "e2": steep, "e3": far, "e4": base, "e5": mid, "e6": far}),
            Population("3", 1.0, {"e1": base, "e2": far, "e3": mid, "e4": base, "e5": far, "e6": steep}),
        ],
    )


def example3_graph() -> RoutingMultigraph:
    edges = [("e1", "o", "d"), ("e2", "o", "a"), ("e3", "o", "d"), ("e4", "a", "d")]
    return RoutingMultigraph(["o", "a", "d"], edges, "o", "d")


def example3_game() -> RoutingGame:
    """Simple graph with three routes, affine and quadratic delays."""
    return RoutingGame(
        example3_graph(),
        [
            Population("1", 5.0, {"e1": [1, 1], "e2": [2, 0.5], "e3": [1, 0, 1], "e4": [0, 0.5]}),
            Population("2", 5.0, {"e1": [1, 0, 1], "e2": [2, 1], "e3": [2, 1], "e4": [0, 1]}),
        ],
    )


def series_graph() -> RoutingMultigraph:
    """A copy of ``example3_graph`` from o to b followed by three routes b to d."""
    edges = [
        ("e1", "o", "b"),
        ("e2", "o", "a"),
        ("e3", "o", "b"),
        ("e4", "a", "b"),
        ("e5", "b", "d"),
        ("e6", "b", "c"),
        ("e7", "c", "d"),
        ("e8", "b", "e"),
        ("e9", "e", "d"),
    ]
    return RoutingMultigraph(["o", "a", "b", "c", "e", "d"], edges, "o", "d")


def series_game() -> RoutingGame:
    return RoutingGame(
        series_graph(),
        [
            Population(
                "1",
                2.0,
                {"e1": [1, 1], "e2": [0.5, 1], "e3": [2, 0.5], "e4": [0.5, 0.5],
                 "e5": [3, 1], "e6": [1, 0.5], "e7": [1, 1], "e8": [0, 2], "e9": [1, 1]},
            ),
            Population(
                "2",
                1.0,
                {"e1": [2, 0.5], "e2": [1, 1], "e3": [0, 1], "e4": [1, 1],
                 "e5": [1, 1], "e6": [2, 1], "e7": [0, 1], "e8": [1, 1], "e9": [0.5, 0.5]},
            ),
        ],
    )


BUILTINS = {
    "example1": lambda: Scenario(
        example1_game(),
        LogitParams(eta=5.0),
        InitialCondition("explicit", z=((1.0, 0.0), (0.0, 1.0))),
        name="example1",
    ),
    "example2": lambda: Scenario(
        example2_game(), LogitParams(eta=10.0), InitialCondition("seeded-random", 0), name="example2"
    ),
    "example3": lambda: Scenario(example3_game(), LogitParams(eta=2.0), name="example3"),
    "series": lambda: Scenario(series_game(), LogitParams(eta=1.0), name="series"),
}


def builtin_scenario(name: str) -> Scenario:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValidationError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTINS)}") from None
