"""Scenario files: one ``<tick> <action> <args...>`` event per line.

Blank lines and ``#`` comments are ignored. Actions::

    spawn NODE [BOOTSTRAP_NAME]
    join NODE HOST_NODE
    partition GROUP [GROUP ...]        # GROUP = comma-separated node ids
    heal
    create NODE PATH
    delete NODE PATH
    rename NODE PATH NEW_NAME
    write NODE PATH TEXT...
    read NODE PATH
    duplicate-next-message NODE [TAG]
    checkpoint LABEL
    config ping_period N | inactivity_threshold N | seed N | quota NODE BYTES

``config`` lines must sit at tick 0. Nodes left out of a ``partition``
are cut off from everyone until the next ``heal``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..metadata import SEP

# action -> (min args, max args or None for unbounded)
ARITY: dict[str, tuple[int, Optional[int]]] = {
    "spawn": (1, 2),
    "join": (2, 2),
    "partition": (1, None),
    "heal": (0, 0),
    "create": (2, 2),
    "delete": (2, 2),
    "rename": (3, 3),
    "write": (3, None),
    "read": (2, 2),
    "duplicate-next-message": (1, 2),
    "checkpoint": (1, 1),
    "config": (2, 3),
}
NODE_ACTIONS = {"join", "create", "delete", "rename", "write", "read",
                "duplicate-next-message"}
CONFIG_KEYS = {"ping_period": 1, "inactivity_threshold": 1, "seed": 1, "quota": 2}


class ScenarioParseError(ValueError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class ScenarioEvent:
    at_tick: int
    action: str
    args: tuple[str, ...] = ()
    line: int = 0

    def __str__(self) -> str:
        return " ".join([str(self.at_tick), self.action, *self.args])


@dataclass
class Scenario:
    events: list[ScenarioEvent] = field(default_factory=list)
    ping_period: Optional[int] = None
    inactivity_threshold: Optional[int] = None
    seed: Optional[int] = None
    quotas: dict[str, int] = field(default_factory=dict)

    def config_lines(self) -> list[str]:
        out = []
        for key in ("ping_period", "inactivity_threshold", "seed"):
            value = getattr(self, key)
            if value is not None:
                out.append(f"0 config {key} {value}")
        out.extend(f"0 config quota {n} {q}" for n, q in self.quotas.items())
        return out

    def text(self) -> str:
        return "\n".join(self.config_lines() + [str(e) for e in self.events]) + "\n"

    def prefix(self, n: int) -> "Scenario":
        return Scenario(self.events[:n], self.ping_period, self.inactivity_threshold,
                        self.seed, dict(self.quotas))

    @property
    def last_tick(self) -> int:
        return self.events[-1].at_tick if self.events else 0


def _int(token: str, lineno: int, what: str, minimum: int = 0) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ScenarioParseError(lineno, f"{what} must be an integer, got {token!r}") from None
    if value < minimum:
        raise ScenarioParseError(lineno, f"{what} must be >= {minimum}")
    return value


def parse_scenario(text: str) -> Scenario:
    scenario = Scenario()
    spawned: set[str] = set()
    last_tick = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) < 2:
            raise ScenarioParseError(lineno, "expected '<tick> <action> ...'")
        tick = _int(tokens[0], lineno, "tick")
        action, args = tokens[1], tuple(tokens[2:])
        if action not in ARITY:
            raise ScenarioParseError(lineno, f"unknown action {action!r}")
        lo, hi = ARITY[action]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ScenarioParseError(lineno, f"{action} takes {lo}..{hi or 'n'} arguments")
        if tick < last_tick:
            raise ScenarioParseError(lineno, f"tick {tick} goes backwards (after {last_tick})")
        last_tick = tick

        if action == "config":
            if tick != 0:
                raise ScenarioParseError(lineno, "config only allowed at tick 0")
            key = args[0]
            if key not in CONFIG_KEYS or len(args) - 1 != CONFIG_KEYS[key]:
                raise ScenarioParseError(lineno, f"bad config {' '.join(args)!r}")
            if key == "quota":
                scenario.quotas[args[1]] = _int(args[2], lineno, "quota")
            else:
                minimum = 0 if key == "seed" else 1
                setattr(scenario, key, _int(args[1], lineno, key, minimum))
            continue

        if action == "spawn":
            if args[0] in spawned:
                raise ScenarioParseError(lineno, f"{args[0]} spawned twice")
            if len(args) == 2 and (SEP in args[1]):
                raise ScenarioParseError(lineno, "bootstrap name may not contain '/'")
            spawned.add(args[0])
        elif action in NODE_ACTIONS:
            if args[0] not in spawned:
                raise ScenarioParseError(lineno, f"{args[0]} used before spawn")
            if action == "join" and args[1] not in spawned:
                raise ScenarioParseError(lineno, f"{args[1]} used before spawn")
            if action in ("create", "delete", "rename", "write", "read"):
                if not args[1].startswith(SEP):
                    raise ScenarioParseError(lineno, f"path must be absolute: {args[1]!r}")
        elif action == "partition":
            seen: set[str] = set()
            for group in args:
                for node in group.split(","):
                    if node not in spawned:
                        raise ScenarioParseError(lineno, f"{node} used before spawn")
                    if node in seen:
                        raise ScenarioParseError(lineno, f"{node} listed twice")
                    seen.add(node)
        scenario.events.append(ScenarioEvent(tick, action, args, lineno))
    return scenario
