"""Seeded random scenarios for convergence testing."""

from __future__ import annotations

import random

from .format import Scenario, ScenarioEvent

FOLDERS = ("", "/docs", "/pics", "/docs/old")
FILES = ("a.txt", "b.txt", "c.jpg", "notes")
OP_WEIGHTS = {
    "create": 8,
    "delete": 3,
    "rename": 3,
    "write": 3,
    "read": 2,
    "partition": 2,
    "heal": 1,
    "duplicate-next-message": 1,
}


def _path(rng: random.Random) -> str:
    return f"{rng.choice(FOLDERS)}/{rng.choice(FILES)}"


def random_scenario(seed: int, max_nodes: int = 10, max_events: int = 100) -> Scenario:
    """A random join tree followed by file traffic, partitions and faults.

    The run always ends healed so the quiescence window can converge.
    """
    if max_nodes < 1 or max_events < max_nodes + 1:
        raise ValueError("need max_nodes >= 1 and max_events > max_nodes")
    rng = random.Random(seed)
    nodes = [f"n{i}" for i in range(rng.randint(1, max_nodes))]
    events: list[ScenarioEvent] = []
    tick = 0

    def add(action: str, *args: str) -> None:
        events.append(ScenarioEvent(tick, action, args))

    add("spawn", nodes[0], "A")
    for i, node in enumerate(nodes[1:], start=1):
        tick += rng.randint(0, 6)
        add("spawn", node)
        add("join", node, rng.choice(nodes[:i]))
    # spawn+join pairs use two events each; leave room for the closing heal
    budget = max_events - len(events) - 1
    kinds, weights = zip(*OP_WEIGHTS.items())
    partitioned = False
    for _ in range(rng.randint(0, budget)):
        tick += rng.randint(0, 8)
        kind = rng.choices(kinds, weights)[0]
        node = rng.choice(nodes)
        if kind == "partition":
            if len(nodes) < 2:
                continue
            shuffled = nodes[:]
            rng.shuffle(shuffled)
            cuts = sorted(rng.sample(range(1, len(nodes)), rng.randint(1, min(3, len(nodes) - 1))))
            groups = [shuffled[a:b] for a, b in zip([0, *cuts], [*cuts, len(nodes)])]
            add("partition", *(",".join(g) for g in groups))
            partitioned = True
        elif kind == "heal":
            add("heal")
            partitioned = False
        elif kind == "duplicate-next-message":
            add(kind, node, *rng.choice([(), ("freq",), ("sync",)]))
        elif kind == "rename":
            add("rename", node, _path(rng), rng.choice(FILES))
        elif kind == "write":
            add("write", node, _path(rng), f"v{rng.randint(0, 999)}")
        else:
            add(kind, node, _path(rng))
    if partitioned or rng.random() < 0.5:
        tick += rng.randint(0, 8)
        add("heal")
    return Scenario(events, seed=seed)
