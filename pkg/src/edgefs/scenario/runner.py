"""Drives nodes over the simulated network and records a trace.

Trace lines read ``<tick> <node> <direction> <tag> <summary>``. Directions
are ``recv`` and ``drop`` for messages, ``op``/``done`` for local file
operations, ``view`` for listing changes (when enabled) and ``event`` for
scenario actions, which use ``*`` as node and ``----`` as tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

from .. import wire
from ..hierarchy_sync import HierarchySyncReply
from ..metadata import walk_files
from ..node import Join, LocalOp, Node, OpResult, Output, Send, SetTimer, Tick
from ..reachability import ReachabilityConfig
from ..simnet import Envelope, NetConfig, PartitionState, SimNet
from .checker import ConsistencyReport, check_consistency, view_line
from .format import Scenario, ScenarioEvent
from .invariants import check_node_invariants

QUIESCENCE_PERIODS = 20
# upper bound on waiting for queued operations to drain before quiescence
DRAIN_PERIODS = 400


class InvariantViolation(AssertionError):
    def __init__(self, tick: int, node: str, problems: list[str]) -> None:
        super().__init__(f"tick {tick} node {node}: " + "; ".join(problems))
        self.tick = tick
        self.node = node
        self.problems = problems


class ScenarioFailure(RuntimeError):
    """An invariant broke; ``prefix`` is the shortest event prefix that still breaks it."""

    def __init__(self, violation: InvariantViolation, prefix: list[ScenarioEvent]) -> None:
        lines = "\n".join(f"  {e}" for e in prefix)
        super().__init__(f"{violation}\nminimal prefix ({len(prefix)} events):\n{lines}")
        self.violation = violation
        self.prefix = prefix


def summarize(msg: wire.Message) -> str:
    if isinstance(msg, HierarchySyncReply):
        files = sum(1 for _ in walk_files(msg.owned_tree))
        return (f"HierarchySyncReply(provider_name={msg.provider_name!r}, "
                f"provider_hier_seq={msg.provider_hier_seq}, files={files})")
    return repr(msg)


class Simulation:
    def __init__(
        self,
        net_config: NetConfig = NetConfig(),
        reach_config: ReachabilityConfig = ReachabilityConfig(),
        *,
        quotas: Optional[dict[str, int]] = None,
        trace: bool = False,
        trace_views: bool = False,
        check_invariants: bool = False,
    ) -> None:
        self.net = SimNet(net_config)
        self.reach_config = reach_config
        self.quotas = dict(quotas or {})
        self.nodes: dict[str, Node] = {}
        self.joined: set[str] = set()
        self.tracing = trace or trace_views
        self.trace_views = trace_views
        self.check_invariants = check_invariants
        self.trace: list[str] = []
        self.reports: list[ConsistencyReport] = []
        self.on_action: Optional[Callable[[ScenarioEvent], None]] = None
        self._views: dict[str, str] = {}
        if self.tracing:
            self.net.on_drop = self._trace_drop

    # -- control ------------------------------------------------------------

    @property
    def now(self) -> int:
        return self.net.now

    @property
    def period(self) -> int:
        return self.reach_config.ping_period

    def states(self) -> dict[str, Any]:
        return {k: n.state for k, n in self.nodes.items()}

    def node_seed(self, node_id: str) -> int:
        return int(self.net.config.unit("node", node_id) * 2**32)

    def spawn(self, node_id: str, bootstrap_name: Optional[str] = None) -> Node:
        if node_id in self.nodes:
            raise ValueError(f"{node_id} already exists")
        node = Node(node_id, self.reach_config, self.node_seed(node_id),
                    quota=self.quotas.get(node_id))
        self.nodes[node_id] = node
        self._apply(node, node.start(self.now, bootstrap_name))
        self._after_step(node)
        return node

    def join(self, node_id: str, host_id: str) -> None:
        self.joined.add(node_id)
        self.deliver(node_id, Join(host_id))

    def local_op(self, node_id: str, op: LocalOp) -> None:
        if self.tracing:
            extra = f" {op.new_name}" if op.new_name else ""
            self.trace.append(f"{self.now} {node_id} op ---- {op.kind} {op.path}{extra}")
        self.deliver(node_id, op)

    def partition(self, groups: Iterable[Iterable[str]]) -> None:
        self.net.partition = PartitionState(groups)

    def heal(self) -> None:
        self.net.partition = PartitionState()

    def duplicate_next(self, node_id: str, tag: Optional[str] = None) -> None:
        self.net.duplicate_next(node_id, tag)

    def deliver(self, node_id: str, event: Any) -> None:
        node = self.nodes[node_id]
        done = len(node.results)
        self._apply(node, node.step(event, self.now))
        self._after_step(node, done)

    def run_until(self, tick: int) -> None:
        for _, item in self.net.advance(tick):
            if isinstance(item, Envelope):
                node = self.nodes.get(item.dst)
                if node is None:
                    continue
                if self.tracing:
                    self._trace_recv(item)
                self.deliver(item.dst, item)
            elif isinstance(item, ScenarioEvent):
                self.apply_event(item)
            else:
                node_id, tick_event = item
                self.deliver(node_id, tick_event)

    def run_for(self, ticks: int) -> None:
        self.run_until(self.now + ticks)

    def call(self, node_id: str, op: LocalOp, limit: Optional[int] = None) -> OpResult:
        """Issue an operation and run the network until it completes."""
        node = self.nodes[node_id]
        target = len(node.results) + len(node._queue) + (1 if node._call else 0) + 1
        self.local_op(node_id, op)
        deadline = self.now + (limit or 4 * node.call_timeout)
        while len(node.results) < target and self.now < deadline:
            self.run_until(self.now + 1)
        if len(node.results) < target:
            raise TimeoutError(f"{op} did not finish by tick {deadline}")
        return node.results[target - 1]

    def settle(self) -> None:
        """Let queued operations drain, then run a loss-free quiescence window."""
        limit = self.now + DRAIN_PERIODS * self.period
        while any(n.busy for n in self.nodes.values()) and self.now < limit:
            self.run_for(self.period)
        self.net.loss_enabled = False
        self.run_for(QUIESCENCE_PERIODS * self.period)

    def check(self, label: str = "final") -> ConsistencyReport:
        report = check_consistency(self.states(), self.net.partition, label=label,
                                   tick=self.now, must_join=self.joined)
        self.reports.append(report)
        return report

    # -- scenario events ------------------------------------------------------

    def schedule(self, event: ScenarioEvent) -> None:
        self.net.schedule(event.at_tick, event)

    def apply_event(self, ev: ScenarioEvent) -> None:
        if self.tracing:
            self.trace.append(f"{self.now} * event ---- {ev.action} {' '.join(ev.args)}".rstrip())
        a = ev.args
        if ev.action == "spawn":
            self.spawn(a[0], a[1] if len(a) > 1 else None)
        elif ev.action == "join":
            self.join(a[0], a[1])
        elif ev.action == "partition":
            self.partition(g.split(",") for g in a)
        elif ev.action == "heal":
            self.heal()
        elif ev.action == "create":
            self.local_op(a[0], LocalOp("create", a[1]))
        elif ev.action == "delete":
            self.local_op(a[0], LocalOp("delete", a[1]))
        elif ev.action == "rename":
            self.local_op(a[0], LocalOp("rename", a[1], a[2]))
        elif ev.action == "write":
            self.local_op(a[0], LocalOp("write", a[1], data=" ".join(a[2:]).encode()))
        elif ev.action == "read":
            self.local_op(a[0], LocalOp("read", a[1]))
        elif ev.action == "duplicate-next-message":
            self.duplicate_next(a[0], a[1] if len(a) > 1 else None)
        elif ev.action == "checkpoint":
            self.check(a[0])
        if self.on_action is not None:
            self.on_action(ev)

    # -- plumbing -------------------------------------------------------------

    def _apply(self, node: Node, outputs: list[Output]) -> None:
        for out in outputs:
            if isinstance(out, Send) and out.reliable:
                self.net.open_reliable(node.address, out.dst).send(out.tag, out.payload)
            elif isinstance(out, Send):
                self.net.send_datagram(Envelope(node.address, out.dst, out.tag, out.payload))
            elif isinstance(out, SetTimer):
                self.net.schedule(out.at, (node.address, Tick(out.kind, out.token)))

    def _after_step(self, node: Node, done: Optional[int] = None) -> None:
        if self.tracing and done is not None:
            for res in node.results[done:]:
                self.trace.append(f"{self.now} {node.address} done ---- "
                                  f"{res.op.kind} {res.op.path} {res.status.value}")
        if self.trace_views:
            line, sig = view_line(self.now, node.address, node.state)
            if self._views.get(node.address) != sig:
                self._views[node.address] = sig
                self.trace.append(line)
        if self.check_invariants:
            problems = check_node_invariants(node)
            if problems:
                raise InvariantViolation(self.now, node.address, problems)

    def _trace_recv(self, env: Envelope) -> None:
        try:
            text = summarize(wire.decode(env.protocol_tag, env.payload))
        except wire.WireError as exc:
            text = f"malformed({exc})"
        self.trace.append(f"{self.now} {env.dst} recv {env.protocol_tag} from={env.src} {text}")

    def _trace_drop(self, env: Envelope, reason: str) -> None:
        self.trace.append(f"{self.now} {env.dst} drop {env.protocol_tag} "
                          f"from={env.src} reason={reason}")


@dataclass
class RunResult:
    scenario: Scenario
    sim: Simulation
    reports: list[ConsistencyReport] = field(default_factory=list)

    @property
    def trace(self) -> list[str]:
        return self.sim.trace

    @property
    def final(self) -> ConsistencyReport:
        return self.reports[-1]

    @property
    def passed(self) -> bool:
        return all(r.converged for r in self.reports)

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)

    def report_text(self) -> str:
        return "\n".join(r.to_text() for r in self.reports)


def build_simulation(scenario: Scenario, net_config: NetConfig, **kwargs: Any) -> Simulation:
    reach = ReachabilityConfig(
        ping_period=scenario.ping_period or ReachabilityConfig.ping_period,
        inactivity_threshold=(scenario.inactivity_threshold
                              or ReachabilityConfig.inactivity_threshold),
    )
    return Simulation(net_config, reach, quotas=scenario.quotas, **kwargs)


def _execute(scenario: Scenario, net_config: NetConfig, **kwargs: Any) -> RunResult:
    sim = build_simulation(scenario, net_config, **kwargs)
    for ev in scenario.events:
        sim.schedule(ev)
    sim.run_until(scenario.last_tick)
    sim.settle()
    sim.check("final")
    return RunResult(scenario, sim, list(sim.reports))


def run(
    scenario: Scenario,
    net_config: Optional[NetConfig] = None,
    *,
    trace: bool = False,
    trace_views: bool = False,
    check_invariants: bool = False,
) -> RunResult:
    """Play a scenario to the end, settle, and check convergence.

    With ``check_invariants`` a broken node invariant raises
    :class:`ScenarioFailure` carrying the shortest failing event prefix.
    """
    if net_config is None:
        net_config = NetConfig(seed=scenario.seed or 0)
    kwargs = dict(trace=trace, trace_views=trace_views, check_invariants=check_invariants)
    try:
        return _execute(scenario, net_config, **kwargs)
    except InvariantViolation as violation:
        for n in range(1, len(scenario.events) + 1):
            try:
                _execute(scenario.prefix(n), net_config, check_invariants=True)
            except InvariantViolation as shorter:
                raise ScenarioFailure(shorter, scenario.events[:n]) from violation
        raise ScenarioFailure(violation, list(scenario.events)) from violation
