"""Per-member state machine.

:meth:`Node.step` takes one event (timer, envelope, join request or local
file operation) and returns what the node wants done: messages to send and
timers to arm. The node never reads a global clock; the tick passed in is
its own timer reading.

Local file operations block the node's operation slot while a remote call
is outstanding. Later operations queue behind it in arrival order; protocol
traffic keeps being served meanwhile.
"""

from __future__ import annotations

import logging
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional, Union

from . import wire
from .fileops import (
    FileOp,
    FileOpError,
    FileRequest,
    FileResponse,
    check_create,
    choose_owner,
    handle_file_request,
    logical_path,
    resolve_open,
    resolve_visible,
)
from .hierarchy_sync import (
    HierarchySyncReply,
    HierarchySyncRequest,
    apply_hierarchy_sync,
    handle_hierarchy_sync_request,
)
from .membership import (
    MemberSyncReply,
    MemberSyncRequest,
    NameReply,
    NameRequest,
    bootstrap,
    handle_member_sync_request,
    handle_name_reply,
    handle_name_request,
    merge_member_list,
)
from .metadata import (
    DEFAULT_PORT,
    FolderNode,
    HierarchyTree,
    MemberList,
    MemberName,
    Status,
    walk_files,
)
from .reachability import (
    PingMessage,
    ReachabilityConfig,
    on_period_elapsed,
    on_ping_received,
    on_ping_timer,
)
from .simnet import Envelope
from .storage import (
    GRANTED,
    BlobStore,
    DataRequest,
    DataResponse,
    MontReply,
    MontRequest,
    StorageError,
    handle_data_request,
    handle_mont_request,
)

log = logging.getLogger(__name__)

CALL_TIMEOUT_PERIODS = 10


@dataclass
class NodeState:
    address: str
    config: ReachabilityConfig = field(default_factory=ReachabilityConfig)
    rng: random.Random = field(default_factory=random.Random)
    port: int = DEFAULT_PORT
    name: Optional[MemberName] = None
    members: MemberList = field(default_factory=MemberList)
    tree: HierarchyTree = field(default_factory=HierarchyTree)
    store: BlobStore = field(default_factory=BlobStore)
    # name protocol bookkeeping: newcomer endpoint -> name handed out
    assigned: dict[str, MemberName] = field(default_factory=dict)
    next_suffix: int = 1


# -- events and effects -------------------------------------------------------


@dataclass(frozen=True)
class Tick:
    kind: str  # "ping" | "call-timeout"
    token: int = 0


@dataclass(frozen=True)
class Join:
    host_address: str
    host_port: int = DEFAULT_PORT


@dataclass(frozen=True)
class LocalOp:
    kind: str  # create | delete | rename | write | read
    path: str
    new_name: str = ""
    data: bytes = b""


Event = Union[Tick, Join, LocalOp, Envelope]


@dataclass(frozen=True)
class Send:
    dst: str
    tag: str
    payload: bytes
    reliable: bool = False


@dataclass(frozen=True)
class SetTimer:
    at: int
    kind: str
    token: int = 0


Output = Union[Send, SetTimer]


@dataclass
class OpResult:
    op: LocalOp
    status: Status
    started: int
    finished: int
    data: bytes = b""


@dataclass
class _Call:
    op: LocalOp
    started: int
    stage: str  # freq | mont | data
    request_id: int
    owner: MemberName
    owner_address: str
    physical_name: str = ""


class Node:
    def __init__(
        self,
        address: str,
        config: ReachabilityConfig = ReachabilityConfig(),
        seed: int = 0,
        port: int = DEFAULT_PORT,
        quota: Optional[int] = None,
    ) -> None:
        self.state = NodeState(address, config, random.Random(seed), port,
                               store=BlobStore(quota))
        self.stats: Counter[str] = Counter()
        self.results: list[OpResult] = []
        self.join_host: Optional[Join] = None
        self.mounted: set[MemberName] = set()
        self._call: Optional[_Call] = None
        self._queue: deque[LocalOp] = deque()
        self._request_ids = 0

    # -- convenience ------------------------------------------------------

    @property
    def address(self) -> str:
        return self.state.address

    @property
    def name(self) -> Optional[MemberName]:
        return self.state.name

    @property
    def busy(self) -> bool:
        return self._call is not None or bool(self._queue)

    @property
    def call_timeout(self) -> int:
        return CALL_TIMEOUT_PERIODS * self.state.config.ping_period

    def start(self, now: int, bootstrap_name: Optional[str] = None) -> list[Output]:
        """Power on: optionally self-name, and arm the ping timer."""
        if bootstrap_name is not None:
            bootstrap(self.state, bootstrap_name)
        return [SetTimer(now + self.state.config.ping_period, "ping")]

    # -- dispatch ---------------------------------------------------------

    def step(self, event: Event, now: int) -> list[Output]:
        if isinstance(event, Envelope):
            return self._on_envelope(event, now)
        if isinstance(event, Tick):
            if event.kind == "ping":
                return self._on_ping_timer(now)
            if event.kind == "call-timeout":
                return self._on_call_timeout(event.token, now)
            raise ValueError(f"unknown timer {event.kind!r}")
        if isinstance(event, Join):
            return self._on_join(event)
        if isinstance(event, LocalOp):
            self._queue.append(event)
            return self._pump(now)
        raise TypeError(f"unknown event {event!r}")

    def _send(self, dst: str, msg: wire.Message, reliable: bool = False) -> Send:
        tag, payload = wire.encode(msg)
        self.stats[f"out:{tag}"] += 1
        return Send(dst, tag, payload, reliable)

    def _on_join(self, event: Join) -> list[Output]:
        if self.state.name is not None:
            return []
        self.join_host = event
        return [self._name_request()]

    def _name_request(self) -> Send:
        st = self.state
        return self._send(self.join_host.host_address, NameRequest("", st.address, st.port))

    def _on_ping_timer(self, now: int) -> list[Output]:
        st = self.state
        out: list[Output] = [SetTimer(now + st.config.ping_period, "ping")]
        if st.name is None:
            if self.join_host is not None:
                out.append(self._name_request())
            return out
        for name in on_period_elapsed(st):
            self.stats["became_unreachable"] += 1
            log.debug("%s: %s unreachable at %d", st.name, name, now)
        for rec, ping in on_ping_timer(st):
            out.append(self._send(rec.address, ping))
        return out

    def _on_envelope(self, env: Envelope, now: int) -> list[Output]:
        self.stats[f"in:{env.protocol_tag}"] += 1
        try:
            msg = wire.decode(env.protocol_tag, env.payload)
        except wire.WireError:
            key = "unknown_tag" if env.protocol_tag not in wire.TAGS else "malformed"
            self.stats[f"dropped:{key}"] += 1
            return []
        st = self.state
        if st.name is None and not isinstance(msg, NameReply):
            self.stats["dropped:unnamed"] += 1
            return []

        if isinstance(msg, NameRequest):
            rep = handle_name_request(st, msg)
            return [self._send(msg.address, rep)] if rep else []
        if isinstance(msg, NameReply):
            host = self.join_host
            if host is None or host.host_address != env.src:
                return []
            handle_name_reply(st, msg, host.host_address, host.host_port)
            return self._pump(now)
        if isinstance(msg, PingMessage):
            sender = st.members.get(msg.sender_name)
            out: list[Output] = []
            for req in on_ping_received(st, msg):
                out.append(self._send(sender.address, req))
            return out
        if isinstance(msg, MemberSyncRequest):
            rep = handle_member_sync_request(st, msg)
            return [self._send(env.src, rep)] if rep else []
        if isinstance(msg, MemberSyncReply):
            if merge_member_list(st, msg):
                self.stats["member_syncs_applied"] += 1
            return []
        if isinstance(msg, HierarchySyncRequest):
            rep = handle_hierarchy_sync_request(st, msg)
            return [self._send(env.src, rep)] if rep else []
        if isinstance(msg, HierarchySyncReply):
            before = self._conflicted()
            if apply_hierarchy_sync(st, msg):
                self.stats["hier_syncs_applied"] += 1
                self._count_conflicts(before)
            else:
                self.stats["hier_syncs_ignored"] += 1
            return []
        if isinstance(msg, MontRequest):
            rep = handle_mont_request(st, msg)
            return [self._send(env.src, rep, reliable=True)] if rep else []
        if isinstance(msg, FileRequest):
            before = self._conflicted()
            rep = handle_file_request(st, msg)
            self._count_conflicts(before)
            return [self._send(env.src, rep, reliable=True)]
        if isinstance(msg, DataRequest):
            return [self._send(env.src, handle_data_request(st, msg), reliable=True)]
        if isinstance(msg, (FileResponse, MontReply, DataResponse)):
            return self._on_call_reply(msg, now)
        return []

    # -- blocking calls ---------------------------------------------------

    def _next_id(self) -> int:
        self._request_ids += 1
        return self._request_ids

    def _pump(self, now: int) -> list[Output]:
        """Run queued operations until one has to wait on the network."""
        out: list[Output] = []
        while self._call is None and self._queue:
            if self.state.name is None and self.join_host is not None:
                break  # joining; operations wait for the name
            out.extend(self._begin(self._queue.popleft(), now))
        return out

    def _finish(self, op: LocalOp, status: Status, started: int, now: int,
                data: bytes = b"") -> None:
        self.results.append(OpResult(op, status, started, now, data))
        self.stats[f"op:{op.kind}:{status.value}"] += 1

    def _call_out(self, op: LocalOp, now: int, stage: str, owner: MemberName,
                  msg_factory, physical_name: str = "") -> list[Output]:
        rid = self._next_id()
        address = self.state.members.get(owner).address
        self._call = _Call(op, now, stage, rid, owner, address, physical_name)
        msg = msg_factory(rid)
        return [self._send(address, msg, reliable=True),
                SetTimer(now + self.call_timeout, "call-timeout", rid)]

    def _begin(self, op: LocalOp, now: int) -> list[Output]:
        st = self.state
        if st.name is None:
            self._finish(op, Status.UNNAMED, now, now)
            return []
        try:
            if op.kind == "create":
                bad = check_create(st, op.path)
                if bad is not None:
                    self._finish(op, bad, now, now)
                    return []
                owner = choose_owner(st)
                req = FileRequest(FileOp.ADD, op.path, st.name)
                return self._dispatch_freq(op, now, owner, req)
            if op.kind in ("delete", "rename"):
                folder_path, entry = resolve_visible(st, op.path)
                path = logical_path(folder_path, entry)
                if op.kind == "delete":
                    req = FileRequest(FileOp.DELETE, path, st.name)
                else:
                    req = FileRequest(FileOp.RENAME, path, st.name, op.new_name)
                return self._dispatch_freq(op, now, entry.owner, req)
            if op.kind in ("write", "read"):
                owner, physical = resolve_open(st, op.path)
                if owner == st.name:
                    return self._local_data(op, now, physical)
                if owner not in self.mounted:
                    return self._call_out(op, now, "mont", owner,
                                          lambda rid: MontRequest(st.name), physical)
                return self._data_call(op, now, owner, physical)
        except FileOpError as exc:
            self._finish(op, exc.status, now, now)
            return []
        except ValueError:
            self._finish(op, Status.INVALID_PATH, now, now)
            return []
        raise ValueError(f"unknown operation {op.kind!r}")

    def _dispatch_freq(self, op: LocalOp, now: int, owner: MemberName,
                       req: FileRequest) -> list[Output]:
        if owner == self.state.name:
            before = self._conflicted()
            rep = handle_file_request(self.state, req)
            self._count_conflicts(before)
            self._finish(op, rep.status, now, now)
            return []
        return self._call_out(
            op, now, "freq", owner,
            lambda rid: FileRequest(req.op, req.path, req.requester, req.new_name, rid))

    def _local_data(self, op: LocalOp, now: int, physical: str) -> list[Output]:
        store = self.state.store
        try:
            if op.kind == "write":
                store.write(physical, op.data)
                self._finish(op, Status.OK, now, now)
            else:
                self._finish(op, Status.OK, now, now, store.read(physical))
        except StorageError as exc:
            self._finish(op, exc.status, now, now)
        return []

    def _data_call(self, op: LocalOp, now: int, owner: MemberName,
                   physical: str) -> list[Output]:
        name = self.state.name
        data = op.data if op.kind == "write" else b""
        return self._call_out(
            op, now, "data", owner,
            lambda rid: DataRequest(rid, op.kind, name, physical, data), physical)

    def _on_call_reply(self, msg, now: int) -> list[Output]:
        call = self._call
        if call is None:
            self.stats["stray_replies"] += 1
            return []
        if isinstance(msg, MontReply):
            if call.stage != "mont" or msg.owner_name != call.owner:
                self.stats["stray_replies"] += 1
                return []
            self._call = None
            if msg.status != GRANTED:
                self._finish(call.op, Status.NOT_GRANTED, call.started, now)
                return self._pump(now)
            self.mounted.add(call.owner)
            out = self._data_call(call.op, now, call.owner, call.physical_name)
            self._call.started = call.started
            return out
        expected = "freq" if isinstance(msg, FileResponse) else "data"
        if call.stage != expected or msg.request_id != call.request_id:
            self.stats["stray_replies"] += 1
            return []
        self._call = None
        data = msg.data if isinstance(msg, DataResponse) else b""
        self._finish(call.op, msg.status, call.started, now, data)
        return self._pump(now)

    def _on_call_timeout(self, token: int, now: int) -> list[Output]:
        call = self._call
        if call is None or call.request_id != token:
            return []
        self._call = None
        self._finish(call.op, Status.TIMEOUT, call.started, now)
        return self._pump(now)

    # -- bookkeeping ------------------------------------------------------

    def _conflicted(self) -> set[tuple[str, str, str]]:
        return {(p, e.logical_name, e.owner)
                for p, e in walk_files(self.state.tree.root) if e.conflicted}

    def _count_conflicts(self, before: set[tuple[str, str, str]]) -> None:
        after = self._conflicted()
        self.stats["conflicts_flagged"] += len(after - before)
        self.stats["conflicts_cleared"] += len(before - after)


def snapshot(node: Node) -> bytes:
    """Canonical bytes of the protocol state (no stats, no op log)."""
    st = node.state
    lines = [f"name={st.name} next_suffix={st.next_suffix}",
             f"members seq={st.members.seq}"]
    for r in st.members:
        lines.append(f"  {r.name} {r.address}:{r.port} reachable={r.reachable} "
                     f"missed={r.missed_pings} heard={r.heard} "
                     f"mseq={r.known_member_seq} hseq={r.known_hier_seq}")
    lines.append(f"assigned {sorted(st.assigned.items())}")
    tree = st.tree
    lines.append(f"tree own_seq={tree.own_seq} per_owner={sorted(tree.per_owner_seq.items())}")

    def dump(folder: FolderNode, depth: int) -> None:
        pad = "  " * depth
        for child in folder.children:
            if isinstance(child, FolderNode):
                lines.append(f"{pad}{child.name}/")
                dump(child, depth + 1)
            else:
                lines.append(f"{pad}{child.logical_name} owner={child.owner} "
                             f"phys={child.physical_name} conflicted={child.conflicted} "
                             f"sync={child.owner_sync_seq}")

    dump(tree.root, 1)
    store = st.store
    lines.append(f"store quota={store.quota} granted={sorted(store.granted)}")
    for k in sorted(store.blobs):
        lines.append(f"  {k} {store.blobs[k].hex()}")
    lines.append(f"mounted {sorted(node.mounted)}")
    return "\n".join(lines).encode()
