"""Device reachability: periodic pings, inactivity marking, visibility.

A member counts as unreachable once ``inactivity_threshold`` consecutive
ping periods pass without a ping from it. Hiding is purely a read-side
rule over the tree, so entries of unreachable owners stay in place and
reappear unchanged when a ping comes back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, Union

from .hierarchy_sync import HierarchySyncRequest
from .membership import MemberSyncRequest
from .metadata import (
    FileEntry,
    FolderNode,
    HierarchyTree,
    MemberList,
    MemberName,
    MemberRecord,
    NotFound,
    SeqNum,
    display_name,
    find_folder,
    lookup,
    walk_files,
)

if TYPE_CHECKING:
    from .node import NodeState

SyncTrigger = Union[MemberSyncRequest, HierarchySyncRequest]


@dataclass(frozen=True)
class PingMessage:
    sender_name: MemberName
    member_seq: SeqNum
    hier_seq: SeqNum


@dataclass(frozen=True)
class ReachabilityConfig:
    ping_period: int = 5
    inactivity_threshold: int = 4

    def __post_init__(self) -> None:
        if self.ping_period < 1 or self.inactivity_threshold < 1:
            raise ValueError("ping_period and inactivity_threshold must be >= 1")


def on_ping_timer(state: NodeState) -> list[tuple[MemberRecord, PingMessage]]:
    """One ping per known member, unreachable ones included."""
    if state.name is None:
        return []
    ping = PingMessage(state.name, state.members.seq, state.tree.own_seq)
    return [(rec, ping) for rec in state.members if rec.name != state.name]


def on_ping_received(state: NodeState, msg: PingMessage) -> list[SyncTrigger]:
    if state.name is None:
        return []
    rec = state.members.get(msg.sender_name)
    if rec is None or rec.name == state.name:
        return []
    rec.missed_pings = 0
    rec.heard = True
    rec.reachable = True
    out: list[SyncTrigger] = []
    if msg.member_seq > rec.known_member_seq:
        out.append(MemberSyncRequest(state.name))
    if msg.hier_seq > rec.known_hier_seq:
        out.append(HierarchySyncRequest(state.name))
    return out


def on_period_elapsed(state: NodeState) -> list[MemberName]:
    """Close the current ping period; return members that just went dark."""
    threshold = state.config.inactivity_threshold
    lost = []
    for rec in state.members:
        if rec.name == state.name:
            continue
        if rec.heard:
            rec.heard = False
            continue
        rec.missed_pings = min(rec.missed_pings + 1, threshold)
        if rec.missed_pings >= threshold and rec.reachable:
            rec.reachable = False
            lost.append(rec.name)
    return lost


def entry_visible(entry: FileEntry, local: MemberName | None, members: MemberList) -> bool:
    if entry.owner == local:
        return True
    rec = members.get(entry.owner)
    return rec is not None and rec.reachable


def visible(tree: HierarchyTree, member_list: MemberList, path: str) -> bool:
    node = lookup(tree, path)
    if node is None:
        raise NotFound(path)
    if isinstance(node, FolderNode):
        return True
    return entry_visible(node, tree.local, member_list)


def list_folder(state: NodeState, path: str) -> list[str]:
    """Display names of the visible children of a folder."""
    folder = find_folder(state.tree, path)
    if folder is None:
        raise NotFound(path)
    names = []
    for child in folder.children:
        if isinstance(child, FolderNode):
            names.append(child.name)
        elif entry_visible(child, state.name, state.members):
            names.append(display_name(child))
    return names


def visible_files(state: NodeState) -> Iterator[tuple[str, FileEntry]]:
    for folder_path, entry in walk_files(state.tree.root):
        if entry_visible(entry, state.name, state.members):
            yield folder_path, entry


def reachable_names(state: NodeState) -> list[MemberName]:
    return [r.name for r in state.members if r.reachable or r.name == state.name]
