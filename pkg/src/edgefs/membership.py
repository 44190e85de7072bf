"""Joining (``name`` protocol) and member-list propagation (``sync``).

A host names a newcomer by appending ``/<n>`` to its own name, where ``n``
is a host-local counter. Since the host's name is unique and prefixes the
new one, uniqueness holds inductively.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from .metadata import DEFAULT_PORT, SEP, MemberName, MemberRecord, SeqNum

if TYPE_CHECKING:
    from .node import NodeState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NameRequest:
    placeholder_name: str
    address: str
    port: int = DEFAULT_PORT


@dataclass(frozen=True)
class NameReply:
    assigned_name: MemberName
    host_name: MemberName


@dataclass(frozen=True)
class MemberSyncRequest:
    requester_name: MemberName


@dataclass(frozen=True)
class MemberSyncReply:
    provider_name: MemberName
    provider_seq: SeqNum
    members: tuple[tuple[MemberName, str, int], ...]


def validate_bootstrap_name(name: str) -> None:
    if not name or SEP in name or any(c.isspace() for c in name):
        raise ValueError(f"bad bootstrap name {name!r}")


def bootstrap(state: NodeState, name: MemberName) -> None:
    """Name the very first member of a system."""
    validate_bootstrap_name(name)
    _adopt_name(state, name)


def _adopt_name(state: NodeState, name: MemberName) -> None:
    state.name = name
    state.tree.local = name
    state.members.add(MemberRecord(name, state.address, state.port))


def handle_name_request(state: NodeState, req: NameRequest) -> Optional[NameReply]:
    if state.name is None:
        return None
    key = f"{req.address}:{req.port}"
    assigned = state.assigned.get(key)
    if assigned is None:
        # retransmitted requests from one endpoint must not mint ghost members
        assigned = f"{state.name}{SEP}{state.next_suffix}"
        state.next_suffix += 1
        state.assigned[key] = assigned
        state.members.add(MemberRecord(assigned, req.address, req.port))
    return NameReply(assigned, state.name)


def handle_name_reply(state: NodeState, rep: NameReply, host_address: str,
                      host_port: int = DEFAULT_PORT) -> bool:
    if state.name is not None:
        return False
    if not rep.assigned_name.startswith(rep.host_name + SEP):
        log.warning("assigned name %r does not extend host name %r",
                    rep.assigned_name, rep.host_name)
    _adopt_name(state, rep.assigned_name)
    state.members.add(MemberRecord(rep.host_name, host_address, host_port))
    return True


def handle_member_sync_request(
    state: NodeState, req: MemberSyncRequest
) -> Optional[MemberSyncReply]:
    if state.name is None or req.requester_name not in state.members:
        return None
    members = tuple((r.name, r.address, r.port) for r in state.members)
    return MemberSyncReply(state.name, state.members.seq, members)


def merge_member_list(state: NodeState, rep: MemberSyncReply) -> bool:
    """Union the provider's list into ours. True iff our seq moved."""
    if state.name is None:
        return False
    before = state.members.seq
    threshold = state.config.inactivity_threshold
    for name, address, port in rep.members:
        if name not in state.members:
            # not heard from yet: unreachable until its first ping arrives
            state.members.add(MemberRecord(
                name, address, port, reachable=False, missed_pings=threshold))
    provider = state.members.get(rep.provider_name)
    if provider is not None:
        provider.known_member_seq = max(provider.known_member_seq, rep.provider_seq)
    return state.members.seq != before
