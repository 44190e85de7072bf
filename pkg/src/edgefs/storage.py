"""In-memory blob store standing in for the per-owner NFS export.

Blobs are addressed by physical name and written whole; the last write
delivered to the owner wins. Remote access is gated by the ``mont``
handshake: only members that asked (and are known) get in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

from .metadata import MemberName, Status

if TYPE_CHECKING:
    from .node import NodeState

GRANTED = "granted"
IGNORED = "ignored"


class StorageError(Exception):
    def __init__(self, status: Status, detail: str = "") -> None:
        super().__init__(f"{status.value}: {detail}" if detail else status.value)
        self.status = status


@dataclass(frozen=True)
class MontRequest:
    requester_name: MemberName


@dataclass(frozen=True)
class MontReply:
    owner_name: MemberName
    status: str = GRANTED


@dataclass(frozen=True)
class DataRequest:
    request_id: int
    op: str  # "read" | "write"
    requester: MemberName
    physical_name: str
    data: bytes = b""


@dataclass(frozen=True)
class DataResponse:
    request_id: int
    status: Status
    data: bytes = b""


@dataclass
class BlobStore:
    quota: Optional[int] = None
    blobs: dict[str, bytes] = field(default_factory=dict)
    granted: set[MemberName] = field(default_factory=set)

    def used(self) -> int:
        return sum(len(b) for b in self.blobs.values())

    def full(self) -> bool:
        return self.quota is not None and self.used() >= self.quota

    def create(self, physical_name: str) -> None:
        self.blobs.setdefault(physical_name, b"")

    def remove(self, physical_name: str) -> None:
        self.blobs.pop(physical_name, None)

    def read(self, physical_name: str) -> bytes:
        try:
            return self.blobs[physical_name]
        except KeyError:
            raise StorageError(Status.NOT_FOUND, physical_name) from None

    def write(self, physical_name: str, data: bytes) -> None:
        if physical_name not in self.blobs:
            raise StorageError(Status.NOT_FOUND, physical_name)
        if self.quota is not None:
            after = self.used() - len(self.blobs[physical_name]) + len(data)
            if after > self.quota:
                raise StorageError(Status.QUOTA_EXCEEDED, f"{after} > {self.quota}")
        self.blobs[physical_name] = bytes(data)


def handle_mont_request(state: NodeState, req: MontRequest) -> Optional[MontReply]:
    """Grant access to a known member; stay silent for strangers."""
    if state.name is None or req.requester_name not in state.members:
        return None
    state.store.granted.add(req.requester_name)
    return MontReply(state.name, GRANTED)


def _check_grant(state: NodeState, requester: MemberName) -> None:
    if requester != state.name and requester not in state.store.granted:
        raise StorageError(Status.NOT_GRANTED, requester)


def remote_read(state: NodeState, requester: MemberName, physical_name: str) -> bytes:
    _check_grant(state, requester)
    return state.store.read(physical_name)


def remote_write(
    state: NodeState, requester: MemberName, physical_name: str, data: bytes
) -> None:
    _check_grant(state, requester)
    state.store.write(physical_name, data)


def handle_data_request(state: NodeState, req: DataRequest) -> DataResponse:
    try:
        if req.op == "read":
            data = remote_read(state, req.requester, req.physical_name)
            return DataResponse(req.request_id, Status.OK, data)
        if req.op == "write":
            remote_write(state, req.requester, req.physical_name, req.data)
            return DataResponse(req.request_id, Status.OK)
    except StorageError as exc:
        return DataResponse(req.request_id, exc.status)
    return DataResponse(req.request_id, Status.INVALID_PATH)
