"""Byte encoding of protocol messages.

A frame is the 4-byte protocol tag followed by the payload. Payload
fields are written in declaration order: integers as 8-byte big-endian
unsigned, strings and blobs as an 8-byte length followed by the bytes
(UTF-8 for strings). Tags that carry several message types start their
payload with an integer discriminator.

=====  ====  ==============================================================
tag    kind  fields after the discriminator
=====  ====  ==============================================================
name   0     placeholder_name:str, address:str, port:int
name   1     assigned_name:str, host_name:str
ping   --    sender_name:str, member_seq:int, hier_seq:int  (no kind)
sync   0     requester_name:str                          member request
sync   1     provider:str, seq:int, n:int, n*(name:str, address:str, port:int)
sync   2     requester_name:str                          hierarchy request
sync   3     provider:str, seq:int, tree
mont   0     requester_name:str
mont   1     owner_name:str, status:str
freq   0     request_id:int, op:str, path:str, new_name:str, requester:str
freq   1     request_id:int, status:str
data   0     request_id:int, op:str, requester:str, physical_name:str, data:blob
data   1     request_id:int, status:str, data:blob
=====  ====  ==============================================================

``tree`` is a folder record: ``0, name:str, n:int`` then ``n`` children,
each either a folder record or a file record ``1, logical:str, owner:str,
physical:str``.
"""

from __future__ import annotations

import struct
from typing import Union

from .fileops import FileOp, FileRequest, FileResponse
from .hierarchy_sync import HierarchySyncReply, HierarchySyncRequest
from .membership import MemberSyncReply, MemberSyncRequest, NameReply, NameRequest
from .metadata import FileEntry, FolderNode, Status
from .reachability import PingMessage
from .storage import DataRequest, DataResponse, MontReply, MontRequest

Message = Union[
    NameRequest, NameReply, PingMessage, MemberSyncRequest, MemberSyncReply,
    HierarchySyncRequest, HierarchySyncReply, MontRequest, MontReply,
    FileRequest, FileResponse, DataRequest, DataResponse,
]

TAGS = ("name", "ping", "sync", "mont", "freq", "data")
_U64 = struct.Struct(">Q")
_FOLDER, _FILE = 0, 1


class WireError(ValueError):
    pass


class _Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def int(self, value: int) -> "_Writer":
        self.parts.append(_U64.pack(value))
        return self

    def blob(self, data: bytes) -> "_Writer":
        self.parts.append(_U64.pack(len(data)))
        self.parts.append(data)
        return self

    def str(self, text: str) -> "_Writer":
        return self.blob(text.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def int(self) -> int:
        end = self.pos + 8
        if end > len(self.data):
            raise WireError("truncated integer")
        (value,) = _U64.unpack_from(self.data, self.pos)
        self.pos = end
        return value

    def blob(self) -> bytes:
        size = self.int()
        end = self.pos + size
        if end > len(self.data):
            raise WireError("truncated field")
        out = self.data[self.pos:end]
        self.pos = end
        return bytes(out)

    def str(self) -> str:
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WireError(str(exc)) from None

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise WireError(f"{len(self.data) - self.pos} trailing bytes")


def _write_tree(w: _Writer, folder: FolderNode) -> None:
    w.int(_FOLDER).str(folder.name).int(len(folder.children))
    for child in folder.children:
        if isinstance(child, FolderNode):
            _write_tree(w, child)
        else:
            w.int(_FILE).str(child.logical_name).str(child.owner).str(child.physical_name)


def _read_node(r: _Reader, depth: int = 0) -> Union[FolderNode, FileEntry]:
    if depth > 256:
        raise WireError("tree too deep")
    kind = r.int()
    if kind == _FILE:
        return FileEntry(r.str(), r.str(), r.str())
    if kind != _FOLDER:
        raise WireError(f"bad tree node kind {kind}")
    name = r.str()
    count = r.int()
    if count > len(r.data):
        raise WireError("implausible child count")
    return FolderNode(name, [_read_node(r, depth + 1) for _ in range(count)])


def encode(msg: Message) -> tuple[str, bytes]:
    """Return ``(tag, payload)`` for a message."""
    w = _Writer()
    if isinstance(msg, NameRequest):
        w.int(0).str(msg.placeholder_name).str(msg.address).int(msg.port)
        return "name", w.getvalue()
    if isinstance(msg, NameReply):
        w.int(1).str(msg.assigned_name).str(msg.host_name)
        return "name", w.getvalue()
    if isinstance(msg, PingMessage):
        w.str(msg.sender_name).int(msg.member_seq).int(msg.hier_seq)
        return "ping", w.getvalue()
    if isinstance(msg, MemberSyncRequest):
        w.int(0).str(msg.requester_name)
        return "sync", w.getvalue()
    if isinstance(msg, MemberSyncReply):
        w.int(1).str(msg.provider_name).int(msg.provider_seq).int(len(msg.members))
        for name, address, port in msg.members:
            w.str(name).str(address).int(port)
        return "sync", w.getvalue()
    if isinstance(msg, HierarchySyncRequest):
        w.int(2).str(msg.requester_name)
        return "sync", w.getvalue()
    if isinstance(msg, HierarchySyncReply):
        w.int(3).str(msg.provider_name).int(msg.provider_hier_seq)
        _write_tree(w, msg.owned_tree)
        return "sync", w.getvalue()
    if isinstance(msg, MontRequest):
        w.int(0).str(msg.requester_name)
        return "mont", w.getvalue()
    if isinstance(msg, MontReply):
        w.int(1).str(msg.owner_name).str(msg.status)
        return "mont", w.getvalue()
    if isinstance(msg, FileRequest):
        w.int(0).int(msg.request_id).str(msg.op.value).str(msg.path)
        w.str(msg.new_name).str(msg.requester)
        return "freq", w.getvalue()
    if isinstance(msg, FileResponse):
        w.int(1).int(msg.request_id).str(msg.status.value)
        return "freq", w.getvalue()
    if isinstance(msg, DataRequest):
        w.int(0).int(msg.request_id).str(msg.op).str(msg.requester)
        w.str(msg.physical_name).blob(msg.data)
        return "data", w.getvalue()
    if isinstance(msg, DataResponse):
        w.int(1).int(msg.request_id).str(msg.status.value).blob(msg.data)
        return "data", w.getvalue()
    raise TypeError(f"cannot encode {type(msg).__name__}")


def _status(text: str) -> Status:
    try:
        return Status(text)
    except ValueError:
        raise WireError(f"unknown status {text!r}") from None


def decode(tag: str, payload: bytes) -> Message:
    """Inverse of :func:`encode`. Raises WireError on anything malformed."""
    r = _Reader(payload)
    msg: Message
    if tag == "ping":
        msg = PingMessage(r.str(), r.int(), r.int())
        r.finish()
        return msg
    if tag not in TAGS:
        raise WireError(f"unknown tag {tag!r}")
    kind = r.int()
    if tag == "name" and kind == 0:
        msg = NameRequest(r.str(), r.str(), r.int())
    elif tag == "name" and kind == 1:
        msg = NameReply(r.str(), r.str())
    elif tag == "sync" and kind == 0:
        msg = MemberSyncRequest(r.str())
    elif tag == "sync" and kind == 1:
        provider, seq, count = r.str(), r.int(), r.int()
        if count > len(payload):
            raise WireError("implausible member count")
        members = tuple((r.str(), r.str(), r.int()) for _ in range(count))
        msg = MemberSyncReply(provider, seq, members)
    elif tag == "sync" and kind == 2:
        msg = HierarchySyncRequest(r.str())
    elif tag == "sync" and kind == 3:
        provider, seq = r.str(), r.int()
        tree = _read_node(r)
        if not isinstance(tree, FolderNode):
            raise WireError("tree root is not a folder")
        msg = HierarchySyncReply(provider, seq, tree)
    elif tag == "mont" and kind == 0:
        msg = MontRequest(r.str())
    elif tag == "mont" and kind == 1:
        msg = MontReply(r.str(), r.str())
    elif tag == "freq" and kind == 0:
        request_id, op = r.int(), r.str()
        path, new_name, requester = r.str(), r.str(), r.str()
        try:
            msg = FileRequest(FileOp(op), path, requester, new_name, request_id)
        except ValueError as exc:
            raise WireError(str(exc)) from None
    elif tag == "freq" and kind == 1:
        request_id = r.int()
        msg = FileResponse(_status(r.str()), request_id)
    elif tag == "data" and kind == 0:
        msg = DataRequest(r.int(), r.str(), r.str(), r.str(), r.blob())
    elif tag == "data" and kind == 1:
        request_id, status = r.int(), _status(r.str())
        msg = DataResponse(request_id, status, r.blob())
    else:
        raise WireError(f"unknown {tag} kind {kind}")
    r.finish()
    return msg


def encode_frame(msg: Message) -> bytes:
    tag, payload = encode(msg)
    return tag.encode("ascii") + payload


def decode_frame(frame: bytes) -> Message:
    if len(frame) < 4:
        raise WireError("short frame")
    return decode(frame[:4].decode("ascii", "replace"), frame[4:])


def kind_of(tag: str, payload: bytes) -> str:
    """Coarse message kind (``"sync-reply"``, ``"freq-request"``...) without a full decode."""
    if tag == "ping":
        return "ping"
    if len(payload) < 8:
        return tag
    kind = _U64.unpack_from(payload)[0]
    if tag == "sync":
        return "sync-request" if kind in (0, 2) else "sync-reply"
    return f"{tag}-request" if kind == 0 else f"{tag}-reply"
