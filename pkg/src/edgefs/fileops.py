"""File requests (``freq``): owner selection, owner-side mutation, open.

Only a file's owner mutates its entry. Requesters validate locally, pick
or look up the owner and forward a :class:`FileRequest`; the node layer
does the blocking and the network round trip.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from .metadata import (
    SEP,
    FileEntry,
    FolderNode,
    InvalidPath,
    MemberName,
    NameCollision,
    Status,
    find_folder,
    insert_entry,
    join_path,
    remove_entry,
    rename_entry,
    split_path,
)
from .reachability import entry_visible

if TYPE_CHECKING:
    from .node import NodeState


class FileOp(str, Enum):
    ADD = "add"
    DELETE = "delete"
    RENAME = "rename"


@dataclass(frozen=True)
class FileRequest:
    op: FileOp
    path: str
    requester: MemberName
    new_name: str = ""
    request_id: int = 0

    def __post_init__(self) -> None:
        if (self.op == FileOp.RENAME) != bool(self.new_name):
            raise ValueError("new_name is required for rename and only for rename")


@dataclass(frozen=True)
class FileResponse:
    status: Status
    request_id: int = 0

    @property
    def ok(self) -> bool:
        return self.status == Status.OK


class FileOpError(Exception):
    def __init__(self, status: Status) -> None:
        super().__init__(status.value)
        self.status = status


def _valid_name(name: str) -> bool:
    return bool(name) and SEP not in name and name not in (".", "..")


def _visible_clash(state: NodeState, folder: FolderNode, name: str) -> bool:
    """Is ``name`` taken in ``folder`` from this node's point of view?"""
    if folder.folder(name) is not None:
        return True
    for entry in folder.files():
        if entry.logical_name != name:
            continue
        if entry_visible(entry, state.name, state.members):
            return True
    return False


def _split(path: str) -> tuple[str, str]:
    parts = split_path(path)
    if not parts:
        raise InvalidPath("root")
    return join_path(parts[:-1]), parts[-1]


def _folder_for(state: NodeState, folder_path: str) -> FolderNode | None:
    """Existing folder, or None if it would be created; files in the way raise."""
    folder = state.tree.root
    for part in split_path(folder_path):
        child = folder.folder(part)
        if child is None:
            if any(e.logical_name == part and entry_visible(e, state.name, state.members)
                   for e in folder.files()):
                raise InvalidPath(part)
            return None
        folder = child
    return folder


# -- requester side ---------------------------------------------------------


def check_create(state: NodeState, path: str) -> Status | None:
    """Local validation before a create leaves this node."""
    try:
        folder_path, name = _split(path)
        folder = _folder_for(state, folder_path)
    except InvalidPath:
        return Status.INVALID_PATH
    if folder is not None and _visible_clash(state, folder, name):
        return Status.NAME_CONFLICT
    return None


def choose_owner(state: NodeState) -> MemberName:
    """Uniform pick among reachable members, this one included."""
    candidates = [r.name for r in state.members if r.reachable or r.name == state.name]
    return state.rng.choice(candidates)


def resolve_visible(state: NodeState, path: str) -> tuple[str, FileEntry]:
    """Map a displayed path to ``(folder_path, entry)``; raises FileOpError."""
    try:
        folder_path, name = _split(path)
    except InvalidPath:
        raise FileOpError(Status.INVALID_PATH) from None
    folder = find_folder(state.tree, folder_path)
    entry = folder.file_by_display(name) if folder else None
    if entry is None or not entry_visible(entry, state.name, state.members):
        raise FileOpError(Status.NOT_FOUND)
    return folder_path, entry


def logical_path(folder_path: str, entry: FileEntry) -> str:
    return join_path(split_path(folder_path) + [entry.logical_name])


def resolve_open(state: NodeState, path: str) -> tuple[MemberName, str]:
    """Logical to physical: ``(owner, physical_name)`` for a visible file."""
    try:
        folder_path, name = _split(path)
    except InvalidPath:
        raise FileOpError(Status.INVALID_PATH) from None
    folder = find_folder(state.tree, folder_path)
    entry = folder.file_by_display(name) if folder else None
    if entry is None:
        raise FileOpError(Status.NOT_FOUND)
    if not entry_visible(entry, state.name, state.members):
        raise FileOpError(Status.OWNER_UNREACHABLE)
    return entry.owner, entry.physical_name


# -- owner side -------------------------------------------------------------


def handle_file_request(state: NodeState, req: FileRequest) -> FileResponse:
    """Apply an add/delete/rename to a file this node owns (or will own).

    Every step is local. Replays of a request that already took effect
    answer ``ok`` without touching the tree again.
    """
    def reply(status: Status) -> FileResponse:
        return FileResponse(status, req.request_id)

    me = state.name
    try:
        folder_path, name = _split(req.path)
    except InvalidPath:
        return reply(Status.INVALID_PATH)
    if not _valid_name(name):
        return reply(Status.INVALID_PATH)
    folder = find_folder(state.tree, folder_path)

    if req.op == FileOp.ADD:
        if folder is not None:
            if folder.file(name, me) is not None:
                return reply(Status.OK)
            if _visible_clash(state, folder, name):
                return reply(Status.NAME_CONFLICT)
        if state.store.full():
            return reply(Status.NO_MEMORY)
        physical = f"{state.tree.own_seq}_{name}"
        try:
            insert_entry(state.tree, folder_path, FileEntry(name, me, physical))
        except NameCollision:
            return reply(Status.INVALID_PATH)
        state.store.create(physical)
        return reply(Status.OK)

    entry = folder.file(name, me) if folder is not None else None
    someone_else = folder is not None and any(
        e.logical_name == name and e.owner != me for e in folder.files())

    if req.op == FileOp.DELETE:
        if entry is None:
            return reply(Status.NOT_OWNER if someone_else else Status.OK)
        remove_entry(state.tree, folder_path, name, me)
        state.store.remove(entry.physical_name)
        return reply(Status.OK)

    # rename
    new_name = req.new_name
    if not _valid_name(new_name):
        return reply(Status.INVALID_PATH)
    if entry is None:
        if folder is not None and folder.file(new_name, me) is not None:
            return reply(Status.OK)
        return reply(Status.NOT_OWNER if someone_else else Status.INVALID_PATH)
    if new_name == name:
        return reply(Status.OK)
    if _visible_clash(state, folder, new_name) or folder.file(new_name, me) is not None:
        return reply(Status.NAME_CONFLICT)
    rename_entry(state.tree, folder_path, name, me, new_name)
    return reply(Status.OK)

