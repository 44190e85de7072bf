"""Shared domain types: members, member lists and the logical hierarchy.

Nothing in here talks to the network. Protocol modules mutate these
structures; the checker reads them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

SEP = "/"
DEFAULT_PORT = 7000
CONFLICT_MARKER = ".CONFLICT."

MemberName = str
SeqNum = int


class MetadataError(Exception):
    pass


class InvalidPath(MetadataError):
    pass


class DuplicateEntry(MetadataError):
    pass


class NameCollision(MetadataError):
    """A file and a folder would share a name inside one folder."""


class NotFound(MetadataError):
    pass


class Status(str, Enum):
    """Outcome codes shared by file requests, mounts and data access."""

    OK = "ok"
    NAME_CONFLICT = "name-conflict"
    INVALID_PATH = "invalid-path"
    NOT_OWNER = "not-owner"
    NO_MEMORY = "no-memory"
    TIMEOUT = "timeout"
    NOT_FOUND = "not-found"
    OWNER_UNREACHABLE = "owner-unreachable"
    NOT_GRANTED = "not-granted"
    QUOTA_EXCEEDED = "quota-exceeded"
    UNNAMED = "unnamed"


# -- members ----------------------------------------------------------------


@dataclass
class MemberRecord:
    name: MemberName
    address: str
    port: int = DEFAULT_PORT
    reachable: bool = True
    missed_pings: int = 0
    known_member_seq: SeqNum = 0
    known_hier_seq: SeqNum = 0
    # set when a ping arrives, cleared at each period boundary
    heard: bool = False


class MemberList:
    """Insertion-ordered member records plus a version number.

    ``seq`` moves only when a record is added.
    """

    def __init__(self) -> None:
        self._entries: dict[MemberName, MemberRecord] = {}
        self.seq: SeqNum = 0

    def add(self, record: MemberRecord) -> bool:
        if record.name in self._entries:
            return False
        self._entries[record.name] = record
        self.seq += 1
        return True

    def get(self, name: MemberName) -> Optional[MemberRecord]:
        return self._entries.get(name)

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[MemberRecord]:
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[MemberName]:
        return list(self._entries)


# -- hierarchy --------------------------------------------------------------


@dataclass
class FileEntry:
    logical_name: str
    owner: MemberName
    physical_name: str
    conflicted: bool = False
    owner_sync_seq: SeqNum = 0


@dataclass
class FolderNode:
    name: str
    children: list[Union["FolderNode", FileEntry]] = field(default_factory=list)

    def folders(self) -> Iterator["FolderNode"]:
        return (c for c in self.children if isinstance(c, FolderNode))

    def files(self) -> Iterator[FileEntry]:
        return (c for c in self.children if isinstance(c, FileEntry))

    def folder(self, name: str) -> Optional["FolderNode"]:
        for child in self.folders():
            if child.name == name:
                return child
        return None

    def file(self, logical_name: str, owner: MemberName) -> Optional[FileEntry]:
        for entry in self.files():
            if entry.logical_name == logical_name and entry.owner == owner:
                return entry
        return None

    def file_by_display(self, name: str) -> Optional[FileEntry]:
        for entry in self.files():
            if display_name(entry) == name:
                return entry
        return None


Node = Union[FolderNode, FileEntry]


@dataclass
class HierarchyTree:
    root: FolderNode = field(default_factory=lambda: FolderNode(SEP))
    local: Optional[MemberName] = None
    own_seq: SeqNum = 0
    per_owner_seq: dict[MemberName, SeqNum] = field(default_factory=dict)

    def bump(self, owner: MemberName) -> None:
        if owner == self.local:
            self.own_seq += 1


def split_path(path: str) -> list[str]:
    """Components of an absolute path; ``"/"`` gives ``[]``."""
    if not path.startswith(SEP):
        raise InvalidPath(f"not absolute: {path!r}")
    if path == SEP:
        return []
    parts = path[1:].split(SEP)
    for part in parts:
        if not part or part in (".", ".."):
            raise InvalidPath(f"bad component in {path!r}")
    return parts


def join_path(parts: list[str]) -> str:
    return SEP + SEP.join(parts)


def parent_and_name(path: str) -> tuple[str, str]:
    parts = split_path(path)
    if not parts:
        raise InvalidPath("root has no name")
    return join_path(parts[:-1]), parts[-1]


def display_name(entry: FileEntry) -> str:
    if not entry.conflicted:
        return entry.logical_name
    return entry.logical_name + CONFLICT_MARKER + entry.owner.replace(SEP, "-")


def find_folder(tree: HierarchyTree, path: str) -> Optional[FolderNode]:
    folder = tree.root
    for part in split_path(path):
        folder = folder.folder(part)
        if folder is None:
            return None
    return folder


def lookup(tree: HierarchyTree, path: str) -> Optional[Node]:
    """Walk ``path`` from the root. Files match by display name.

    Returns None when a component is missing.
    """
    parts = split_path(path)
    if not parts:
        return tree.root
    folder = find_folder(tree, join_path(parts[:-1]))
    if folder is None:
        return None
    last = parts[-1]
    return folder.folder(last) or folder.file_by_display(last)


def ensure_folder(tree: HierarchyTree, path: str) -> FolderNode:
    folder = tree.root
    for part in split_path(path):
        child = folder.folder(part)
        if child is None:
            if any(e.logical_name == part for e in folder.files()):
                raise NameCollision(f"{part!r} is a file in {folder.name!r}")
            child = FolderNode(part)
            folder.children.append(child)
        folder = child
    return folder


def recompute_conflicts(folder: FolderNode) -> int:
    """Reset conflict flags under ``folder`` (recursively) from scratch.

    Returns how many flags flipped.
    """
    owners: dict[str, set[MemberName]] = {}
    for entry in folder.files():
        owners.setdefault(entry.logical_name, set()).add(entry.owner)
    flips = 0
    for entry in folder.files():
        flag = len(owners[entry.logical_name]) > 1
        if flag != entry.conflicted:
            entry.conflicted = flag
            flips += 1
    for sub in folder.folders():
        flips += recompute_conflicts(sub)
    return flips


def insert_entry(tree: HierarchyTree, folder_path: str, entry: FileEntry) -> None:
    if not entry.logical_name or SEP in entry.logical_name:
        raise InvalidPath(f"bad file name {entry.logical_name!r}")
    folder = ensure_folder(tree, folder_path)
    if folder.file(entry.logical_name, entry.owner) is not None:
        raise DuplicateEntry(f"{entry.logical_name!r} owned by {entry.owner!r}")
    if folder.folder(entry.logical_name) is not None:
        raise NameCollision(f"{entry.logical_name!r} is a folder")
    folder.children.append(entry)
    recompute_conflicts(folder)
    tree.bump(entry.owner)


def remove_entry(
    tree: HierarchyTree, folder_path: str, logical_name: str, owner: MemberName
) -> Optional[FileEntry]:
    folder = find_folder(tree, folder_path)
    if folder is None:
        return None
    entry = folder.file(logical_name, owner)
    if entry is None:
        return None
    folder.children.remove(entry)
    recompute_conflicts(folder)
    tree.bump(owner)
    return entry


def rename_entry(
    tree: HierarchyTree,
    folder_path: str,
    logical_name: str,
    owner: MemberName,
    new_name: str,
) -> FileEntry:
    if not new_name or SEP in new_name:
        raise InvalidPath(f"bad file name {new_name!r}")
    folder = find_folder(tree, folder_path)
    entry = folder.file(logical_name, owner) if folder else None
    if entry is None:
        raise InvalidPath(f"{folder_path}/{logical_name} not owned by {owner!r}")
    if folder.file(new_name, owner) is not None:
        raise DuplicateEntry(f"{new_name!r} owned by {owner!r}")
    if folder.folder(new_name) is not None:
        raise NameCollision(f"{new_name!r} is a folder")
    entry.logical_name = new_name
    recompute_conflicts(folder)
    tree.bump(owner)
    return entry


def walk_files(folder: FolderNode, prefix: str = "") -> Iterator[tuple[str, FileEntry]]:
    """Yield ``(folder_path, entry)`` pairs depth-first in child order."""
    here = prefix or SEP
    for child in folder.children:
        if isinstance(child, FileEntry):
            yield here, child
        else:
            yield from walk_files(child, prefix + SEP + child.name)


def walk_folders(folder: FolderNode, prefix: str = "") -> Iterator[tuple[str, FolderNode]]:
    yield prefix or SEP, folder
    for child in folder.folders():
        yield from walk_folders(child, prefix + SEP + child.name)
