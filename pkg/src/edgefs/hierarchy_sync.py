"""Hierarchy half of ``sync``: owned-subtree projection and folder merge.

Each member versions only the files it owns. A provider answers a sync
request with the projection of its tree onto its own files; the receiver
merges that projection folder by folder, touching nothing owned by anyone
else.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Optional, Sequence

from .metadata import (
    SEP,
    FileEntry,
    FolderNode,
    HierarchyTree,
    MemberName,
    Node,
    SeqNum,
    display_name,
    recompute_conflicts,
)

if TYPE_CHECKING:
    from .node import NodeState

__all__ = [
    "HierarchySyncRequest",
    "HierarchySyncReply",
    "build_owned_subtree",
    "sync_folder",
    "apply_hierarchy_sync",
    "handle_hierarchy_sync_request",
    "recompute_conflicts",
    "display_name",
]


@dataclass(frozen=True)
class HierarchySyncRequest:
    requester_name: MemberName


@dataclass(frozen=True)
class HierarchySyncReply:
    provider_name: MemberName
    provider_hier_seq: SeqNum
    owned_tree: FolderNode


def _project(folder: FolderNode, owner: MemberName) -> Optional[FolderNode]:
    children: list[Node] = []
    for child in folder.children:
        if isinstance(child, FileEntry):
            if child.owner == owner:
                children.append(FileEntry(child.logical_name, owner, child.physical_name))
        else:
            sub = _project(child, owner)
            if sub is not None:
                children.append(sub)
    if not children:
        return None
    return FolderNode(folder.name, children)


def build_owned_subtree(tree: HierarchyTree, owner: MemberName) -> FolderNode:
    """Copy of ``tree`` keeping only ``owner``'s files and their folders."""
    return _project(tree.root, owner) or FolderNode(SEP)


def sync_folder(
    current: Sequence[Node],
    provided: Sequence[Node],
    provider: MemberName,
    seq: SeqNum,
) -> list[Node]:
    """Merge the provider's view of one folder into ours.

    Files are matched with two cursors, one over ``provided`` and one over
    the provider-owned files in ``current``. A match keeps our entry in
    place; a mismatch drops ours (the owner is authoritative) without
    advancing the provided cursor. Whatever is left in ``provided`` once
    ours run out is appended. Folders are merged by name, recursively.
    """
    provided_files = [c for c in provided if isinstance(c, FileEntry)]
    provided_folders = {c.name: c for c in provided if isinstance(c, FolderNode)}

    merged: list[Node] = []
    cursor = 0
    for child in current:
        if isinstance(child, FolderNode) or child.owner != provider:
            merged.append(child)
            continue
        if cursor < len(provided_files) and provided_files[cursor].logical_name == child.logical_name:
            merged.append(replace(
                child,
                physical_name=provided_files[cursor].physical_name,
                owner_sync_seq=seq,
            ))
            cursor += 1
    for entry in provided_files[cursor:]:
        merged.append(FileEntry(entry.logical_name, provider, entry.physical_name,
                                owner_sync_seq=seq))

    result: list[Node] = []
    seen = set()
    for child in merged:
        if isinstance(child, FolderNode):
            seen.add(child.name)
            sub = provided_folders.get(child.name)
            children = sync_folder(child.children, sub.children if sub else (), provider, seq)
            result.append(FolderNode(child.name, children))
        else:
            result.append(child)
    for name, sub in provided_folders.items():
        if name not in seen:
            result.append(FolderNode(name, sync_folder((), sub.children, provider, seq)))
    return result


def _well_formed(folder: FolderNode, provider: MemberName) -> bool:
    names = set()
    for child in folder.children:
        if isinstance(child, FileEntry):
            if child.owner != provider or not child.logical_name or SEP in child.logical_name:
                return False
            if child.logical_name in names:
                return False
            names.add(child.logical_name)
        elif isinstance(child, FolderNode):
            if not child.name or SEP in child.name or not _well_formed(child, provider):
                return False
        else:
            return False
    return len({c.name for c in folder.folders()}) == sum(1 for _ in folder.folders())


def handle_hierarchy_sync_request(
    state: NodeState, req: HierarchySyncRequest
) -> Optional[HierarchySyncReply]:
    if state.name is None or req.requester_name not in state.members:
        return None
    return HierarchySyncReply(
        state.name, state.tree.own_seq, build_owned_subtree(state.tree, state.name))


def apply_hierarchy_sync(state: NodeState, rep: HierarchySyncReply) -> bool:
    """Merge a complete reply; stale, foreign or malformed replies are dropped."""
    provider = rep.provider_name
    tree = state.tree
    if state.name is None or provider == state.name or provider not in state.members:
        return False
    if rep.owned_tree.name != SEP or not _well_formed(rep.owned_tree, provider):
        return False
    if rep.provider_hier_seq <= tree.per_owner_seq.get(provider, 0):
        return False
    tree.root.children = sync_folder(
        tree.root.children, rep.owned_tree.children, provider, rep.provider_hier_seq)
    tree.per_owner_seq[provider] = rep.provider_hier_seq
    rec = state.members.get(provider)
    rec.known_hier_seq = max(rec.known_hier_seq, rep.provider_hier_seq)
    recompute_conflicts(tree.root)
    return True
