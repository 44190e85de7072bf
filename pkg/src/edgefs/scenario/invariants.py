"""Per-node state invariants, checked between events when asked to."""

from __future__ import annotations

import copy

from ..metadata import FolderNode, recompute_conflicts, walk_files, walk_folders
from ..node import Node


def _tree_problems(root: FolderNode) -> list[str]:
    problems = []
    for path, folder in walk_folders(root):
        folder_names = [f.name for f in folder.folders()]
        if len(folder_names) != len(set(folder_names)):
            problems.append(f"{path}: duplicate folder names")
        keys = [(e.logical_name, e.owner) for e in folder.files()]
        if len(keys) != len(set(keys)):
            problems.append(f"{path}: duplicate (name, owner) entries")
        plain = [e.logical_name for e in folder.files() if not e.conflicted]
        if len(plain) != len(set(plain)):
            problems.append(f"{path}: two unconflicted files share a name")
    shadow = copy.deepcopy(root)
    if recompute_conflicts(shadow):
        problems.append("conflict flags are not a fixpoint")
    return problems


def check_node_invariants(node: Node) -> list[str]:
    """Describe every broken invariant of ``node``'s state (empty when healthy)."""
    st = node.state
    problems: list[str] = []
    threshold = st.config.inactivity_threshold

    if st.name is None:
        if len(st.members) or st.tree.root.children:
            problems.append("unnamed node holds members or files")
        return problems

    if st.name not in st.members:
        problems.append("node is missing from its own member list")
    if st.members.seq != len(st.members):
        problems.append(f"member seq {st.members.seq} != {len(st.members)} entries")
    for rec in st.members:
        if rec.name == st.name:
            continue
        if rec.reachable == (rec.missed_pings >= threshold):
            problems.append(f"{rec.name}: reachable={rec.reachable} with "
                            f"missed={rec.missed_pings}")
    for owner in st.tree.per_owner_seq:
        if owner not in st.members:
            problems.append(f"hierarchy seq for unknown member {owner}")

    problems.extend(_tree_problems(st.tree.root))

    physical: set[tuple[str, str]] = set()
    for folder, e in walk_files(st.tree.root):
        key = (e.owner, e.physical_name)
        if key in physical:
            problems.append(f"{folder}: physical name {e.physical_name} reused by {e.owner}")
        physical.add(key)
        if e.owner not in st.members:
            problems.append(f"{folder}/{e.logical_name}: owner {e.owner} unknown")

    store = st.store
    if store.quota is not None and store.used() > store.quota:
        problems.append(f"store holds {store.used()} bytes over quota {store.quota}")
    stray = set(store.granted) - set(st.members.names())
    if stray:
        problems.append(f"grants to unknown members {sorted(stray)}")
    return problems

