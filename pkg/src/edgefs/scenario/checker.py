"""Consistency oracle and trace post-processing.

The oracle ignores how nodes got where they are. For a node N it takes
every member N can currently talk to (same partition group, and each
lists the other), projects that member's own tree onto the files it owns,
and unions the projections. A converged node lists exactly that union.

Conflict flags are held to the oracle for names shared by two or more of
those members. A flag with no visible partner is accepted only when the
partner is in N's tree but hidden, i.e. its owner is out of reach.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..hierarchy_sync import build_owned_subtree
from ..metadata import FileEntry, display_name, walk_files, walk_folders
from ..node import NodeState
from ..reachability import entry_visible, list_folder, reachable_names
from ..simnet import PartitionState

FileKey = tuple[str, str, str, str]  # folder, logical name, owner, physical name


@dataclass(frozen=True)
class ExpectedView:
    files: frozenset[FileKey]
    conflicted: frozenset[tuple[str, str]]


@dataclass
class ConsistencyReport:
    label: str
    tick: int
    converged: bool
    member_hashes: dict[str, str] = field(default_factory=dict)
    view_hashes: dict[str, str] = field(default_factory=dict)
    names: dict[str, str] = field(default_factory=dict)
    conflicts: list[tuple[str, str, tuple[str, ...]]] = field(default_factory=list)
    divergences: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"report {self.label}",
                 f"tick {self.tick}",
                 f"converged {'true' if self.converged else 'false'}"]
        for node in sorted(self.member_hashes):
            lines.append(f"node {node} name={self.names.get(node) or '-'} "
                         f"members={self.member_hashes[node]} view={self.view_hashes[node]}")
        for node, path, owners in self.conflicts:
            lines.append(f"conflict {node} {path} owners={','.join(owners)}")
        for text in self.divergences:
            lines.append(f"divergence {text}")
        return "\n".join(lines) + "\n"


def _digest(items: Iterable[object]) -> str:
    h = hashlib.sha256()
    for item in sorted(repr(i) for i in items):
        h.update(item.encode())
        h.update(b"\n")
    return h.hexdigest()[:16]


def mutual_reach(states: Mapping[str, NodeState], partition: PartitionState) -> dict[str, set[str]]:
    """For every node, the nodes it can currently exchange pings with (itself included)."""
    reach: dict[str, set[str]] = {}
    for a, sa in states.items():
        reach[a] = {a}
        if sa.name is None:
            continue
        for b, sb in states.items():
            if b == a or sb.name is None or not partition.connected(a, b):
                continue
            if sb.name in sa.members and sa.name in sb.members:
                reach[a].add(b)
    return reach


def expected_view(states: Mapping[str, NodeState], partition: PartitionState) -> dict[str, ExpectedView]:
    owned: dict[str, list[FileKey]] = {}
    for node, st in states.items():
        if st.name is None:
            owned[node] = []
            continue
        projection = build_owned_subtree(st.tree, st.name)
        owned[node] = [(folder, e.logical_name, e.owner, e.physical_name)
                       for folder, e in walk_files(projection)]
    views = {}
    for node, peers in mutual_reach(states, partition).items():
        files = frozenset(k for peer in peers for k in owned[peer])
        owners: dict[tuple[str, str], set[str]] = {}
        for folder, name, owner, _ in files:
            owners.setdefault((folder, name), set()).add(owner)
        conflicted = frozenset(k for k, o in owners.items() if len(o) > 1)
        views[node] = ExpectedView(files, conflicted)
    return views


def _key(folder: str, e: FileEntry) -> FileKey:
    return folder, e.logical_name, e.owner, e.physical_name


def check_consistency(
    states: Mapping[str, NodeState],
    partition: PartitionState,
    *,
    label: str = "final",
    tick: int = 0,
    must_join: Iterable[str] = (),
) -> ConsistencyReport:
    report = ConsistencyReport(label, tick, converged=True)
    expected = expected_view(states, partition)
    reach = mutual_reach(states, partition)

    for node in sorted(states):
        st = states[node]
        report.names[node] = st.name or ""
        report.member_hashes[node] = _digest(st.members.names())
        visible, hidden = [], []
        for folder, e in walk_files(st.tree.root):
            (visible if entry_visible(e, st.name, st.members) else hidden).append((folder, e))
        report.view_hashes[node] = _digest(_key(f, e) for f, e in visible)

        exp = expected[node]
        actual = {_key(f, e) for f, e in visible}
        for key in sorted(exp.files - actual):
            report.divergences.append(f"{node} missing {key[0]}:{key[1]}@{key[2]}")
        for key in sorted(actual - exp.files):
            report.divergences.append(f"{node} unexpected {key[0]}:{key[1]}@{key[2]}")
        hidden_names = {(f, e.logical_name, e.owner) for f, e in hidden}
        for folder, e in visible:
            want = (folder, e.logical_name) in exp.conflicted
            if e.conflicted == want:
                continue
            excused = e.conflicted and any(
                f == folder and n == e.logical_name and o != e.owner
                for f, n, o in hidden_names)
            if not excused:
                report.divergences.append(
                    f"{node} flag {folder}:{e.logical_name}@{e.owner} "
                    f"is {e.conflicted}, expected {want}")

        groups: dict[tuple[str, str], list[str]] = {}
        for folder, e in walk_files(st.tree.root):
            if e.conflicted:
                groups.setdefault((folder, e.logical_name), []).append(e.owner)
        for (folder, name), owners in sorted(groups.items()):
            path = folder.rstrip("/") + "/" + name
            report.conflicts.append((node, path, tuple(sorted(owners))))

    for node in sorted(must_join):
        if states[node].name is None:
            report.divergences.append(f"{node} never joined")

    # member lists must agree across each connected component of mutual reach
    seen: set[str] = set()
    for start in sorted(states):
        if start in seen or states[start].name is None:
            continue
        component, stack = set(), [start]
        while stack:
            n = stack.pop()
            if n in component:
                continue
            component.add(n)
            stack.extend(reach[n] - component)
        seen |= component
        sets = {n: frozenset(states[n].members.names()) for n in component}
        if len(set(sets.values())) > 1:
            union = frozenset().union(*sets.values())
            for n in sorted(component):
                if sets[n] != union:
                    report.divergences.append(
                        f"{n} members lack {','.join(sorted(union - sets[n]))}")

    report.converged = not report.divergences
    return report


# -- visibility trace ---------------------------------------------------------


def view_line(tick: int, node: str, st: NodeState) -> tuple[str, str]:
    """A ``view`` trace line for ``st`` plus the signature used to dedupe it.

    ``listed`` comes from the user-facing folder listing and ``reach`` from
    the member records, so the trace audit cross-checks the two.
    """
    listed, hidden = [], []
    for path, folder in walk_folders(st.tree.root):
        shown = Counter(list_folder(st, path)) - Counter(f.name for f in folder.folders())
        base = path.rstrip("/")
        for e in folder.files():
            if shown[display_name(e)] > 0:
                listed.append(f"{base}/{display_name(e)}@{e.owner}")
            else:
                hidden.append(f"{base}/{e.logical_name}@{e.owner}")
    reach = reachable_names(st) if st.name else []
    body = (f"listed={';'.join(listed) or '-'} hidden={';'.join(hidden) or '-'} "
            f"reach={','.join(reach) or '-'}")
    return f"{tick} {node} view ---- {body}", body


def check_visibility_trace(lines: Iterable[str]) -> list[str]:
    """Audit ``view`` lines: listed owners reachable, hidden owners not."""
    problems = []
    for line in lines:
        parts = line.split(" ")
        if len(parts) < 4 or parts[2] != "view":
            continue
        fields = dict(p.split("=", 1) for p in parts[4:])
        reach = set() if fields["reach"] == "-" else set(fields["reach"].split(","))

        def owners(key: str) -> list[tuple[str, str]]:
            if fields[key] == "-":
                return []
            return [tuple(item.rsplit("@", 1)) for item in fields[key].split(";")]

        for path, owner in owners("listed"):
            if owner not in reach:
                problems.append(f"{parts[0]} {parts[1]} lists {path} of unreachable {owner}")
        for path, owner in owners("hidden"):
            if owner in reach:
                problems.append(f"{parts[0]} {parts[1]} hides {path} of reachable {owner}")
    return problems
