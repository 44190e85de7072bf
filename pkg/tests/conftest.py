import random

import pytest

from edgefs.membership import bootstrap
from edgefs.metadata import FileEntry, FolderNode, MemberRecord
from edgefs.node import NodeState
from edgefs.reachability import ReachabilityConfig

_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, label): acceptance criterion n")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    n, label = marker
    outcomes = _criteria.setdefault(n, (label, []))[1]
    if report.when == "call" or report.outcome != "passed":
        outcomes.append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        label, outcomes = _criteria[n]
        ok = bool(outcomes) and all(o == "passed" for o in outcomes)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {label}")


# -- shared builders ----------------------------------------------------------


def make_state(name="A", address="a", peers=(), threshold=4, seed=0):
    """A named node state that already knows (and hears) ``peers``."""
    st = NodeState(address, ReachabilityConfig(5, threshold), random.Random(seed))
    if "/" in name:
        _named(st, name)
    else:
        bootstrap(st, name)
    for peer, addr in peers:
        st.members.add(MemberRecord(peer, addr))
    return st


def _named(st, name):
    st.name = name
    st.tree.local = name
    st.members.add(MemberRecord(name, st.address))


def files(folder):
    return [(c.logical_name, c.owner) for c in folder.children if isinstance(c, FileEntry)]


def tree(*children, name="/"):
    return FolderNode(name, list(children))


def f(name, owner, physical=None):
    return FileEntry(name, owner, physical or f"p_{name}")


@pytest.fixture
def state():
    return make_state("A", "a", peers=[("A/1", "b"), ("A/2", "c")])
