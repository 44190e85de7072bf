import itertools

import pytest

from conftest import make_state
from edgefs.membership import (
    MemberSyncReply,
    MemberSyncRequest,
    NameReply,
    NameRequest,
    bootstrap,
    handle_member_sync_request,
    handle_name_reply,
    handle_name_request,
    merge_member_list,
    validate_bootstrap_name,
)
from edgefs.node import NodeState


def test_host_appends_counter_to_its_own_name():
    host = make_state("A", "a")
    r1 = handle_name_request(host, NameRequest("", "b"))
    r2 = handle_name_request(host, NameRequest("", "c"))
    assert (r1.assigned_name, r2.assigned_name) == ("A/1", "A/2")
    assert r1.host_name == "A"
    assert host.members.names() == ["A", "A/1", "A/2"]
    assert host.members.seq == 3


def test_retransmitted_name_request_reuses_the_name():
    host = make_state("A", "a")
    first = handle_name_request(host, NameRequest("", "b", 7000))
    again = handle_name_request(host, NameRequest("", "b", 7000))
    assert first == again
    assert len(host.members) == 2 and host.next_suffix == 2
    other_port = handle_name_request(host, NameRequest("", "b", 7001))
    assert other_port.assigned_name == "A/2"


def test_unnamed_host_stays_silent():
    assert handle_name_request(NodeState("x"), NameRequest("", "b")) is None


def test_newcomer_adopts_name_and_records_host():
    st = NodeState("b")
    assert handle_name_reply(st, NameReply("A/1", "A"), "a")
    assert st.name == "A/1" and st.tree.local == "A/1"
    assert st.members.names() == ["A/1", "A"]
    assert not handle_name_reply(st, NameReply("A/9", "A"), "a")
    assert st.name == "A/1"


def test_bootstrap_validation():
    for bad in ("", "A/B", "a b"):
        with pytest.raises(ValueError):
            validate_bootstrap_name(bad)
    st = NodeState("a")
    bootstrap(st, "Root")
    assert st.members.seq == 1 and st.name == "Root"


def test_member_sync_reply_lists_everyone_including_provider():
    host = make_state("A", "a", peers=[("A/1", "b")])
    rep = handle_member_sync_request(host, MemberSyncRequest("A/1"))
    assert rep.provider_name == "A" and rep.provider_seq == 2
    assert {m[0] for m in rep.members} == {"A", "A/1"}
    assert handle_member_sync_request(host, MemberSyncRequest("stranger")) is None


def test_merge_adds_missing_members_as_unreachable():
    local = make_state("A", "a", peers=[("A/1", "b")])
    rep = MemberSyncReply("A/1", 3, (("A", "a", 7000), ("A/1", "b", 7000), ("A/2", "c", 7000)))
    assert merge_member_list(local, rep)
    assert local.members.seq == 3
    new = local.members.get("A/2")
    assert not new.reachable and new.missed_pings == local.config.inactivity_threshold
    assert local.members.get("A/1").known_member_seq == 3


def test_merge_of_subset_changes_nothing():
    local = make_state("A", "a", peers=[("A/1", "b"), ("A/2", "c")])
    rep = MemberSyncReply("A/1", 2, (("A", "a", 7000), ("A/1", "b", 7000)))
    assert not merge_member_list(local, rep)
    assert local.members.seq == 3


def test_merge_order_does_not_change_final_member_set():
    replies = [
        MemberSyncReply("A/1", 2, (("A/1", "b", 7000), ("A/1/1", "d", 7000))),
        MemberSyncReply("A/2", 2, (("A/2", "c", 7000), ("A/2/1", "e", 7000))),
        MemberSyncReply("A/1", 3, (("A/1", "b", 7000), ("A/1/2", "f", 7000))),
    ]
    finals = set()
    for order in itertools.permutations(replies):
        st = make_state("A", "a", peers=[("A/1", "b"), ("A/2", "c")])
        for rep in order:
            merge_member_list(st, rep)
        merge_member_list(st, order[0])  # and replays are harmless
        finals.add((frozenset(st.members.names()), st.members.seq))
    assert len(finals) == 1
