import random

import pytest

from edgefs import wire
from edgefs.fileops import FileResponse
from edgefs.hierarchy_sync import HierarchySyncReply, HierarchySyncRequest
from edgefs.membership import MemberSyncReply, MemberSyncRequest, NameRequest
from edgefs.metadata import Status, lookup
from edgefs.node import Join, LocalOp, Node, Send, SetTimer, Tick, snapshot
from edgefs.reachability import PingMessage, ReachabilityConfig
from edgefs.scenario.invariants import check_node_invariants
from edgefs.scenario.runner import Simulation
from edgefs.simnet import Envelope, NetConfig


def envelope(msg, src="b", dst="a"):
    tag, payload = wire.encode(msg)
    return Envelope(src, dst, tag, payload)


def sends(outputs):
    return [wire.decode(o.tag, o.payload) for o in outputs if isinstance(o, Send)]


@pytest.fixture
def trio():
    """Three joined, mutually reachable nodes on a lossless network."""
    sim = Simulation(NetConfig(seed=3))
    sim.spawn("a", "A")
    sim.spawn("b")
    sim.spawn("c")
    sim.join("b", "a")
    sim.join("c", "a")
    sim.run_for(60)
    return sim


def test_start_arms_the_ping_timer():
    node = Node("a", ReachabilityConfig(ping_period=7))
    assert node.start(3, "A") == [SetTimer(10, "ping")]
    assert node.name == "A"


def test_unnamed_node_only_asks_for_a_name():
    node = Node("b")
    node.start(0)
    assert node.step(envelope(PingMessage("A", 1, 1)), 1) == []
    assert node.stats["dropped:unnamed"] == 1
    assert node.step(Tick("ping"), 5) == [SetTimer(10, "ping")]
    out = node.step(Join("a"), 6)
    assert sends(out) == [NameRequest("", "b", 7000)]
    out = node.step(Tick("ping"), 10)
    assert sends(out) == [NameRequest("", "b", 7000)]


def test_unknown_tag_and_malformed_payload_are_counted():
    node = Node("a")
    node.start(0, "A")
    assert node.step(Envelope("b", "a", "zzzz", b""), 1) == []
    assert node.step(Envelope("b", "a", "sync", b"\x00"), 1) == []
    assert node.stats["dropped:unknown_tag"] == 1
    assert node.stats["dropped:malformed"] == 1


def test_sync_tag_routes_by_discriminator(trio):
    a = trio.nodes["a"]
    member = sends(a.step(envelope(MemberSyncRequest("A/1")), trio.now))
    hier = sends(a.step(envelope(HierarchySyncRequest("A/1")), trio.now))
    assert isinstance(member[0], MemberSyncReply)
    assert isinstance(hier[0], HierarchySyncReply)


def test_ping_tick_pings_every_known_member(trio):
    a = trio.nodes["a"]
    out = a.step(Tick("ping"), trio.now)
    assert {o.dst for o in out if isinstance(o, Send)} == {"b", "c"}
    assert all(o.tag == "ping" for o in out if isinstance(o, Send))


def test_join_names_everyone_and_spreads_member_lists(trio):
    names = {n.name for n in trio.nodes.values()}
    assert names == {"A", "A/1", "A/2"}
    for node in trio.nodes.values():
        assert set(node.state.members.names()) == names
        assert all(r.reachable for r in node.state.members)


def test_create_on_remote_owner_then_sync_reaches_everyone(trio):
    res = trio.call("b", LocalOp("create", "/docs/a.txt"))
    assert res.status is Status.OK
    trio.run_for(30)
    owners = {lookup(n.state.tree, "/docs/a.txt").owner for n in trio.nodes.values()}
    assert len(owners) == 1


def test_operations_queue_behind_an_outstanding_call(trio):
    b = trio.nodes["b"]
    b.state.rng = random.Random(0)
    # force remote owners so every create blocks
    b.state.rng.choice = lambda seq: "A"
    trio.local_op("b", LocalOp("create", "/one"))
    assert b.busy and b._call is not None
    trio.local_op("b", LocalOp("create", "/two"))
    trio.local_op("b", LocalOp("create", "/one"))
    assert len(b._queue) == 2
    trio.run_for(20)
    # no provisional entry: b only learns of /one from A's sync, so the
    # repeat goes to A, which answers it idempotently
    assert [(r.op.path, r.status) for r in b.results] == [
        ("/one", Status.OK), ("/two", Status.OK), ("/one", Status.OK)]
    assert trio.nodes["a"].state.tree.own_seq == 2
    starts = [r.started for r in b.results]
    assert starts == sorted(starts)
    assert b.results[1].started >= b.results[0].finished


def test_call_times_out_when_owner_is_cut_off(trio):
    b = trio.nodes["b"]
    b.state.rng.choice = lambda seq: "A"
    trio.partition([["b", "c"], ["a"]])
    res = trio.call("b", LocalOp("create", "/x"))
    assert res.status is Status.TIMEOUT
    assert res.finished - res.started == b.call_timeout


def test_remote_write_then_read(trio):
    b = trio.nodes["b"]
    b.state.rng.choice = lambda seq: "A"
    assert trio.call("b", LocalOp("create", "/f")).status is Status.OK
    assert trio.call("b", LocalOp("write", "/f")).status is Status.NOT_FOUND
    trio.run_for(20)
    assert trio.call("b", LocalOp("write", "/f", data=b"payload")).status is Status.OK
    assert b.mounted == {"A"}
    trio.run_for(20)
    got = trio.call("c", LocalOp("read", "/f"))
    assert got.status is Status.OK and got.data == b"payload"
    assert trio.nodes["a"].state.store.granted == {"A/1", "A/2"}


def test_local_write_skips_the_network(trio):
    a = trio.nodes["a"]
    a.state.rng.choice = lambda seq: "A"
    trio.call("a", LocalOp("create", "/mine"))
    res = trio.call("a", LocalOp("write", "/mine", data=b"x"))
    assert res.status is Status.OK and res.started == res.finished


def test_ops_on_missing_files():
    node = Node("a")
    node.start(0, "A")
    for kind in ("delete", "rename", "write", "read"):
        node.step(LocalOp(kind, "/ghost", new_name="x" if kind == "rename" else ""), 1)
    assert {r.status for r in node.results} == {Status.NOT_FOUND}
    node.step(LocalOp("create", "bad"), 1)
    assert node.results[-1].status is Status.INVALID_PATH


def test_op_before_joining_waits_for_the_name():
    sim = Simulation(NetConfig(seed=1))
    sim.spawn("a", "A")
    sim.spawn("b")
    sim.join("b", "a")
    sim.local_op("b", LocalOp("create", "/early"))
    sim.run_for(30)
    assert sim.nodes["b"].results[0].status is Status.OK


def test_stale_reply_is_ignored():
    node = Node("a")
    node.start(0, "A")
    node.step(envelope(FileResponse(Status.OK, 99)), 1)
    assert node.stats["stray_replies"] == 1


def test_discarding_an_inbox_at_any_instant_keeps_invariants():
    rng = random.Random(11)
    for trial in range(15):
        sim = Simulation(NetConfig(seed=trial, loss_probability=0.1), check_invariants=True)
        sim.spawn("a", "A")
        for i, n in enumerate("bcd"):
            sim.spawn(n)
            sim.join(n, rng.choice("abcd"[: i + 1]))
        for _ in range(60):
            node = rng.choice("abcd")
            if rng.random() < 0.3:
                sim.local_op(node, LocalOp(rng.choice(["create", "delete", "rename"]),
                                           rng.choice(["/a", "/d/b"]), new_name="r"))
            if rng.random() < 0.2:
                sim.net.discard_inbox(rng.choice("abcd"))
            sim.run_for(rng.randint(1, 6))
        sim.settle()
        assert sim.check().converged
        for node in sim.nodes.values():
            assert check_node_invariants(node) == []


def test_snapshot_is_stable_across_identical_runs():
    def final():
        sim = Simulation(NetConfig(seed=8, loss_probability=0.2))
        sim.spawn("a", "A")
        sim.spawn("b")
        sim.join("b", "a")
        sim.run_for(40)
        sim.local_op("b", LocalOp("create", "/x"))
        sim.settle()
        return [snapshot(n) for n in sim.nodes.values()]

    assert final() == final()
