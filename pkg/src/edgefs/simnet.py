"""Deterministic discrete-event network.

Time is an integer tick. Every random choice (delay, loss) is a hash of
the seed and the message coordinates rather than a draw from a shared
stream, so injecting an extra message never perturbs the fate of the
others.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
from collections import Counter
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Iterator, Optional

PROTOCOL_TAGS = frozenset({"name", "ping", "sync", "mont", "freq", "data"})
DATAGRAM_TAGS = frozenset({"name", "ping", "sync"})


@dataclass(frozen=True)
class Envelope:
    src: str
    dst: str
    protocol_tag: str
    payload: bytes
    deliver_at: int = 0
    reliable: bool = False

    def __post_init__(self) -> None:
        if len(self.protocol_tag) != 4:
            raise ValueError(f"protocol tag must be 4 characters: {self.protocol_tag!r}")

    def to_bytes(self) -> bytes:
        return self.protocol_tag.encode("ascii") + self.payload


@dataclass(frozen=True)
class NetConfig:
    seed: int = 0
    delay_min: int = 1
    delay_max: int = 3
    loss_probability: float = 0.0
    loss_cap: int = 10

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss_probability < 1.0:
            raise ValueError("loss_probability must be in [0, 1)")
        if not 0 <= self.delay_min <= self.delay_max:
            raise ValueError("need 0 <= delay_min <= delay_max")
        if self.loss_cap < 0:
            raise ValueError("loss_cap must be >= 0")

    def unit(self, *key: Any) -> float:
        """Uniform [0, 1) value fixed by the seed and ``key``."""
        digest = hashlib.blake2b(repr((self.seed,) + key).encode(), digest_size=8).digest()
        return int.from_bytes(digest, "big") / 2.0**64

    def delay(self, src: str, dst: str, tick: int, index: int = 0) -> int:
        span = self.delay_max - self.delay_min + 1
        return self.delay_min + int(self.unit("delay", src, dst, tick, index) * span)


class PartitionState:
    """Disjoint groups of nodes. No groups means fully connected.

    While a partition is in force, a node that is not listed in any group
    is cut off from everybody.
    """

    def __init__(self, groups: Iterable[Iterable[str]] = ()) -> None:
        self.groups: tuple[frozenset[str], ...] = tuple(frozenset(g) for g in groups)
        self._index: dict[str, int] = {}
        for i, group in enumerate(self.groups):
            for node in group:
                if node in self._index:
                    raise ValueError(f"{node} is in more than one group")
                self._index[node] = i

    def connected(self, a: str, b: str) -> bool:
        if a == b or not self.groups:
            return True
        ga = self._index.get(a)
        return ga is not None and ga == self._index.get(b)

    def group_of(self, node: str, universe: Iterable[str]) -> frozenset[str]:
        return frozenset(n for n in universe if self.connected(node, n))

    def __repr__(self) -> str:
        if not self.groups:
            return "PartitionState(healed)"
        return "PartitionState(" + "|".join(",".join(sorted(g)) for g in self.groups) + ")"


class ReliableChannel:
    """In-order, loss-free pipe between two nodes.

    A partition swallows whatever is in flight; the caller learns about it
    only through its own timeout.
    """

    def __init__(self, net: "SimNet", src: str, dst: str) -> None:
        self.net = net
        self.src = src
        self.dst = dst
        self.last_delivery = 0

    def send(self, tag: str, payload: bytes) -> bool:
        return self.net._send(Envelope(self.src, self.dst, tag, payload, reliable=True), self)


class SimNet:
    def __init__(self, config: NetConfig = NetConfig()) -> None:
        self.config = config
        self.now = 0
        self.partition = PartitionState()
        self.loss_enabled = True
        self.duplicate: Optional[Callable[[Envelope], bool]] = None
        self.on_drop: Optional[Callable[[Envelope, str], None]] = None
        self.stats: Counter[str] = Counter()
        self._queue: list[tuple[int, int, Any]] = []
        self._order = itertools.count()
        self._sent_this_tick: Counter[tuple] = Counter()
        self._tick_of_counts = 0
        self._losses: Counter[tuple[str, str, str]] = Counter()
        self._channels: dict[tuple[str, str], ReliableChannel] = {}
        self._dup_next: dict[str, list[Optional[str]]] = {}

    # -- scheduling ---------------------------------------------------------

    def schedule(self, tick: int, item: Any) -> None:
        if tick < self.now:
            raise ValueError(f"cannot schedule in the past ({tick} < {self.now})")
        heapq.heappush(self._queue, (tick, next(self._order), item))

    def pending(self) -> int:
        return len(self._queue)

    def next_tick(self) -> Optional[int]:
        return self._queue[0][0] if self._queue else None

    def advance(self, until_tick: int) -> Iterator[tuple[int, Any]]:
        """Yield due items in order, including ones scheduled along the way.

        Envelopes whose endpoints are partitioned at delivery time are
        dropped here instead of being yielded.
        """
        while self._queue and self._queue[0][0] <= until_tick:
            tick, _, item = heapq.heappop(self._queue)
            self.now = tick
            if isinstance(item, Envelope):
                if not self.partition.connected(item.src, item.dst):
                    self._drop(item, "partition")
                    continue
                self.stats["delivered"] += 1
            yield tick, item
        self.now = max(self.now, until_tick)

    def discard_inbox(self, node: str) -> int:
        """Forget every undelivered envelope addressed to ``node``."""
        keep = [e for e in self._queue if not (isinstance(e[2], Envelope) and e[2].dst == node)]
        dropped = len(self._queue) - len(keep)
        self._queue = keep
        heapq.heapify(self._queue)
        return dropped

    # -- sending ------------------------------------------------------------

    def send_datagram(self, env: Envelope) -> bool:
        if env.reliable:
            raise ValueError("use open_reliable() for reliable sends")
        return self._send(env, None)

    def open_reliable(self, src: str, dst: str) -> ReliableChannel:
        key = (src, dst)
        if key not in self._channels:
            self._channels[key] = ReliableChannel(self, src, dst)
        return self._channels[key]

    def duplicate_next(self, node: str, tag: Optional[str] = None) -> None:
        """Deliver the next message ``node`` sends (optionally: with ``tag``) twice."""
        self._dup_next.setdefault(node, []).append(tag)

    def _index(self, key: tuple) -> int:
        if self._tick_of_counts != self.now:
            self._sent_this_tick.clear()
            self._tick_of_counts = self.now
        idx = self._sent_this_tick[key]
        self._sent_this_tick[key] += 1
        return idx

    def _send(self, env: Envelope, channel: Optional[ReliableChannel]) -> bool:
        if env.protocol_tag not in PROTOCOL_TAGS:
            raise ValueError(f"unknown protocol tag {env.protocol_tag!r}")
        self.stats[f"sent:{env.protocol_tag}"] += 1
        key = (env.src, env.dst, env.protocol_tag, env.reliable)
        idx = self._index(key)
        if not self.partition.connected(env.src, env.dst):
            self._drop(env, "partition")
            return False
        cfg = self.config
        if (channel is None and self.loss_enabled and cfg.loss_probability > 0
                and env.protocol_tag in DATAGRAM_TAGS):
            link = (env.src, env.dst, env.protocol_tag)
            if (self._losses[link] < cfg.loss_cap
                    and cfg.unit("loss", *key, self.now, idx) < cfg.loss_probability):
                self._losses[link] += 1
                self._drop(env, "loss")
                return False
            self._losses[link] = 0
        at = self.now + cfg.delay(env.src, env.dst, self.now, idx)
        if channel is not None:
            at = max(at, channel.last_delivery)
            channel.last_delivery = at
        delivered = replace(env, deliver_at=at)
        self.schedule(at, delivered)
        if self._wants_duplicate(delivered):
            self.stats["duplicated"] += 1
            self.schedule(at, delivered)
        return True

    def _wants_duplicate(self, env: Envelope) -> bool:
        pending = self._dup_next.get(env.src)
        if pending:
            for i, tag in enumerate(pending):
                if tag is None or tag == env.protocol_tag:
                    del pending[i]
                    return True
        return self.duplicate is not None and self.duplicate(env)

    def _drop(self, env: Envelope, reason: str) -> None:
        self.stats[f"dropped:{reason}"] += 1
        if self.on_drop is not None:
            self.on_drop(env, reason)
