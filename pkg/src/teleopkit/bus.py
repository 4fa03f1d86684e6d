"""In-process publish/subscribe fabric with per-subscription QoS.

Stands in for a ROS-style topic layer: topics are strings, payload types
are pinned at first advertise, and every subscription keeps its own
bounded history.  Best-effort subscriptions evict their oldest entry
when full (keep-last), so a slow consumer always drains the freshest
intent; reliable subscriptions raise on overflow instead.

The bus is shareable across threads.  Timestamps come from the single
clock injected at construction, which is what makes virtual-clock tests
possible.
"""

from __future__ import annotations

import re
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Optional

from .clock import Clock


class Reliability(Enum):
    BEST_EFFORT = "best_effort"
    RELIABLE = "reliable"


@dataclass(frozen=True)
class QosProfile:
    depth: int = 8
    reliability: Reliability = Reliability.BEST_EFFORT

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"QoS depth must be >= 1, got {self.depth}")


# Freshest-command profile used for control topics downstream of the planner.
KEEP_LAST_ONE = QosProfile(depth=1, reliability=Reliability.BEST_EFFORT)
# Default for feedback/recorder topics (QoS for those is our choice, see docs).
DEFAULT_QOS = QosProfile(depth=8, reliability=Reliability.BEST_EFFORT)

_NAMESPACE_RE = re.compile(r"^(/[A-Za-z0-9_]+)*$")


@dataclass(frozen=True)
class TopicName:
    """Namespace-prefixed topic name.

    ``namespace`` is empty or slash-led (e.g. ``/left``); ``base`` is the
    functional name (e.g. ``teleop/target_pose``).  The full name is
    ``namespace + "/" + base`` for a nonempty namespace and just ``base``
    otherwise, so single-arm profiles run unprefixed.
    """

    namespace: str
    base: str

    def __post_init__(self):
        if not self.base or self.base.startswith("/") or self.base.endswith("/"):
            raise ValueError(f"bad topic base {self.base!r}")
        if "//" in self.base:
            raise ValueError(f"double slash in topic base {self.base!r}")
        if self.namespace and not _NAMESPACE_RE.match(self.namespace):
            raise ValueError(f"bad namespace {self.namespace!r}")

    @property
    def full(self) -> str:
        return f"{self.namespace}/{self.base}" if self.namespace else self.base

    @classmethod
    def parse(cls, full: str, base_prefix: str = "teleop/") -> "TopicName":
        """Split a full topic name into (namespace, base).

        The base is recognized as the suffix starting at ``base_prefix``;
        everything before it is the namespace.
        """
        idx = full.find(base_prefix)
        if idx < 0:
            raise ValueError(f"topic {full!r} does not contain base prefix {base_prefix!r}")
        namespace = full[:idx].rstrip("/")
        return cls(namespace=namespace, base=full[idx:])


@dataclass(frozen=True)
class Envelope:
    topic: str
    publish_time_ns: int
    sequence: int
    payload: Any


class BusTypeError(TypeError):
    """Payload type does not match the type registered for the topic."""


class BusOverflowError(RuntimeError):
    """A reliable subscription queue overflowed."""


class SubscriptionConflictError(RuntimeError):
    """An exclusive subscription already exists for the topic."""


class Subscription:
    """Bounded envelope queue owned by a single consumer."""

    def __init__(self, topic: str, qos: QosProfile, lock: threading.Lock):
        self.topic = topic
        self.qos = qos
        self._lock = lock
        self._queue: deque[Envelope] = deque(maxlen=qos.depth)
        self.evicted = 0

    def _offer(self, env: Envelope) -> None:
        # Caller holds the bus lock.
        if self.qos.reliability is Reliability.RELIABLE and len(self._queue) == self.qos.depth:
            raise BusOverflowError(
                f"reliable subscription on {self.topic!r} overflowed at depth {self.qos.depth}"
            )
        if len(self._queue) == self.qos.depth:
            self.evicted += 1
        self._queue.append(env)  # deque maxlen evicts the oldest

    def poll(self) -> Optional[Envelope]:
        """Pop the oldest pending envelope, or None."""
        with self._lock:
            return self._queue.popleft() if self._queue else None

    def drain(self) -> list[Envelope]:
        """Pop everything pending, oldest first."""
        with self._lock:
            out = list(self._queue)
            self._queue.clear()
            return out

    def pending(self) -> int:
        with self._lock:
            return len(self._queue)

    def __iter__(self) -> Iterator[Envelope]:
        while (env := self.poll()) is not None:
            yield env


@dataclass
class _Topic:
    payload_type: Optional[type] = None
    next_sequence: int = 0
    latest: Optional[Envelope] = None
    subscriptions: list[Subscription] = field(default_factory=list)
    exclusive_taken: bool = False


class MessageBus:
    def __init__(self, clock: Clock):
        self._clock = clock
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._topics: dict[str, _Topic] = {}

    def _topic(self, name: str) -> _Topic:
        topic = self._topics.get(name)
        if topic is None:
            topic = self._topics[name] = _Topic()
        return topic

    def advertise(self, topic: str | TopicName, payload_type: type) -> None:
        """Pin the payload type for a topic; later mismatches are hard errors."""
        name = topic.full if isinstance(topic, TopicName) else topic
        with self._lock:
            entry = self._topic(name)
            if entry.payload_type is None:
                entry.payload_type = payload_type
            elif entry.payload_type is not payload_type:
                raise BusTypeError(
                    f"topic {name!r} already advertised as {entry.payload_type.__name__}, "
                    f"not {payload_type.__name__}"
                )

    def publish(self, topic: str | TopicName, payload: Any) -> Envelope:
        name = topic.full if isinstance(topic, TopicName) else topic
        with self._lock:
            entry = self._topic(name)
            if entry.payload_type is None:
                entry.payload_type = type(payload)  # auto-advertise on first publish
            elif not isinstance(payload, entry.payload_type):
                raise BusTypeError(
                    f"topic {name!r} carries {entry.payload_type.__name__}, "
                    f"got {type(payload).__name__}"
                )
            env = Envelope(
                topic=name,
                publish_time_ns=self._clock.now_ns(),
                sequence=entry.next_sequence,
                payload=payload,
            )
            entry.next_sequence += 1
            entry.latest = env
            for sub in entry.subscriptions:
                sub._offer(env)
            self._cond.notify_all()
            return env

    def subscribe(
        self,
        topic: str | TopicName,
        qos: QosProfile = DEFAULT_QOS,
        exclusive: bool = False,
    ) -> Subscription:
        name = topic.full if isinstance(topic, TopicName) else topic
        with self._lock:
            entry = self._topic(name)
            if exclusive:
                if entry.exclusive_taken:
                    raise SubscriptionConflictError(f"exclusive subscription on {name!r} exists")
                entry.exclusive_taken = True
            sub = Subscription(name, qos, self._lock)
            entry.subscriptions.append(sub)
            return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            entry = self._topics.get(sub.topic)
            if entry and sub in entry.subscriptions:
                entry.subscriptions.remove(sub)

    def latest(self, topic: str | TopicName) -> Optional[Envelope]:
        """Most recent envelope on the topic without consuming it."""
        name = topic.full if isinstance(topic, TopicName) else topic
        with self._lock:
            entry = self._topics.get(name)
            return entry.latest if entry else None

    def sequence(self, topic: str | TopicName) -> int:
        """Number of envelopes ever published on the topic."""
        name = topic.full if isinstance(topic, TopicName) else topic
        with self._lock:
            entry = self._topics.get(name)
            return entry.next_sequence if entry else 0

    def wait_for_publish(self, topic: str, min_count: int, timeout_s: float = 2.0) -> bool:
        """Block (wall time) until the topic has seen >= min_count publishes.

        Cross-thread handshake used by drivers that push through the real
        WebSocket path and need to know when the gateway has republished.
        """
        with self._cond:
            return self._cond.wait_for(
                lambda: self._topics.get(topic) is not None
                and self._topics[topic].next_sequence >= min_count,
                timeout=timeout_s,
            )

    def topics(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)
