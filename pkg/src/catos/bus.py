"""In-process message board decoupling the pipeline stages.

Topics are a closed set fixed at startup.  Every subscriber owns a bounded
FIFO queue per topic; publishers never block.  On overflow the oldest
message is dropped, the drop is counted, and a notice is published on the
"log" topic (drops of log notices themselves are only counted, never
re-reported, to avoid recursion).
"""

import threading
from collections import deque
from dataclasses import dataclass
from typing import Any

TOPICS = ("vision", "audio", "hw", "schema", "log")
DEFAULT_QUEUE_LIMIT = 4096


class BusError(Exception):
    pass


class UnknownTopicError(BusError):
    pass


class SequenceError(BusError):
    """seq or t_sim_ms went backwards for a (publisher, topic) pair."""


class ClosedSubscriptionError(BusError):
    pass


@dataclass(frozen=True)
class BusMessage:
    topic: str
    publisher: str
    seq: int
    t_sim_ms: int
    payload: Any = None


@dataclass
class DropNotice:
    """Payload of the overflow notice published on the log topic."""
    topic: str
    subscriber: str
    dropped_now: int
    dropped_total: int


class Subscription:
    def __init__(self, board, name, topic, limit):
        self._board = board
        self.name = name
        self.topic = topic
        self.limit = limit
        self.queue = deque()
        self.closed = False

    def poll(self, max_n=None):
        """Non-blocking: up to max_n pending messages in delivery order."""
        if self.closed:
            raise ClosedSubscriptionError(f"subscription {self.name!r} is closed")
        with self._board._lock:
            if max_n is None:
                max_n = len(self.queue)
            out = []
            while self.queue and len(out) < max_n:
                out.append(self.queue.popleft())
            return out

    def close(self):
        self.closed = True


@dataclass
class _PublisherState:
    last_seq: int = -1
    last_t: int = -1


class MessageBoard:
    def __init__(self, topics=TOPICS, queue_limit=DEFAULT_QUEUE_LIMIT):
        self.topics = tuple(topics)
        self.queue_limit = queue_limit
        self._subs: dict[str, list[Subscription]] = {t: [] for t in self.topics}
        self._pub: dict[tuple[str, str], _PublisherState] = {}
        self._dropped: dict[str, int] = {t: 0 for t in self.topics}
        self._published: dict[str, int] = {t: 0 for t in self.topics}
        self._log_seq = 0
        self._lock = threading.RLock()

    def subscribe(self, name, topic, limit=None):
        if topic not in self.topics:
            raise UnknownTopicError(f"unknown topic {topic!r}")
        with self._lock:
            sub = Subscription(self, name, topic, limit or self.queue_limit)
            self._subs[topic].append(sub)
            return sub

    def publish(self, msg: BusMessage):
        if msg.topic not in self.topics:
            raise UnknownTopicError(f"unknown topic {msg.topic!r}")
        with self._lock:
            key = (msg.publisher, msg.topic)
            st = self._pub.setdefault(key, _PublisherState())
            if msg.seq <= st.last_seq:
                raise SequenceError(
                    f"seq {msg.seq} <= last {st.last_seq} for {key}")
            if msg.t_sim_ms < st.last_t:
                raise SequenceError(
                    f"t_sim_ms {msg.t_sim_ms} < last {st.last_t} for {key}")
            st.last_seq = msg.seq
            st.last_t = msg.t_sim_ms
            self._published[msg.topic] += 1
            for sub in self._subs[msg.topic]:
                if sub.closed:
                    continue
                if len(sub.queue) >= sub.limit:
                    sub.queue.popleft()
                    self._dropped[msg.topic] += 1
                    if msg.topic != "log":
                        self._notify_drop(msg.topic, sub, msg.t_sim_ms)
                sub.queue.append(msg)

    def _notify_drop(self, topic, sub, t):
        self._log_seq += 1
        notice = BusMessage(
            topic="log", publisher="bus", seq=self._log_seq, t_sim_ms=t,
            payload=DropNotice(topic=topic, subscriber=sub.name,
                               dropped_now=1,
                               dropped_total=self._dropped[topic]))
        for ls in self._subs["log"]:
            if ls.closed:
                continue
            if len(ls.queue) >= ls.limit:
                ls.queue.popleft()
                self._dropped["log"] += 1
            ls.queue.append(notice)

    def dropped(self, topic):
        if topic not in self.topics:
            raise UnknownTopicError(f"unknown topic {topic!r}")
        return self._dropped[topic]

    def published(self, topic):
        if topic not in self.topics:
            raise UnknownTopicError(f"unknown topic {topic!r}")
        return self._published[topic]


class Publisher:
    """Per-(publisher, topic) sequence bookkeeping for bus clients."""

    def __init__(self, board, name):
        self.board = board
        self.name = name
        self._seq: dict[str, int] = {}

    def publish(self, topic, t_sim_ms, payload):
        seq = self._seq.get(topic, -1) + 1
        msg = BusMessage(topic=topic, publisher=self.name, seq=seq,
                         t_sim_ms=t_sim_ms, payload=payload)
        self.board.publish(msg)
        self._seq[topic] = seq
        return msg
