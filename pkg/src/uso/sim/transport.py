"""In-process message transport with a logical clock.

Every inter-actor interaction is a :class:`Message` carrying canonical
bytes.  Events are ordered by ``(tick, seq)``, so a run is a pure function of
the scenario and its seed.  Timers are private to one actor and never appear
in the transcript.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Message:
    src: str
    dst: str
    kind: str
    body: bytes
    label: str = ""
    flow: str = ""
    reply_label: str = ""


@dataclass(frozen=True)
class Record:
    tick: int
    seq: int
    src: str
    dst: str
    kind: str
    label: str
    flow: str
    digest: str

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "seq": self.seq,
            "from": self.src,
            "to": self.dst,
            "kind": self.kind,
            "label": self.label,
            "flow": self.flow,
            "body_sha256": self.digest,
        }


@dataclass
class Transcript:
    records: list[Record] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":")) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> Transcript:
        out = cls()
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                out.records.append(Record(d["tick"], d["seq"], d["from"], d["to"], d["kind"],
                                          d["label"], d["flow"], d["body_sha256"]))
        return out

    def flow(self, flow_id: str) -> list[Record]:
        return [r for r in self.records if r.flow == flow_id]

    def view(self, actor: str) -> list[Record]:
        """Records an actor sent or received."""
        return [r for r in self.records if actor in (r.src, r.dst)]


class Network:
    """Event queue plus per-link delivery delay (in ticks, default 1)."""

    def __init__(self, default_delay: int = 1):
        self.now = 0
        self.default_delay = default_delay
        self.delays: dict[tuple[str, str], int] = {}
        self.actors: dict = {}
        self.transcript = Transcript()
        self._queue: list = []
        self._seq = 0

    def attach(self, actor):
        self.actors[actor.id] = actor
        actor.net = self

    def set_delay(self, src: str, dst: str, ticks: int):
        if ticks < 0:
            raise ValueError("delay must be non-negative")
        self.delays[(src, dst)] = ticks

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def send(self, msg: Message):
        if msg.dst not in self.actors:
            raise KeyError(f"no actor {msg.dst!r}")
        seq = self._next_seq()
        self.transcript.records.append(Record(
            self.now, seq, msg.src, msg.dst, msg.kind, msg.label, msg.flow,
            hashlib.sha256(msg.body).hexdigest(),
        ))
        delay = self.delays.get((msg.src, msg.dst), self.default_delay)
        heapq.heappush(self._queue, (self.now + delay, seq, "msg", msg))

    def schedule(self, ticks: int, callback):
        """Run ``callback()`` after ``ticks``; invisible to the transcript."""
        heapq.heappush(self._queue, (self.now + ticks, self._next_seq(), "timer", callback))

    @property
    def idle(self) -> bool:
        return not self._queue

    def step(self) -> bool:
        if not self._queue:
            return False
        tick, _, what, item = heapq.heappop(self._queue)
        self.now = max(self.now, tick)
        if what == "msg":
            self.actors[item.dst].deliver(item)
        else:
            item()
        return True

    def run_until_idle(self, max_events: int = 1_000_000):
        n = 0
        while self.step():
            n += 1
            if n >= max_events:
                raise RuntimeError("event budget exhausted")

    def advance(self, ticks: int):
        """Process events due within the next ``ticks`` ticks, then move the clock."""
        end = self.now + ticks
        while self._queue and self._queue[0][0] <= end:
            self.step()
        self.now = end
