"""Execution records: events, message instances, traces and their JSON-lines form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

from .errors import InvalidParameter, TraceParseError
from .graph import DualGraph
from .rational import as_time, fmt_time

KINDS = ("arrive", "bcast", "rcv", "ack", "abort", "timer_set", "timer_fire")
STANDARD = "standard"
ENHANCED = "enhanced"


@dataclass(frozen=True)
class EngineConfig:
    f_ack: Fraction
    f_prog: Fraction
    eps_abort: Fraction = Fraction(0)
    model: str = STANDARD
    zero_delay_budget: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "f_ack", as_time(self.f_ack))
        object.__setattr__(self, "f_prog", as_time(self.f_prog))
        object.__setattr__(self, "eps_abort", as_time(self.eps_abort))
        if not (0 < self.f_prog <= self.f_ack):
            raise InvalidParameter("need 0 < f_prog <= f_ack")
        if self.eps_abort < 0:
            raise InvalidParameter("eps_abort must be >= 0")
        if self.model not in (STANDARD, ENHANCED):
            raise InvalidParameter(f"unknown model {self.model!r}")
        if self.zero_delay_budget < 1:
            raise InvalidParameter("zero_delay_budget must be positive")

    def to_dict(self) -> dict:
        return {
            "f_ack": fmt_time(self.f_ack),
            "f_prog": fmt_time(self.f_prog),
            "eps_abort": fmt_time(self.eps_abort),
            "model": self.model,
            "zero_delay_budget": self.zero_delay_budget,
        }


@dataclass(slots=True)
class Event:
    seq: int
    time: Fraction
    kind: str
    node: int
    instance: int | None = None
    payload: Any = None
    sender: int | None = None
    reliable: bool | None = None

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "t": fmt_time(self.time),
            "kind": self.kind,
            "node": self.node,
            "instance": self.instance,
            "payload": self.payload,
            "from": self.sender,
            "reliable": self.reliable,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Event":
        try:
            kind = d["kind"]
            if kind not in KINDS:
                raise TraceParseError(f"unknown event kind {kind!r}")
            return cls(
                seq=int(d["seq"]),
                time=as_time(d["t"]),
                kind=kind,
                node=int(d["node"]),
                instance=None if d.get("instance") is None else int(d["instance"]),
                payload=_freeze(d.get("payload")),
                sender=None if d.get("from") is None else int(d["from"]),
                reliable=d.get("reliable"),
            )
        except (KeyError, TypeError, ValueError, InvalidParameter) as exc:
            raise TraceParseError(f"malformed event record {d!r}: {exc}") from exc


def _freeze(x):
    if isinstance(x, list):
        return tuple(_freeze(i) for i in x)
    return x


@dataclass
class MessageInstance:
    instance_id: int
    sender: int
    payload: Any
    bcast_at: Fraction
    bcast_seq: int
    rcv_events: list[tuple[int, Fraction, int]] = field(default_factory=list)
    terminated: tuple[str, Fraction, int] | None = None

    @property
    def end(self) -> Fraction | None:
        return None if self.terminated is None else self.terminated[1]


@dataclass
class Trace:
    events: list[Event]
    graph: DualGraph | None = None
    config: EngineConfig | None = None
    digests: dict[int, str] = field(default_factory=dict)
    truncated: bool = False
    horizon: Fraction | None = None

    @property
    def end_time(self) -> Fraction:
        if self.truncated and self.horizon is not None:
            return self.horizon
        return self.events[-1].time if self.events else Fraction(0)

    def instances(self) -> dict[int, MessageInstance]:
        """Group events into message instances.  Assumes a parseable trace."""
        out: dict[int, MessageInstance] = {}
        for ev in self.events:
            if ev.kind == "bcast":
                out[ev.instance] = MessageInstance(ev.instance, ev.node, ev.payload, ev.time, ev.seq)
            elif ev.kind == "rcv":
                out[ev.instance].rcv_events.append((ev.node, ev.time, ev.seq))
            elif ev.kind in ("ack", "abort"):
                inst = out[ev.instance]
                if inst.terminated is None:
                    inst.terminated = (ev.kind, ev.time, ev.seq)
        return out

    def get_times(self) -> dict[tuple[Any, int], Fraction]:
        """First arrive-or-rcv time per ``(payload, node)``."""
        out: dict[tuple[Any, int], Fraction] = {}
        for ev in self.events:
            if ev.kind in ("arrive", "rcv"):
                out.setdefault((ev.payload, ev.node), ev.time)
        return out

    def arrivals(self) -> dict[Any, int]:
        """Payload -> origin node, from arrive events."""
        return {ev.payload: ev.node for ev in self.events if ev.kind == "arrive"}

    def to_jsonl(self) -> str:
        return "".join(json.dumps(ev.to_json(), separators=(",", ":")) + "\n" for ev in self.events)

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, lines: Iterable[str] | str, **kwargs) -> "Trace":
        if isinstance(lines, str):
            lines = lines.splitlines()
        events = []
        for lineno, line in enumerate(lines, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceParseError(f"line {lineno}: {exc}") from exc
            events.append(Event.from_json(rec))
        return cls(events=events, **kwargs)

    @classmethod
    def read_jsonl(cls, path: str | Path, **kwargs) -> "Trace":
        with open(path) as fh:
            return cls.from_jsonl(fh, **kwargs)
