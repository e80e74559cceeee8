"""Built-in message schedulers.

Every scheduler here produces executions that satisfy the acknowledgment and
progress bounds by construction; :mod:`mmbsim.checker` verifies that claim.
"""

from __future__ import annotations

import heapq
from fractions import Fraction
from typing import Iterable

from .engine import Ack, Decision, Deliver, EngineView, InstanceState, Scheduler
from .trace import Event


class PlanScheduler(Scheduler):
    """Fixes the full delivery/ack schedule of each instance when it starts.

    Subclasses implement :meth:`plan`.  Planned actions made obsolete by
    the run (already delivered, instance terminated) are skipped.
    """

    def reset(self, graph, config, rng):
        super().reset(graph, config, rng)
        self._heap: list = []
        self._counter = 0
        self._cursor = 0

    def plan(self, inst: InstanceState, view: EngineView) -> Iterable[Decision]:
        raise NotImplementedError

    def observe(self, ev: Event, view: EngineView) -> None:
        """Hook called once for every new event, in log order."""

    def push(self, d: Decision) -> None:
        self._counter += 1
        heapq.heappush(self._heap, (d.at, 1 if isinstance(d, Ack) else 0, self._counter, d))

    def _catch_up(self, view: EngineView) -> None:
        events = view.events
        while self._cursor < len(events):
            ev = events[self._cursor]
            self._cursor += 1
            if ev.kind == "bcast":
                for d in self.plan(view.instance(ev.instance), view):
                    self.push(d)
            self.observe(ev, view)

    def _stale(self, d: Decision, view: EngineView) -> bool:
        inst = view.instance(d.instance_id)
        if isinstance(d, Ack):
            return inst.terminated
        if d.receiver in inst.delivered or inst.acked_at is not None:
            return True
        return inst.aborted_at is not None and d.at > inst.aborted_at + view.config.eps_abort

    def peek(self, view: EngineView) -> Decision | None:
        self._catch_up(view)
        heap = self._heap
        while heap and self._stale(heap[0][3], view):
            heapq.heappop(heap)
        return heap[0][3] if heap else None

    def next(self, view: EngineView) -> Decision | None:
        return self.peek(view)


class SlowSynchronousScheduler(PlanScheduler):
    """Deliver to all G-neighbors after ``f_prog``; acknowledge after ``f_ack``."""

    name = "slow"

    def plan(self, inst, view):
        t = inst.bcast_at + self.config.f_prog
        for v in self.graph.adj_g[inst.sender]:
            yield Deliver(inst.instance_id, v, t)
        yield Ack(inst.instance_id, inst.bcast_at + self.config.f_ack)


class EagerScheduler(PlanScheduler):
    """Deliver to all G-neighbors and acknowledge, all after ``f_prog``."""

    name = "eager"

    def plan(self, inst, view):
        t = inst.bcast_at + self.config.f_prog
        for v in self.graph.adj_g[inst.sender]:
            yield Deliver(inst.instance_id, v, t)
        yield Ack(inst.instance_id, t)


class RandomScheduler(PlanScheduler):
    """Seeded adversary with random delivery and ack times inside ``(0, f_ack]``.

    Each G-neighbor gets a random delivery time, each unreliable neighbor is
    reached with probability ``p_extra`` before the ack, and the ack falls at a
    random time after the last reliable delivery.  Times lie on a grid of
    ``f_ack / grid``.

    Left alone, such a schedule can starve a listener for longer than
    ``f_prog``.  The scheduler therefore tracks, per node, whether some
    received instance is still open; when a node with a broadcasting
    G-neighbor has no such cover, it must receive something within ``f_prog``
    of losing cover, and the earliest undelivered reliable obligation towards
    it is pulled forward to that deadline.
    """

    name = "random"

    def __init__(self, p_extra: float = 0.5, grid: int = 64):
        self.p_extra = p_extra
        self.grid = grid

    def reset(self, graph, config, rng):
        super().reset(graph, config, rng)
        n = graph.n
        self._alive = [0] * n
        self._cover_end = [Fraction(0)] * n
        self._open_g: list[dict[int, Fraction]] = [{} for _ in range(n)]
        self._receivers: dict[int, list[int]] = {}
        self._deadline: dict[int, Fraction] = {}
        self._dheap: list[tuple[Fraction, int]] = []
        self._dirty: set[int] = set()

    def plan(self, inst, view):
        rng, q = self.rng, self.grid
        step = self.config.f_ack / q
        adj_g = self.graph.adj_g[inst.sender]
        reliable = {v: rng.randint(1, q) for v in adj_g}
        last = max(reliable.values(), default=1)
        ack = rng.randint(last, q)
        for v, i in reliable.items():
            yield Deliver(inst.instance_id, v, inst.bcast_at + i * step)
        nbr_g = self.graph.nbr_g[inst.sender]
        for v in self.graph.adj_gp[inst.sender]:
            if v not in nbr_g and rng.random() < self.p_extra:
                yield Deliver(inst.instance_id, v, inst.bcast_at + rng.randint(1, ack) * step)
        yield Ack(inst.instance_id, inst.bcast_at + ack * step)

    def observe(self, ev, view):
        kind = ev.kind
        if kind == "bcast":
            for j in self.graph.adj_g[ev.node]:
                self._open_g[j][ev.instance] = ev.time
                self._dirty.add(j)
        elif kind == "rcv":
            inst = view.instance(ev.instance)
            j = ev.node
            if inst.terminated:
                end = inst.acked_at if inst.acked_at is not None else inst.aborted_at
                if end > self._cover_end[j]:
                    self._cover_end[j] = end
            else:
                self._alive[j] += 1
                self._receivers.setdefault(ev.instance, []).append(j)
            self._dirty.add(j)
        elif kind in ("ack", "abort"):
            for j in self._receivers.pop(ev.instance, ()):
                self._alive[j] -= 1
                if ev.time > self._cover_end[j]:
                    self._cover_end[j] = ev.time
                self._dirty.add(j)
            sender = view.instance(ev.instance).sender
            for j in self.graph.adj_g[sender]:
                self._open_g[j].pop(ev.instance, None)
                self._dirty.add(j)

    def _refresh(self) -> None:
        f_prog = self.config.f_prog
        for j in self._dirty:
            if self._alive[j] == 0 and self._open_g[j]:
                start = max(self._cover_end[j], min(self._open_g[j].values()))
                d = start + f_prog
                if self._deadline.get(j) != d:
                    self._deadline[j] = d
                    heapq.heappush(self._dheap, (d, j))
            else:
                self._deadline.pop(j, None)
        self._dirty.clear()

    def next(self, view):
        planned = self.peek(view)
        self._refresh()
        dheap = self._dheap
        while dheap and self._deadline.get(dheap[0][1]) != dheap[0][0]:
            heapq.heappop(dheap)
        if dheap and (planned is None or dheap[0][0] <= planned.at):
            deadline, j = dheap[0]
            iid = min(self._open_g[j], key=lambda i: (self._open_g[j][i], i))
            return Deliver(iid, j, max(deadline, view.now))
        return planned


SCHEDULERS = {
    "slow": SlowSynchronousScheduler,
    "eager": EagerScheduler,
    "random": RandomScheduler,
}


def make_scheduler(name: str, **kwargs) -> Scheduler:
    try:
        return SCHEDULERS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown scheduler {name!r}; choose from {sorted(SCHEDULERS)}") from None
