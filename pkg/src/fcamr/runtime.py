"""Iterative map-reduce mini-runtime.

The model: workers are configured once with their static partition data
and then serve any number of iterations; each iteration broadcasts a
small dynamic payload, maps it against every partition, and groups the
results by key for a driver-side reduce. Two interchangeable transports
exist, an in-process thread pool and TCP socket workers speaking the
frame protocol from wire.py.
"""

from __future__ import annotations

import queue
import socket
import threading
import traceback
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .partition import ContextPartition, PartitionSet
from . import wire

DEFAULT_MAX_ITERATIONS = 10_000_000

MAP_REGISTRY: dict[str, Callable] = {}
REDUCE_REGISTRY: dict[str, Callable] = {}


def register_map(name: str, fn: Callable) -> None:
    MAP_REGISTRY[name] = fn


def register_reduce(name: str, fn: Callable) -> None:
    REDUCE_REGISTRY[name] = fn


class WorkerError(RuntimeError):
    """A worker failed or became unreachable; the job cannot continue."""


class IterationGuardExceeded(RuntimeError):
    """The job passed the configured iteration budget without terminating."""


@dataclass(frozen=True)
class JobSpec:
    """A registered map/reduce pair plus the driver's termination rule.

    env is shared mutable state handed to every reduce call; drivers use
    it for things that must persist across iterations, like the global
    concept index. termination sees the items the next round would map
    and may stop the loop before they are dispatched.
    """

    map_fn: str
    reduce_fn: str
    termination: Callable[[list], bool] | None = None
    env: dict = field(default_factory=dict)
    partitions: PartitionSet | None = None


@dataclass
class DynamicPayload:
    iteration: int
    items: list


@dataclass
class KeyedOutput:
    key: object
    values: list  # (attribute index, intent mask, partition id) triples


def _assign_blocks(parts: Sequence[ContextPartition], workers: int) -> list[list[ContextPartition]]:
    q, r = divmod(len(parts), workers)
    blocks = []
    start = 0
    for w in range(workers):
        size = q + (1 if w < r else 0)
        blocks.append(list(parts[start : start + size]))
        start += size
    return blocks


def _group(per_worker_results: list[list[tuple]]) -> list[KeyedOutput]:
    """Merge (key, values) pairs from all workers, first-seen key order."""
    grouped: dict = {}
    order: list = []
    for results in per_worker_results:
        for key, values in results:
            bucket = grouped.get(key)
            if bucket is None:
                grouped[key] = list(values)
                order.append(key)
            else:
                bucket.extend(values)
    return [KeyedOutput(key, grouped[key]) for key in order]


class BaseRuntime:
    """Shared driver loop; subclasses provide transport-specific pieces."""

    mode = "abstract"

    def __init__(self):
        self._active_map: str | None = None
        self._last_iteration: int | None = None
        self.stats = {"map_invocations": 0, "iterations_dispatched": 0}

    def _dispatch(self, payload: DynamicPayload, map_name: str) -> list[KeyedOutput]:
        raise NotImplementedError

    def run_iteration(
        self, payload: DynamicPayload, map_fn: str | None = None
    ) -> list[KeyedOutput]:
        name = map_fn or self._active_map
        if name is None:
            raise ValueError("no map function: pass map_fn or start via run_until")
        if name not in MAP_REGISTRY:
            raise ValueError(f"map function {name!r} is not registered")
        if self._last_iteration is not None and payload.iteration <= self._last_iteration:
            raise ValueError(
                f"iteration numbers must increase: {payload.iteration} after "
                f"{self._last_iteration}"
            )
        self._last_iteration = payload.iteration
        self.stats["iterations_dispatched"] += 1
        return self._dispatch(payload, name)

    def run_until(
        self,
        job: JobSpec,
        seed: DynamicPayload,
        max_iterations: int = DEFAULT_MAX_ITERATIONS,
    ) -> tuple[list[list], int]:
        """Drive the job from a seed payload until its termination rule fires.

        Returns the per-iteration reduce outputs and the number of
        iterations dispatched. Stops without dispatching when the rule
        already holds on the seed, or when a round produces nothing.
        """
        if job.map_fn not in MAP_REGISTRY:
            raise ValueError(f"map function {job.map_fn!r} is not registered")
        reduce_fn = REDUCE_REGISTRY.get(job.reduce_fn)
        if reduce_fn is None:
            raise ValueError(f"reduce function {job.reduce_fn!r} is not registered")
        self._active_map = job.map_fn
        self._last_iteration = None
        outputs: list[list] = []
        items = list(seed.items)
        iteration = seed.iteration
        executed = 0
        while True:
            if job.termination is not None and job.termination(items):
                break
            if not items:
                break
            if executed >= max_iterations:
                raise IterationGuardExceeded(
                    f"no termination after {executed} iterations"
                )
            keyed = self.run_iteration(DynamicPayload(iteration, items))
            executed += 1
            iteration += 1
            produced: list = []
            for out in keyed:
                produced.extend(reduce_fn(out.key, out.values, job.env))
            outputs.append(produced)
            items = produced
        return outputs, executed

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class _PoolWorker(threading.Thread):
    def __init__(self, wid: int, partitions: list[ContextPartition], outbox: queue.Queue):
        super().__init__(name=f"map-worker-{wid}", daemon=True)
        self.wid = wid
        self.partitions = partitions
        self.inbox: queue.Queue = queue.Queue()
        self.outbox = outbox

    def run(self):
        while True:
            task = self.inbox.get()
            if task is None:
                return
            fn, items = task
            try:
                results = []
                for part in self.partitions:
                    for item in items:
                        results.append(fn(part, item))
                self.outbox.put((self.wid, results))
            except Exception:
                self.outbox.put((self.wid, traceback.format_exc()))


class InProcessRuntime(BaseRuntime):
    """Thread pool in the driver process; partitions stay in shared memory."""

    mode = "in_process"

    def __init__(self, parts: PartitionSet, workers: int = 1):
        super().__init__()
        if workers < 1:
            raise ValueError("need at least one worker")
        self.parts = parts
        self._outbox: queue.Queue = queue.Queue()
        self._workers = [
            _PoolWorker(w, block, self._outbox)
            for w, block in enumerate(_assign_blocks(parts.partitions, workers))
        ]
        for w in self._workers:
            w.start()

    def _dispatch(self, payload: DynamicPayload, map_name: str) -> list[KeyedOutput]:
        fn = MAP_REGISTRY[map_name]
        for w in self._workers:
            w.inbox.put((fn, payload.items))
        collected: dict[int, list] = {}
        for _ in self._workers:
            wid, result = self._outbox.get()
            if isinstance(result, str):
                raise WorkerError(f"worker {wid} failed:\n{result}")
            collected[wid] = result
        self.stats["map_invocations"] += len(payload.items) * len(self.parts)
        return _group([collected[wid] for wid in sorted(collected)])

    def close(self) -> None:
        for w in self._workers:
            w.inbox.put(None)
        for w in self._workers:
            w.join(timeout=5)


class SocketRuntime(BaseRuntime):
    """Driver side of the socket protocol; one connection per worker."""

    mode = "socket"

    def __init__(self, parts: PartitionSet, addresses: Sequence[str], timeout: float = 60.0):
        super().__init__()
        if not addresses:
            raise ValueError("socket mode needs at least one worker address")
        self.parts = parts
        self.addresses = list(addresses)
        self.transfer_stats = {
            addr: {
                "configure_frames": 0,
                "configure_bytes": 0,
                "map_frames": 0,
                "map_bytes": 0,
                "result_frames": 0,
            }
            for addr in self.addresses
        }
        blocks = _assign_blocks(parts.partitions, len(self.addresses))
        self._socks: list[socket.socket] = []
        self._blocks = blocks
        for addr, block in zip(self.addresses, blocks):
            host, _, port_text = addr.rpartition(":")
            try:
                sock = socket.create_connection((host, int(port_text)), timeout=timeout)
            except OSError as exc:
                self.close()
                raise WorkerError(f"cannot reach worker {addr}: {exc}") from exc
            sock.settimeout(timeout)
            self._socks.append(sock)
            sent = wire.send_frame(
                sock, wire.configure_message(parts.attribute_names, block)
            )
            stats = self.transfer_stats[addr]
            stats["configure_frames"] += 1
            stats["configure_bytes"] += sent
            reply = self._expect(sock, addr, {"STATUS"})
            if not reply.get("ok"):
                self.close()
                raise WorkerError(f"worker {addr} rejected CONFIGURE: {reply}")

    def _expect(self, sock, addr, kinds) -> dict:
        try:
            reply = wire.recv_frame(sock)
        except (ConnectionError, TimeoutError, OSError) as exc:
            raise WorkerError(f"worker {addr} became unreachable: {exc}") from exc
        if reply["type"] == "ERROR":
            raise WorkerError(f"worker {addr} reported: {reply.get('message')}")
        if reply["type"] not in kinds:
            raise WorkerError(
                f"worker {addr} sent {reply['type']}, expected {sorted(kinds)}"
            )
        return reply

    def _dispatch(self, payload: DynamicPayload, map_name: str) -> list[KeyedOutput]:
        message = {
            "type": "MAP",
            "iteration": payload.iteration,
            "map_fn": map_name,
            **wire.encode_items(payload.items),
        }
        active: list[tuple[str, socket.socket]] = []
        for addr, sock, block in zip(self.addresses, self._socks, self._blocks):
            if not block:
                continue
            sent = wire.send_frame(sock, message)
            stats = self.transfer_stats[addr]
            stats["map_frames"] += 1
            stats["map_bytes"] += sent
            active.append((addr, sock))
        per_worker = []
        for addr, sock in active:
            results = []
            for _ in payload.items:
                reply = self._expect(sock, addr, {"MAP_RESULT"})
                self.transfer_stats[addr]["result_frames"] += 1
                results.append(
                    (wire.decode_key(reply["key"]), wire.decode_values(reply["values"]))
                )
            per_worker.append(results)
        self.stats["map_invocations"] += len(payload.items) * len(self.parts)
        return _group(per_worker)

    def close(self) -> None:
        for sock in self._socks:
            try:
                wire.send_frame(sock, {"type": "SHUTDOWN"})
                wire.recv_frame(sock)
            except OSError:
                pass
            try:
                sock.close()
            except OSError:
                pass
        self._socks = []


def configure(
    parts: PartitionSet,
    workers: int = 1,
    mode: str = "in_process",
    addresses: Sequence[str] | None = None,
) -> BaseRuntime:
    """Build a runtime handle with static data already distributed."""
    if mode in ("in_process", "local"):
        return InProcessRuntime(parts, workers)
    if mode == "socket":
        return SocketRuntime(parts, addresses or [])
    raise ValueError(f"unknown runtime mode: {mode!r}")
