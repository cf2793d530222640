"""Runtime contracts: configuration, grouping, iteration loop, and sockets."""

import json
import socket
import struct
import subprocess
import sys

import pytest

from fcamr import mr  # noqa: F401  (registers the map/reduce functions)
from fcamr import wire
from fcamr.partition import split
from fcamr.runtime import (
    DynamicPayload,
    IterationGuardExceeded,
    JobSpec,
    KeyedOutput,
    WorkerError,
    configure,
    register_map,
    register_reduce,
)

from conftest import attrs_from_letters


def drain(handle):
    handle.close()


class TestInProcess:
    def test_map_invocation_count(self, toy):
        parts = split(toy, 2)
        with configure(parts, workers=2) as handle:
            payload = DynamicPayload(0, [0, attrs_from_letters("f").mask])
            outputs = handle.run_iteration(payload, map_fn="mrganter")
            assert handle.stats["map_invocations"] == 4
            assert [o.key for o in outputs] == payload.items

    def test_grouping_is_exhaustive_and_exclusive(self, toy):
        parts = split(toy, 3)
        with configure(parts, workers=2) as handle:
            payload = DynamicPayload(0, [0])
            outputs = handle.run_iteration(payload, map_fn="mrganter")
            assert len(outputs) == 1
            values = outputs[0].values
            # 7 absent attributes times 3 partitions
            assert len(values) == 21
            seen = {(attr, pid) for attr, _intent, pid in values}
            assert len(seen) == 21

    def test_workers_exceeding_partitions(self, toy):
        parts = split(toy, 2)
        with configure(parts, workers=5) as handle:
            outputs = handle.run_iteration(
                DynamicPayload(0, [0]), map_fn="mrganter"
            )
            assert len(outputs[0].values) == 14

    def test_zero_workers_rejected(self, toy):
        with pytest.raises(ValueError):
            configure(split(toy, 2), workers=0)

    def test_unknown_mode_rejected(self, toy):
        with pytest.raises(ValueError):
            configure(split(toy, 2), mode="carrier-pigeon")

    def test_iteration_must_increase(self, toy):
        with configure(split(toy, 1)) as handle:
            handle.run_iteration(DynamicPayload(3, [0]), map_fn="mrganter")
            with pytest.raises(ValueError):
                handle.run_iteration(DynamicPayload(3, [0]), map_fn="mrganter")

    def test_unregistered_names_rejected(self, toy):
        with configure(split(toy, 1)) as handle:
            with pytest.raises(ValueError):
                handle.run_iteration(DynamicPayload(0, [0]), map_fn="nope")
            with pytest.raises(ValueError):
                handle.run_until(
                    JobSpec(map_fn="mrganter", reduce_fn="nope"),
                    DynamicPayload(0, [0]),
                )

    def test_worker_exception_aborts_job(self, toy):
        def exploding(part, item):
            raise RuntimeError("boom")

        register_map("_test_explode", exploding)
        with configure(split(toy, 2), workers=2) as handle:
            with pytest.raises(WorkerError, match="boom"):
                handle.run_iteration(DynamicPayload(0, [0]), map_fn="_test_explode")


class TestRunUntil:
    def test_immediately_true_termination(self, toy):
        with configure(split(toy, 2)) as handle:
            job = JobSpec(
                map_fn="mrganter",
                reduce_fn="mrganter",
                termination=lambda items: True,
                env={"attribute_count": 7, "partition_count": 2},
            )
            outputs, executed = handle.run_until(job, DynamicPayload(0, [0]))
            assert outputs == []
            assert executed == 0

    def test_iteration_guard(self, toy):
        # echo reduce never terminates; the guard must fire
        register_map("_test_echo", lambda part, item: (item, [(0, item, part.partition_id)]))
        register_reduce("_test_echo", lambda key, values, env: [key])
        with configure(split(toy, 1)) as handle:
            job = JobSpec(map_fn="_test_echo", reduce_fn="_test_echo")
            with pytest.raises(IterationGuardExceeded):
                handle.run_until(job, DynamicPayload(0, [1]), max_iterations=50)

    def test_stops_on_empty_round(self, toy):
        register_map("_test_once", lambda part, item: (item, [(0, item, part.partition_id)]))
        register_reduce("_test_once", lambda key, values, env: [])
        with configure(split(toy, 1)) as handle:
            job = JobSpec(map_fn="_test_once", reduce_fn="_test_once")
            outputs, executed = handle.run_until(job, DynamicPayload(0, [5]))
            assert executed == 1
            assert outputs == [[]]


# --- socket mode --------------------------------------------------------------

WORKER_SNIPPET = (
    "from fcamr import mr, runtime, wire; "
    "import sys; "
    "sys.exit(wire.serve('127.0.0.1:0', runtime.MAP_REGISTRY))"
)


def spawn_worker():
    proc = subprocess.Popen(
        [sys.executable, "-c", WORKER_SNIPPET],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    line = proc.stdout.readline().strip()
    assert line.startswith("listening on "), line
    return proc, line.split()[-1]


@pytest.fixture
def worker():
    proc, addr = spawn_worker()
    yield addr
    if proc.poll() is None:
        proc.kill()
    proc.wait(timeout=10)


@pytest.fixture
def worker_pair():
    procs = [spawn_worker() for _ in range(2)]
    yield [addr for _, addr in procs]
    for proc, _ in procs:
        if proc.poll() is None:
            proc.kill()
        proc.wait(timeout=10)


class TestSocketMode:
    def test_full_job_matches_local(self, toy, worker_pair):
        parts = split(toy, 2)
        with configure(parts, mode="socket", addresses=worker_pair) as remote:
            remote_result = mr.mrganter_plus_drive(parts, remote)
        with configure(parts, workers=2) as local:
            local_result = mr.mrganter_plus_drive(parts, local)
        assert [c.intent for c in remote_result.concepts] == [
            c.intent for c in local_result.concepts
        ]
        assert [c.extent for c in remote_result.concepts] == [
            c.extent for c in local_result.concepts
        ]
        assert remote_result.batches == local_result.batches

    def test_static_data_sent_exactly_once(self, toy, worker):
        parts = split(toy, 2)
        with configure(parts, mode="socket", addresses=[worker]) as remote:
            mr.mrganter_drive(parts, remote)
            stats = remote.transfer_stats[worker]
            assert stats["configure_frames"] == 1
            assert stats["map_frames"] == 20
            assert stats["configure_bytes"] > 0

    def test_unreachable_worker_reported(self, toy):
        parts = split(toy, 1)
        with pytest.raises(WorkerError, match="cannot reach"):
            configure(parts, mode="socket", addresses=["127.0.0.1:1"])

    def test_missing_addresses_rejected(self, toy):
        with pytest.raises(ValueError):
            configure(split(toy, 1), mode="socket")

    def test_worker_survives_reconnect(self, toy, worker):
        parts = split(toy, 1)
        host, _, port = worker.rpartition(":")
        # first driver configures and leaves without SHUTDOWN
        sock = socket.create_connection((host, int(port)), timeout=10)
        wire.send_frame(sock, wire.configure_message(toy.attribute_names, list(parts)))
        assert wire.recv_frame(sock)["ok"] is True
        sock.close()
        # second driver still finds a live, configured worker
        sock = socket.create_connection((host, int(port)), timeout=10)
        wire.send_frame(sock, {"type": "STATUS"})
        reply = wire.recv_frame(sock)
        assert reply["configured"] is True
        wire.send_frame(sock, {"type": "SHUTDOWN"})
        assert wire.recv_frame(sock)["ok"] is True
        sock.close()


class TestProtocol:
    def test_malformed_frame_gets_error_reply(self, worker):
        host, _, port = worker.rpartition(":")
        sock = socket.create_connection((host, int(port)), timeout=10)
        junk = b"this is not json"
        sock.sendall(struct.pack("!I", len(junk)) + junk)
        reply = wire.recv_frame(sock)
        assert reply["type"] == "ERROR"
        # the connection is still usable afterwards
        wire.send_frame(sock, {"type": "STATUS"})
        assert wire.recv_frame(sock)["type"] == "STATUS"
        sock.close()

    def test_unknown_type_gets_error_reply(self, worker):
        host, _, port = worker.rpartition(":")
        sock = socket.create_connection((host, int(port)), timeout=10)
        payload = json.dumps({"type": "MAP_RESULT", "key": [], "values": []}).encode()
        sock.sendall(struct.pack("!I", len(payload)) + payload)
        reply = wire.recv_frame(sock)
        assert reply["type"] == "ERROR"
        sock.close()

    def test_map_before_configure_is_an_error(self, worker):
        host, _, port = worker.rpartition(":")
        sock = socket.create_connection((host, int(port)), timeout=10)
        wire.send_frame(
            sock,
            {"type": "MAP", "iteration": 0, "map_fn": "mrganter", "items": [[]]},
        )
        reply = wire.recv_frame(sock)
        assert reply["type"] == "ERROR"
        assert "CONFIGURE" in reply["message"]
        sock.close()

    def test_frame_codecs_round_trip(self):
        assert wire.indices_to_mask(wire.mask_to_indices(0b101101)) == 0b101101
        items = wire.encode_items([(0b11, 4), (0b100, -1)])
        assert wire.decode_items(items) == [(0b11, 4), (0b100, -1)]
        plain = wire.encode_items([0b11, 0])
        assert wire.decode_items(plain) == [0b11, 0]
        assert wire.decode_key(wire.encode_key((0b1010, 2))) == (0b1010, 2)
        assert wire.decode_key(wire.encode_key(0b1010)) == 0b1010
        values = [(3, 0b110, 1), (0, 0, 0)]
        assert wire.decode_values(wire.encode_values(values)) == values

    def test_row_packing_round_trip(self):
        masks = [0b1_00000001, 0, 0b111111111]
        data = wire.pack_rows(masks, 9)
        assert len(data) == 6
        assert wire.unpack_rows(data, 3, 9) == masks
