"""Socket protocol for remote workers.

Every frame is a 4-byte big-endian length prefix followed by a JSON
object with a "type" field. Frame types: CONFIGURE, MAP, MAP_RESULT,
STATUS, SHUTDOWN, ERROR. Static data (partition rows) travels once in
CONFIGURE; each MAP carries only the iteration's dynamic items, and the
worker answers with one MAP_RESULT per item.

Rows are packed row-major, least significant bit first within each byte,
ceil(attribute_count / 8) bytes per row, then base64-coded. Intent and
key payloads are sorted attribute index arrays.
"""

from __future__ import annotations

import base64
import json
import socket
import struct
from typing import Callable, Sequence

from .core import AttributeSet, FormalContext
from .partition import ContextPartition

HEADER = struct.Struct("!I")
MAX_FRAME = 1 << 29

FRAME_TYPES = {"CONFIGURE", "MAP", "MAP_RESULT", "STATUS", "SHUTDOWN", "ERROR"}


class ProtocolError(RuntimeError):
    """A frame violated the protocol (bad JSON, unknown type, oversized)."""


def send_frame(sock: socket.socket, message: dict) -> int:
    """Serialize one frame; returns the number of bytes put on the wire."""
    data = json.dumps(message, separators=(",", ":")).encode("utf-8")
    sock.sendall(HEADER.pack(len(data)) + data)
    return HEADER.size + len(data)


def recv_exact(sock: socket.socket, size: int) -> bytes:
    chunks = []
    remaining = size
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("peer closed the connection mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> dict:
    (size,) = HEADER.unpack(recv_exact(sock, HEADER.size))
    if size > MAX_FRAME:
        raise ProtocolError(f"frame of {size} bytes exceeds limit")
    try:
        message = json.loads(recv_exact(sock, size).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame payload is not valid JSON: {exc}") from exc
    if not isinstance(message, dict) or message.get("type") not in FRAME_TYPES:
        raise ProtocolError("frame payload is not an object with a known type")
    return message


# --- value codecs -----------------------------------------------------------

def mask_to_indices(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def indices_to_mask(indices: Sequence[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


def pack_rows(masks: Sequence[int], attribute_count: int) -> bytes:
    row_bytes = (attribute_count + 7) // 8
    return b"".join(mask.to_bytes(row_bytes, "little") for mask in masks)


def unpack_rows(data: bytes, object_count: int, attribute_count: int) -> list[int]:
    row_bytes = (attribute_count + 7) // 8
    if len(data) != row_bytes * object_count:
        raise ProtocolError(
            f"row block is {len(data)} bytes, expected {row_bytes * object_count}"
        )
    return [
        int.from_bytes(data[k * row_bytes : (k + 1) * row_bytes], "little")
        for k in range(object_count)
    ]


def encode_items(items: Sequence) -> dict:
    """Item arrays for a MAP frame; bounded items ship a parallel array."""
    if items and isinstance(items[0], tuple):
        return {
            "items": [mask_to_indices(mask) for mask, _ in items],
            "bounds": [bound for _, bound in items],
        }
    return {"items": [mask_to_indices(mask) for mask in items]}


def decode_items(message: dict) -> list:
    items = [indices_to_mask(ix) for ix in message["items"]]
    bounds = message.get("bounds")
    if bounds is None:
        return items
    if len(bounds) != len(items):
        raise ProtocolError("bounds array length does not match items")
    return list(zip(items, bounds))


def encode_key(key) -> list:
    if isinstance(key, tuple):
        mask, bound = key
        return [mask_to_indices(mask), bound]
    return mask_to_indices(key)


def decode_key(obj):
    if obj and isinstance(obj[0], list):
        return indices_to_mask(obj[0]), obj[1]
    return indices_to_mask(obj)


def encode_values(values) -> list:
    return [[attr, mask_to_indices(mask), pid] for attr, mask, pid in values]


def decode_values(rows) -> list:
    return [(attr, indices_to_mask(ix), pid) for attr, ix, pid in rows]


# --- CONFIGURE --------------------------------------------------------------

def configure_message(
    attribute_names: Sequence[str], parts: Sequence[ContextPartition]
) -> dict:
    return {
        "type": "CONFIGURE",
        "attribute_names": list(attribute_names),
        "partitions": [
            {
                "partition_id": p.partition_id,
                "object_names": list(p.local_ctx.object_names),
                "global_object_ids": list(p.global_object_ids),
                "rows": base64.b64encode(
                    pack_rows(
                        [row.mask for row in p.local_ctx.rows],
                        p.local_ctx.attribute_count,
                    )
                ).decode("ascii"),
            }
            for p in parts
        ],
    }


def partitions_from_configure(message: dict) -> list[ContextPartition]:
    attribute_names = message["attribute_names"]
    m = len(attribute_names)
    parts = []
    for entry in message["partitions"]:
        object_names = entry["object_names"]
        masks = unpack_rows(
            base64.b64decode(entry["rows"]), len(object_names), m
        )
        local = FormalContext(
            object_names,
            attribute_names,
            [AttributeSet(m, mask) for mask in masks],
        )
        parts.append(
            ContextPartition(
                local, tuple(entry["global_object_ids"]), entry["partition_id"]
            )
        )
    return parts


# --- worker server ----------------------------------------------------------

def serve(listen: str, map_registry: dict[str, Callable]) -> int:
    """Run a worker: bind, announce the bound address, serve until SHUTDOWN.

    The worker keeps its configured partitions across connections, so a
    driver may reconnect without resending static data.
    """
    host, _, port_text = listen.rpartition(":")
    if not host:
        raise ValueError(f"listen address must be host:port, got {listen!r}")
    server = socket.create_server((host, int(port_text)))
    bound_host, bound_port = server.getsockname()[:2]
    print(f"listening on {bound_host}:{bound_port}", flush=True)
    partitions: list[ContextPartition] = []
    try:
        while True:
            conn, _ = server.accept()
            with conn:
                if _serve_connection(conn, partitions, map_registry) == "shutdown":
                    return 0
    finally:
        server.close()


def _serve_connection(
    conn: socket.socket,
    partitions: list[ContextPartition],
    map_registry: dict[str, Callable],
) -> str:
    while True:
        try:
            message = recv_frame(conn)
        except ConnectionError:
            return "disconnected"
        except ProtocolError as exc:
            # The length prefix kept us frame-aligned, so report and go on.
            send_frame(conn, {"type": "ERROR", "message": str(exc)})
            continue
        kind = message["type"]
        if kind == "CONFIGURE":
            try:
                partitions[:] = partitions_from_configure(message)
            except (KeyError, ValueError, ProtocolError) as exc:
                send_frame(conn, {"type": "ERROR", "message": f"bad CONFIGURE: {exc}"})
                continue
            send_frame(
                conn,
                {
                    "type": "STATUS",
                    "ok": True,
                    "partitions": [p.partition_id for p in partitions],
                    "objects": sum(p.local_ctx.object_count for p in partitions),
                },
            )
        elif kind == "MAP":
            error = _handle_map(conn, message, partitions, map_registry)
            if error is not None:
                send_frame(conn, {"type": "ERROR", "message": error})
        elif kind == "STATUS":
            send_frame(
                conn,
                {
                    "type": "STATUS",
                    "ok": True,
                    "configured": bool(partitions),
                    "partitions": [p.partition_id for p in partitions],
                },
            )
        elif kind == "SHUTDOWN":
            send_frame(conn, {"type": "STATUS", "ok": True, "stopping": True})
            return "shutdown"
        else:
            send_frame(
                conn,
                {"type": "ERROR", "message": f"unexpected frame type {kind}"},
            )


def _handle_map(conn, message, partitions, map_registry) -> str | None:
    fn = map_registry.get(message.get("map_fn"))
    if fn is None:
        return f"unknown map function {message.get('map_fn')!r}"
    if not partitions:
        return "MAP before CONFIGURE"
    try:
        items = decode_items(message)
    except (KeyError, TypeError, ProtocolError) as exc:
        return f"bad MAP frame: {exc}"
    for item in items:
        key = None
        values: list = []
        for part in partitions:
            key, part_values = fn(part, item)
            values.extend(part_values)
        send_frame(
            conn,
            {
                "type": "MAP_RESULT",
                "key": encode_key(key),
                "values": encode_values(values),
            },
        )
    return None
