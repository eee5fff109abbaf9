"""Minimal MQTT 3.1.1 subscriber (QoS 0).

Topic scheme: ``home/<room>/<sensor_id>`` for sensor readings and
``home/uwb/<tag_id>`` for position fixes; payloads reuse the JSONL record
grammar from :mod:`homechat.ingest`.

No MQTT client package is available in this environment, so the handful of
packet types a QoS-0 subscriber needs (CONNECT/CONNACK, SUBSCRIBE/SUBACK,
PUBLISH, PINGREQ/PINGRESP) are implemented directly on a TCP socket.
"""

from __future__ import annotations

import logging
import socket
import struct
import time
import uuid
from typing import Iterator
from urllib.parse import urlparse

from .ingest import MalformedLine, RawReading, parse_event_line
from .model import HomechatError, UserPosition

log = logging.getLogger(__name__)


class ConnectionLost(HomechatError):
    pass


CONNECT = 0x10
CONNACK = 0x20
PUBLISH = 0x30
SUBSCRIBE = 0x82
SUBACK = 0x90
PINGREQ = 0xC0
PINGRESP = 0xD0
DISCONNECT = 0xE0

KEEPALIVE = 60


def encode_length(n: int) -> bytes:
    out = bytearray()
    while True:
        byte = n % 128
        n //= 128
        if n:
            byte |= 0x80
        out.append(byte)
        if not n:
            return bytes(out)


def _encode_str(s: str) -> bytes:
    data = s.encode("utf-8")
    return struct.pack("!H", len(data)) + data


def connect_packet(client_id: str, keepalive: int = KEEPALIVE) -> bytes:
    var = _encode_str("MQTT") + bytes([4, 0x02]) + struct.pack("!H", keepalive)
    payload = _encode_str(client_id)
    body = var + payload
    return bytes([CONNECT]) + encode_length(len(body)) + body


def subscribe_packet(topic_filter: str, packet_id: int = 1) -> bytes:
    body = struct.pack("!H", packet_id) + _encode_str(topic_filter) + b"\x00"
    return bytes([SUBSCRIBE]) + encode_length(len(body)) + body


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionLost("connection closed by broker")
        buf += chunk
    return buf


def read_packet(sock: socket.socket) -> tuple[int, bytes]:
    """Read one MQTT control packet; returns (first header byte, body)."""
    head = _read_exact(sock, 1)[0]
    length = 0
    shift = 0
    while True:
        byte = _read_exact(sock, 1)[0]
        length |= (byte & 0x7F) << shift
        if not byte & 0x80:
            break
        shift += 7
        if shift > 21:
            raise ConnectionLost("malformed remaining length")
    return head, _read_exact(sock, length) if length else b""


def decode_publish(head: int, body: bytes) -> tuple[str, bytes]:
    (tlen,) = struct.unpack_from("!H", body, 0)
    topic = body[2 : 2 + tlen].decode("utf-8")
    offset = 2 + tlen
    if head & 0x06:  # QoS > 0 carries a packet id we do not use
        offset += 2
    return topic, body[offset:]


def topic_matches(filter_: str, topic: str) -> bool:
    """MQTT topic filter matching with '+' and '#' wildcards."""
    fparts = filter_.split("/")
    tparts = topic.split("/")
    for i, fp in enumerate(fparts):
        if fp == "#":
            return True
        if i >= len(tparts):
            return False
        if fp != "+" and fp != tparts[i]:
            return False
    return len(fparts) == len(tparts)


class MqttSubscriber:
    """Blocking QoS-0 subscriber with reconnect-and-backoff."""

    def __init__(
        self,
        broker_uri: str,
        topic_filter: str = "home/#",
        client_id: str | None = None,
        max_retries: int = 5,
        backoff: float = 0.5,
        connect_timeout: float = 5.0,
    ):
        parsed = urlparse(broker_uri if "//" in broker_uri else f"mqtt://{broker_uri}")
        self.host = parsed.hostname or "localhost"
        self.port = parsed.port or 1883
        self.topic_filter = topic_filter
        self.client_id = client_id or f"homechat-{uuid.uuid4().hex[:8]}"
        self.max_retries = max_retries
        self.backoff = backoff
        self.connect_timeout = connect_timeout
        self._sock: socket.socket | None = None
        self.skipped = 0  # malformed payloads seen and dropped
        self._closed = False

    def _connect_once(self) -> socket.socket:
        sock = socket.create_connection((self.host, self.port), timeout=self.connect_timeout)
        sock.sendall(connect_packet(self.client_id))
        head, body = read_packet(sock)
        if head & 0xF0 != CONNACK or len(body) < 2 or body[1] != 0:
            sock.close()
            raise ConnectionLost(f"broker refused connection (0x{head:02x})")
        sock.sendall(subscribe_packet(self.topic_filter))
        head, _ = read_packet(sock)
        if head & 0xF0 != SUBACK:
            sock.close()
            raise ConnectionLost("no SUBACK from broker")
        sock.settimeout(KEEPALIVE / 2)
        return sock

    def _connect_with_retries(self) -> socket.socket:
        delay = self.backoff
        for attempt in range(self.max_retries + 1):
            try:
                return self._connect_once()
            except (OSError, ConnectionLost) as exc:
                if attempt == self.max_retries:
                    raise ConnectionLost(
                        f"broker {self.host}:{self.port} unreachable after "
                        f"{self.max_retries + 1} attempts: {exc}"
                    ) from exc
                log.warning("connect attempt %d failed (%s); retrying", attempt + 1, exc)
                time.sleep(delay)
                delay *= 2
        raise AssertionError("unreachable")

    def close(self) -> None:
        self._closed = True
        if self._sock is not None:
            try:
                self._sock.sendall(bytes([DISCONNECT, 0]))
            except OSError:
                pass
            self._sock.close()
            self._sock = None

    def events(self) -> Iterator[RawReading | UserPosition]:
        """Yield parsed events as they are published; reconnects on drop."""
        self._sock = self._connect_with_retries()
        last_ping = time.monotonic()
        while not self._closed:
            try:
                head, body = read_packet(self._sock)
            except socket.timeout:
                if time.monotonic() - last_ping > KEEPALIVE / 2:
                    self._sock.sendall(bytes([PINGREQ, 0]))
                    last_ping = time.monotonic()
                continue
            except (OSError, ConnectionLost):
                if self._closed:
                    return
                log.warning("broker connection lost; reconnecting")
                self._sock = self._connect_with_retries()
                continue
            kind = head & 0xF0
            if kind == PUBLISH:
                topic, payload = decode_publish(head, body)
                try:
                    yield parse_event_line(payload.decode("utf-8", "replace"))
                except MalformedLine as exc:
                    self.skipped += 1
                    log.warning("malformed payload on %s: %s", topic, exc)
            elif kind == PINGRESP:
                continue


def subscribe(
    broker_uri: str, topic_filter: str = "home/#", **kwargs
) -> Iterator[RawReading | UserPosition]:
    """Convenience wrapper: connect, subscribe and yield events forever."""
    sub = MqttSubscriber(broker_uri, topic_filter, **kwargs)
    try:
        yield from sub.events()
    finally:
        sub.close()
