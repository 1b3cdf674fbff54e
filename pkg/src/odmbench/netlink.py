"""Loopback network emulation.

Two interchangeable views of the link between client and server:

* :func:`transfer_time` — the deterministic closed form used by model mode:
  one-way latency plus serialization at the configured rate.
* :class:`ShapingProxy` — a live TCP forwarder that paces each direction
  with an independent token bucket and delays each chunk by the configured
  one-way latency, standing in for a hardware traffic shaper.

:func:`selftest_link` plays the role of an iperf-style validation: it pushes
a bulk transfer through a running proxy into a :class:`ByteSink` and checks
the measured goodput against the configured rate.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass

from .errors import InvalidArgumentError, ProxyUnreachableError

# forwarding granularity; the bucket must hold at least one chunk
CHUNK_BYTES = 16384
DEFAULT_BUCKET_BYTES = 65536
_QUEUE_CHUNKS = 256
_SINK_COUNT = struct.Struct("<Q")


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    """Split ``host:port`` into its parts."""
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host:
        raise InvalidArgumentError(f"endpoint must be host:port, got {endpoint!r}")
    try:
        return host, int(port)
    except ValueError:
        raise InvalidArgumentError(f"bad port in endpoint {endpoint!r}") from None


def format_endpoint(address: tuple[str, int]) -> str:
    return f"{address[0]}:{address[1]}"


@dataclass(frozen=True)
class LinkParams:
    """Emulated link: rate in bits/s, one-way latency in seconds, token
    bucket burst capacity in bytes (live shaping only)."""

    rate_bps: float
    latency_s: float = 0.0
    bucket_bytes: int = DEFAULT_BUCKET_BYTES

    def __post_init__(self):
        if not self.rate_bps > 0:
            raise InvalidArgumentError(f"rate_bps must be > 0, got {self.rate_bps}")
        if self.latency_s < 0:
            raise InvalidArgumentError(f"latency_s must be >= 0, got {self.latency_s}")
        if self.bucket_bytes < CHUNK_BYTES:
            raise InvalidArgumentError(
                f"bucket_bytes must be >= {CHUNK_BYTES}, got {self.bucket_bytes}"
            )


def transfer_time(link: LinkParams, nbytes: int) -> float:
    """Deterministic one-way transfer time: latency + 8 * nbytes / rate."""
    if nbytes < 0:
        raise InvalidArgumentError(f"nbytes must be >= 0, got {nbytes}")
    return link.latency_s + 8.0 * nbytes / link.rate_bps


class TokenBucket:
    """Single-class token bucket: tokens are bytes, accruing at rate/8 per
    second up to ``capacity``.  ``consume`` blocks until enough accrued."""

    def __init__(self, rate_bps: float, capacity_bytes: int,
                 clock=time.monotonic, sleep=time.sleep):
        self._rate = rate_bps / 8.0  # bytes per second
        self._capacity = float(capacity_bytes)
        self._tokens = self._capacity  # starts full: bounded initial burst
        self._clock = clock
        self._sleep = sleep
        self._last = clock()

    def consume(self, nbytes: int) -> None:
        while True:
            now = self._clock()
            self._tokens = min(self._capacity, self._tokens + (now - self._last) * self._rate)
            self._last = now
            if self._tokens >= nbytes:
                self._tokens -= nbytes
                return
            self._sleep((nbytes - self._tokens) / self._rate)


class _StoppableServer:
    """Shared listener plumbing for the proxy and the sink."""

    def __init__(self, listen: str):
        self._listen = parse_endpoint(listen)
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()
        self._lock = threading.Lock()
        self._running = False

    @property
    def address(self) -> tuple[str, int]:
        if self._listener is None:
            raise RuntimeError("server not started")
        return self._listener.getsockname()[:2]

    @property
    def endpoint(self) -> str:
        return format_endpoint(self.address)

    def start(self):
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(self._listen)
        listener.listen(8)
        self._listener = listener
        self._running = True
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        self._threads.append(t)
        return self

    def stop(self):
        self._running = False
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.close()
            except OSError:
                pass
        for t in self._threads:
            t.join(timeout=5.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    def _track(self, sock: socket.socket):
        with self._lock:
            self._conns.add(sock)

    def _untrack(self, sock: socket.socket):
        with self._lock:
            self._conns.discard(sock)
        try:
            sock.close()
        except OSError:
            pass

    def _accept_loop(self):
        while self._running:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            self._track(conn)
            t = threading.Thread(target=self._handle, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _handle(self, conn: socket.socket):  # pragma: no cover - overridden
        raise NotImplementedError


class ShapingProxy(_StoppableServer):
    """Bidirectional TCP forwarder with per-direction token-bucket pacing
    and per-chunk latency injection.  Byte streams pass through unmodified."""

    def __init__(self, listen: str, upstream: str, link: LinkParams):
        super().__init__(listen)
        self._upstream = parse_endpoint(upstream)
        self.link = link

    def _handle(self, client: socket.socket):
        try:
            upstream = socket.create_connection(self._upstream, timeout=10.0)
        except OSError:
            self._untrack(client)
            return
        self._track(upstream)
        done = []
        for src, dst in ((client, upstream), (upstream, client)):
            done.append(self._pump(src, dst))
        for writer in done:
            writer.join()
        self._untrack(client)
        self._untrack(upstream)

    def _pump(self, src: socket.socket, dst: socket.socket) -> threading.Thread:
        """One direction: a reader stamps arrival deadlines, a writer paces."""
        chunks: queue.Queue = queue.Queue(maxsize=_QUEUE_CHUNKS)
        latency = self.link.latency_s

        def read_loop():
            while True:
                try:
                    data = src.recv(CHUNK_BYTES)
                except OSError:
                    data = b""
                chunks.put((data, time.monotonic() + latency))
                if not data:
                    return

        def write_loop():
            bucket = TokenBucket(self.link.rate_bps, self.link.bucket_bytes)
            while True:
                data, deadline = chunks.get()
                if not data:
                    try:
                        dst.shutdown(socket.SHUT_WR)
                    except OSError:
                        pass
                    return
                bucket.consume(len(data))
                delay = deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                try:
                    dst.sendall(data)
                except OSError:
                    # peer reset: tear down both sides
                    for s in (src, dst):
                        try:
                            s.close()
                        except OSError:
                            pass
                    return

        reader = threading.Thread(target=read_loop, daemon=True)
        writer = threading.Thread(target=write_loop, daemon=True)
        reader.start()
        writer.start()
        return writer


class ByteSink(_StoppableServer):
    """Counts every byte until EOF, then replies with the count (uint64 LE)."""

    def _handle(self, conn: socket.socket):
        count = 0
        try:
            while True:
                data = conn.recv(65536)
                if not data:
                    break
                count += len(data)
            conn.sendall(_SINK_COUNT.pack(count))
        except OSError:
            pass
        finally:
            self._untrack(conn)


@dataclass(frozen=True)
class LinkReport:
    """Result of a link self-test."""

    nbytes: int
    elapsed_s: float
    throughput_bps: float
    rtt_floor_s: float
    target_rate_bps: float
    ok: bool

    def render(self) -> str:
        return (
            f"transferred {self.nbytes} bytes in {self.elapsed_s:.3f} s: "
            f"{self.throughput_bps / 1e6:.3f} Mbps "
            f"(target {self.target_rate_bps / 1e6:.3f} Mbps, "
            f"rtt floor {self.rtt_floor_s * 1e3:.2f} ms) -> "
            f"{'PASS' if self.ok else 'FAIL'}"
        )


def _sink_roundtrip(addr: tuple[str, int], nbytes: int) -> float:
    """Send nbytes to a ByteSink behind a proxy; return elapsed seconds."""
    try:
        sock = socket.create_connection(addr, timeout=30.0)
    except OSError as exc:
        raise ProxyUnreachableError(f"cannot connect to proxy at {addr}: {exc}") from None
    try:
        sock.settimeout(600.0)
        chunk = bytes(CHUNK_BYTES)
        t0 = time.perf_counter()
        remaining = nbytes
        while remaining > 0:
            part = chunk if remaining >= CHUNK_BYTES else bytes(remaining)
            sock.sendall(part)
            remaining -= len(part)
        sock.shutdown(socket.SHUT_WR)
        reply = b""
        while len(reply) < _SINK_COUNT.size:
            data = sock.recv(_SINK_COUNT.size - len(reply))
            if not data:
                raise ProxyUnreachableError("connection closed before sink acknowledged")
            reply += data
        elapsed = time.perf_counter() - t0
    finally:
        sock.close()
    (counted,) = _SINK_COUNT.unpack(reply)
    if counted != nbytes:
        raise ProxyUnreachableError(
            f"sink counted {counted} bytes, expected {nbytes}"
        )
    return elapsed


def selftest_link(proxy_endpoint: str, nbytes: int, link: LinkParams,
                  tolerance: float = 0.10) -> LinkReport:
    """Validate a running proxy whose upstream is a :class:`ByteSink`.

    Measures bulk goodput over ``nbytes`` and the round-trip floor of a
    1-byte transfer; passes when goodput is within ``tolerance`` of the
    configured rate.
    """
    if nbytes < 1:
        raise InvalidArgumentError(f"nbytes must be >= 1, got {nbytes}")
    addr = parse_endpoint(proxy_endpoint)
    rtt_floor = _sink_roundtrip(addr, 1)
    elapsed = _sink_roundtrip(addr, nbytes)
    throughput = 8.0 * nbytes / elapsed
    ok = abs(throughput - link.rate_bps) <= tolerance * link.rate_bps
    return LinkReport(
        nbytes=nbytes,
        elapsed_s=elapsed,
        throughput_bps=throughput,
        rtt_floor_s=rtt_floor,
        target_rate_bps=link.rate_bps,
        ok=ok,
    )
