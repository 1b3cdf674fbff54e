"""Function-call offloading over HTTP/1.1.

The server dispatches ``POST /invoke/{mul|inv|ln}`` to registered kernel
handlers, selecting the codec from the request Content-Type, and reports its
decode/execute/encode stage durations in integer-microsecond response
headers so the client can infer communication time from a single exchange:

    X-Srv-Decode-Us, X-Srv-Exec-Us, X-Srv-Encode-Us

Requests are processed strictly one at a time; bodies require a
Content-Length (no chunked transfer).  Request and response always use the
same codec.
"""

from __future__ import annotations

import http.client
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np

from .codecs import CodecKind, decode, encode
from .errors import (
    DomainError,
    InvalidArgumentError,
    MalformedPayloadError,
    OffloadUnreachableError,
    RemoteError,
    SingularMatrixError,
)
from .metrics import StageTimings
from .netlink import format_endpoint, parse_endpoint
from .workloads import OpKind, elementwise_ln, invert, matmul

INVOKE_PREFIX = "/invoke/"
HDR_SRV_DECODE = "X-Srv-Decode-Us"
HDR_SRV_EXEC = "X-Srv-Exec-Us"
HDR_SRV_ENCODE = "X-Srv-Encode-Us"

_KERNEL_ERRORS = (DomainError, SingularMatrixError, InvalidArgumentError)


def default_registry() -> dict[OpKind, object]:
    """Kernel handlers; MUL squares its single operand."""
    return {
        OpKind.MUL: lambda m: matmul(m, m),
        OpKind.INV: invert,
        OpKind.LN: elementwise_ln,
    }


class _OffloadHTTPServer(HTTPServer):
    # sequential by design: one request at a time, no pipelining
    def __init__(self, address, registry):
        super().__init__(address, _Handler)
        self.registry = registry


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "odmbench"

    def log_message(self, fmt, *args):  # keep measurement output clean
        pass

    def do_POST(self):
        if not self.path.startswith(INVOKE_PREFIX):
            self._fail(404, f"unknown path {self.path!r}")
            return
        try:
            op = OpKind.from_wire(self.path[len(INVOKE_PREFIX):])
        except InvalidArgumentError:
            self._fail(404, f"unknown path {self.path!r}")
            return
        registry = self.server.registry
        if op not in registry:
            self._fail(404, f"no handler registered for {op.name}")
            return
        kind = CodecKind.from_content_type(self.headers.get("Content-Type"))
        if kind is None:
            self._fail(415, f"unsupported content type {self.headers.get('Content-Type')!r}")
            return
        length_header = self.headers.get("Content-Length")
        if length_header is None:
            self._fail(411, "Content-Length required")
            return
        try:
            length = int(length_header)
            if length < 0:
                raise ValueError
        except ValueError:
            self._fail(400, f"bad Content-Length {length_header!r}")
            return
        body = self.rfile.read(length)
        if len(body) != length:
            self._fail(400, f"short body: got {len(body)} of {length} bytes")
            return

        t0 = time.perf_counter_ns()
        try:
            matrix = decode(kind, body)
        except MalformedPayloadError as exc:
            self._fail(400, f"malformed payload: {exc}")
            return
        t1 = time.perf_counter_ns()
        try:
            result = registry[op](matrix)
        except _KERNEL_ERRORS as exc:
            self._fail(422, f"kernel error: {exc}")
            return
        except Exception as exc:  # keep the server alive on handler bugs
            self._fail(500, f"internal error: {exc}")
            return
        t2 = time.perf_counter_ns()
        try:
            payload = encode(kind, result)
        except InvalidArgumentError as exc:
            self._fail(500, f"result not encodable: {exc}")
            return
        t3 = time.perf_counter_ns()

        self.send_response(200)
        self.send_header("Content-Type", kind.content_type)
        self.send_header("Content-Length", str(payload.nbytes))
        self.send_header(HDR_SRV_DECODE, str((t1 - t0) // 1000))
        self.send_header(HDR_SRV_EXEC, str((t2 - t1) // 1000))
        self.send_header(HDR_SRV_ENCODE, str((t3 - t2) // 1000))
        self.end_headers()
        self.wfile.write(payload.data)

    def _fail(self, status: int, message: str):
        body = message.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class ComputeServer:
    """A running offload server; start/stop from a controlling thread."""

    def __init__(self, endpoint: str, registry=None):
        self._endpoint = parse_endpoint(endpoint)
        self._registry = default_registry() if registry is None else dict(registry)
        self._server: _OffloadHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        if self._server is None:
            raise RuntimeError("server not started")
        return self._server.server_address[:2]

    @property
    def endpoint(self) -> str:
        return format_endpoint(self.address)

    def start(self) -> "ComputeServer":
        self._server = _OffloadHTTPServer(self._endpoint, self._registry)
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05},
            daemon=True,
        )
        self._thread.start()
        return self

    def stop(self):
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


def serve(endpoint: str, registry=None) -> ComputeServer:
    """Bind and start an offload server; returns the running handle."""
    return ComputeServer(endpoint, registry).start()


def _timing_header(response, name: str) -> float:
    value = response.getheader(name)
    if value is None:
        raise RemoteError(response.status, f"missing timing header {name}")
    try:
        micros = int(value)
        if micros < 0:
            raise ValueError
    except ValueError:
        raise RemoteError(response.status, f"bad timing header {name}={value!r}") from None
    return micros / 1e6


def invoke_remote(
    endpoint: str,
    fn: OpKind,
    codec: CodecKind,
    m: np.ndarray,
    timeout: float = 600.0,
) -> tuple[np.ndarray, StageTimings]:
    """Offload one kernel invocation.

    Encodes ``m``, POSTs it, decodes the response, and returns the result
    matrix with the six-stage timing decomposition.  ``t_request`` covers
    first request byte to last response byte (the connection is established
    beforehand so TCP setup is excluded).
    """
    host, port = parse_endpoint(endpoint)

    t0 = time.perf_counter()
    payload = encode(codec, m)
    t_encode = time.perf_counter() - t0

    conn = http.client.HTTPConnection(host, port, timeout=timeout)
    try:
        try:
            conn.connect()
        except OSError as exc:
            raise OffloadUnreachableError(f"cannot connect to {endpoint}: {exc}") from None
        headers = {"Content-Type": codec.content_type}
        path = INVOKE_PREFIX + fn.wire_name
        try:
            t1 = time.perf_counter()
            conn.request("POST", path, body=payload.data, headers=headers)
            response = conn.getresponse()
            body = response.read()
            t_request = time.perf_counter() - t1
        except (OSError, http.client.HTTPException) as exc:
            raise OffloadUnreachableError(f"transport failure: {exc}") from None
        if response.status != 200:
            raise RemoteError(response.status, body.decode("utf-8", errors="replace"))
        srv_decode = _timing_header(response, HDR_SRV_DECODE)
        srv_exec = _timing_header(response, HDR_SRV_EXEC)
        srv_encode = _timing_header(response, HDR_SRV_ENCODE)
    finally:
        conn.close()

    t2 = time.perf_counter()
    result = decode(codec, body)
    t_decode = time.perf_counter() - t2

    timings = StageTimings(
        t_encode_client=t_encode,
        t_request=t_request,
        t_decode_client=t_decode,
        t_srv_decode=srv_decode,
        t_srv_exec=srv_exec,
        t_srv_encode=srv_encode,
    )
    return result, timings
