"""Factorial experiment sweeps and record persistence.

The sweep iterates ops x sizes x rates x codecs x repetitions in that order
and emits one CSV row per repetition.  Live mode drives a real offload
server through a managed shaping proxy and measures wall-clock stages;
model mode computes every stage deterministically from the cost model plus
the closed-form link formula applied to real encoded payload sizes, so a
model run is a pure function of (config, seed).

CSV schema (header is bit-exact, '.' decimal point, no locale formatting):

    mode,op,n,rate_bps,codec,rep,t_local_s,t_enc_cli_s,t_request_s,
    t_dec_cli_s,t_srv_dec_s,t_srv_exec_s,t_srv_enc_s,req_bytes,resp_bytes
"""

from __future__ import annotations

from typing import Iterable, Iterator

from .codecs import CodecKind, encode
from .config import ExperimentConfig
from .errors import InvalidArgumentError
from .metrics import ExperimentRecord, StageTimings
from .netlink import LinkParams, ShapingProxy, transfer_time
from .offload import invoke_remote
from .workloads import OpKind, execute, gen_matrix, local_execute

CSV_COLUMNS = (
    "mode", "op", "n", "rate_bps", "codec", "rep",
    "t_local_s", "t_enc_cli_s", "t_request_s", "t_dec_cli_s",
    "t_srv_dec_s", "t_srv_exec_s", "t_srv_enc_s",
    "req_bytes", "resp_bytes",
)
CSV_HEADER = ",".join(CSV_COLUMNS)


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_rate(rate_bps: float) -> str:
    return str(int(rate_bps)) if float(rate_bps).is_integer() else repr(float(rate_bps))


def record_to_row(r: ExperimentRecord) -> str:
    t = r.timings
    return ",".join((
        r.mode, r.op.name, str(r.n), _fmt_rate(r.rate_bps), r.codec, str(r.rep),
        _fmt_float(r.t_local),
        _fmt_float(t.t_encode_client), _fmt_float(t.t_request),
        _fmt_float(t.t_decode_client), _fmt_float(t.t_srv_decode),
        _fmt_float(t.t_srv_exec), _fmt_float(t.t_srv_encode),
        str(r.req_bytes), str(r.resp_bytes),
    ))


def row_to_record(row: str, line_no: int) -> ExperimentRecord:
    parts = row.split(",")
    if len(parts) != len(CSV_COLUMNS):
        raise InvalidArgumentError(
            f"line {line_no}: expected {len(CSV_COLUMNS)} fields, got {len(parts)}"
        )
    try:
        timings = StageTimings(
            t_encode_client=float(parts[7]),
            t_request=float(parts[8]),
            t_decode_client=float(parts[9]),
            t_srv_decode=float(parts[10]),
            t_srv_exec=float(parts[11]),
            t_srv_encode=float(parts[12]),
        )
        return ExperimentRecord(
            mode=parts[0],
            op=OpKind[parts[1]],
            n=int(parts[2]),
            rate_bps=float(parts[3]),
            codec=parts[4],
            rep=int(parts[5]),
            timings=timings,
            t_local=float(parts[6]),
            req_bytes=int(parts[13]),
            resp_bytes=int(parts[14]),
        )
    except (KeyError, ValueError) as exc:
        raise InvalidArgumentError(f"line {line_no}: bad record: {exc}") from None


def write_records_csv(records: Iterable[ExperimentRecord], path: str) -> int:
    count = 0
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for record in records:
            fh.write(record_to_row(record) + "\n")
            count += 1
    return count


def read_records_csv(path: str) -> list[ExperimentRecord]:
    with open(path, "r", encoding="ascii", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise InvalidArgumentError(
                f"unexpected CSV header: {header!r}"
            )
        return [
            row_to_record(line.rstrip("\n"), line_no)
            for line_no, line in enumerate(fh, start=2)
            if line.strip()
        ]


def iter_records(cfg: ExperimentConfig) -> Iterator[ExperimentRecord]:
    if cfg.mode == "model":
        yield from _model_records(cfg)
    else:
        yield from _live_records(cfg)


def run_experiment(cfg: ExperimentConfig, out_path: str) -> list[ExperimentRecord]:
    """Run the full sweep, persist it as CSV, and return the records."""
    records = []
    with open(out_path, "w", encoding="ascii", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for record in iter_records(cfg):
            fh.write(record_to_row(record) + "\n")
            records.append(record)
    return records


# ---------------------------------------------------------------------------
# model mode
# ---------------------------------------------------------------------------

def _model_records(cfg: ExperimentConfig) -> Iterator[ExperimentRecord]:
    cm = cfg.cost_model
    codecs = cfg.resolved_codecs()
    wire_kinds = sorted({CodecKind.for_label(label) for label in codecs},
                        key=lambda k: k.value)

    # real payloads are encoded once per distinct (matrix, wire format) to
    # obtain true byte counts; only the byte counts feed the model
    req_bytes: dict[tuple[int, CodecKind], int] = {}
    resp_bytes: dict[tuple[OpKind, int, CodecKind], int] = {}
    for n in cfg.sizes:
        m = gen_matrix(cfg.seed, n)
        for kind in wire_kinds:
            req_bytes[n, kind] = encode(kind, m).nbytes
        for op in cfg.ops:
            result = execute(op, m)
            for kind in wire_kinds:
                resp_bytes[op, n, kind] = encode(kind, result).nbytes

    for op in cfg.ops:
        for n in cfg.sizes:
            t_local = cm.exec_cost(op, n, server=False)
            srv_exec = cm.exec_cost(op, n, server=True)
            for rate_mbps in cfg.rates_mbps:
                rate_bps = rate_mbps * 1e6
                link = LinkParams(rate_bps=rate_bps, latency_s=cfg.latency_ms / 1e3)
                for label in codecs:
                    kind = CodecKind.for_label(label)
                    stage = cm.marshal_cost(label, n)
                    comm = (transfer_time(link, req_bytes[n, kind])
                            + transfer_time(link, resp_bytes[op, n, kind]))
                    t_request = comm + stage + srv_exec + stage + cm.server_overhead_s
                    timings = StageTimings(
                        t_encode_client=stage,
                        t_request=t_request,
                        t_decode_client=stage,
                        t_srv_decode=stage,
                        t_srv_exec=srv_exec,
                        t_srv_encode=stage,
                    )
                    for rep in range(cfg.repetitions):
                        yield ExperimentRecord(
                            mode="model", op=op, n=n, rate_bps=rate_bps,
                            codec=label, rep=rep, timings=timings,
                            t_local=t_local,
                            req_bytes=req_bytes[n, kind],
                            resp_bytes=resp_bytes[op, n, kind],
                        )


# ---------------------------------------------------------------------------
# live mode
# ---------------------------------------------------------------------------

def _live_records(cfg: ExperimentConfig) -> Iterator[ExperimentRecord]:
    codecs = cfg.resolved_codecs()
    matrices = {n: gen_matrix(cfg.seed, n) for n in cfg.sizes}
    # local baselines do not depend on rate or codec: measured once per
    # (op, n, rep) and reused across the rest of the grid
    local_times: dict[tuple[OpKind, int], list[float]] = {}
    payload_bytes: dict[tuple[OpKind, int, CodecKind], tuple[int, int]] = {}

    for op in cfg.ops:
        for n in cfg.sizes:
            m = matrices[n]
            times = []
            result = None
            for _ in range(cfg.repetitions):
                result, elapsed = local_execute(op, m)
                times.append(elapsed)
            local_times[op, n] = times
            for label in codecs:
                kind = CodecKind.for_label(label)
                if (op, n, kind) not in payload_bytes:
                    payload_bytes[op, n, kind] = (
                        encode(kind, m).nbytes,
                        encode(kind, result).nbytes,
                    )

    for op in cfg.ops:
        for n in cfg.sizes:
            m = matrices[n]
            for rate_mbps in cfg.rates_mbps:
                link = LinkParams(
                    rate_bps=rate_mbps * 1e6,
                    latency_s=cfg.latency_ms / 1e3,
                    bucket_bytes=cfg.bucket_bytes,
                )
                proxy = ShapingProxy(cfg.proxy_listen, cfg.server, link)
                proxy.start()
                try:
                    for label in codecs:
                        kind = CodecKind.for_label(label)
                        req_nbytes, resp_nbytes = payload_bytes[op, n, kind]
                        for rep in range(cfg.repetitions):
                            _, timings = invoke_remote(proxy.endpoint, op, kind, m)
                            yield ExperimentRecord(
                                mode="live", op=op, n=n,
                                rate_bps=link.rate_bps, codec=label, rep=rep,
                                timings=timings,
                                t_local=local_times[op, n][rep],
                                req_bytes=req_nbytes,
                                resp_bytes=resp_nbytes,
                            )
                finally:
                    proxy.stop()
