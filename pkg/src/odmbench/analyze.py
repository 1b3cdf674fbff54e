"""Aggregate swept records into the offloading-decision report.

For every (op, n, codec, rate) cell the analyzer reports mean and 95%
confidence half-width per stage, the inferred communication time, the
marshalling share of completion, the offload decision against the local
baseline, and the wrong-decision penalty.  Per (op, n, codec) it assembles
the decision vector over the rate grid; per (op, n) the cumulative penalty
per codec.  Ratios against the baseline codec (the first codec appearing in
the records) mirror the completion-time comparison between marshalling
methods.

Cells whose local mean falls inside the remote 95% interval are flagged as
border cases: there the decision is statistically fragile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import IncompleteGridError
from .metrics import (
    ExperimentRecord,
    StageTimings,
    comm_is_clamped,
    comm_time,
    cumulative_penalty_vector,
    decide,
    decision_vector,
    exec_share,
    marshalling_ratio,
    mean_ci95,
    remote_completion,
    wrong_decision_penalty,
)
from .workloads import OpKind

SUMMARY_COLUMNS = (
    "op", "n", "codec", "rate_bps", "reps",
    "local_mean_s", "local_ci95_s", "remote_mean_s", "remote_ci95_s",
    "t_enc_cli_mean_s", "t_enc_cli_ci95_s",
    "t_request_mean_s", "t_request_ci95_s",
    "t_dec_cli_mean_s", "t_dec_cli_ci95_s",
    "t_srv_dec_mean_s", "t_srv_dec_ci95_s",
    "t_srv_exec_mean_s", "t_srv_exec_ci95_s",
    "t_srv_enc_mean_s", "t_srv_enc_ci95_s",
    "comm_mean_s", "marshalling_ratio", "exec_share",
    "decision", "border", "comm_clamped_reps", "penalty_s",
    "alt_to_baseline_ratio",
    "decision_vector", "decision_vector_sum", "cumulative_penalty_s",
)
SUMMARY_HEADER = ",".join(SUMMARY_COLUMNS)

_STAGES = (
    "t_encode_client", "t_request", "t_decode_client",
    "t_srv_decode", "t_srv_exec", "t_srv_encode",
)


@dataclass(frozen=True)
class CellStats:
    """Aggregates for one (op, n, codec, rate) cell."""

    op: OpKind
    n: int
    codec: str
    rate_bps: float
    reps: int
    local_mean: float
    local_ci: float
    remote_mean: float
    remote_ci: float
    stage_means: dict[str, float]
    stage_cis: dict[str, float]
    comm_mean: float
    marshalling_ratio: float
    exec_share: float
    decision: int
    border: bool
    comm_clamped_reps: int
    penalty: float

    @property
    def mean_timings(self) -> StageTimings:
        return StageTimings(**{name: self.stage_means[name] for name in _STAGES})


@dataclass
class AnalysisReport:
    ops: list[OpKind]
    sizes: list[int]
    codecs: list[str]
    rates: list[float]
    cells: dict[tuple[OpKind, int, str, float], CellStats]
    decision_vectors: dict[tuple[OpKind, int, str], list[int]]
    cumulative_penalties: dict[tuple[OpKind, int], dict[str, float]]
    baseline_codec: str

    def alt_to_baseline(self, op: OpKind, n: int, codec: str, rate: float) -> float:
        base = self.cells[op, n, self.baseline_codec, rate].remote_mean
        return self.cells[op, n, codec, rate].remote_mean / base

    def summary_rows(self):
        for op in self.ops:
            for n in self.sizes:
                for codec in self.codecs:
                    dv = self.decision_vectors[op, n, codec]
                    dv_str = "".join(str(b) for b in dv)
                    pen_total = self.cumulative_penalties[op, n][codec]
                    for rate in self.rates:
                        cell = self.cells[op, n, codec, rate]
                        yield (
                            op.name, str(n), codec, _fmt_rate(rate), str(cell.reps),
                            repr(cell.local_mean), repr(cell.local_ci),
                            repr(cell.remote_mean), repr(cell.remote_ci),
                            repr(cell.stage_means["t_encode_client"]),
                            repr(cell.stage_cis["t_encode_client"]),
                            repr(cell.stage_means["t_request"]),
                            repr(cell.stage_cis["t_request"]),
                            repr(cell.stage_means["t_decode_client"]),
                            repr(cell.stage_cis["t_decode_client"]),
                            repr(cell.stage_means["t_srv_decode"]),
                            repr(cell.stage_cis["t_srv_decode"]),
                            repr(cell.stage_means["t_srv_exec"]),
                            repr(cell.stage_cis["t_srv_exec"]),
                            repr(cell.stage_means["t_srv_encode"]),
                            repr(cell.stage_cis["t_srv_encode"]),
                            repr(cell.comm_mean),
                            repr(cell.marshalling_ratio), repr(cell.exec_share),
                            str(cell.decision), str(int(cell.border)),
                            str(cell.comm_clamped_reps), repr(cell.penalty),
                            repr(self.alt_to_baseline(op, n, codec, rate)),
                            dv_str, str(sum(dv)), repr(pen_total),
                        )

    def write_summary_csv(self, path: str) -> None:
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write(SUMMARY_HEADER + "\n")
            for row in self.summary_rows():
                fh.write(",".join(row) + "\n")

    def render_text(self) -> str:
        out = []
        rate_heads = "  ".join(f"{r / 1e6:>9.1f}M" for r in self.rates)
        for op in self.ops:
            for n in self.sizes:
                local = self.cells[op, n, self.codecs[0], self.rates[0]].local_mean
                out.append(f"== {op.name} n={n}  local {local:.6f} s ==")
                out.append(f"{'codec':<12}{'metric':<22}{rate_heads}")
                for codec in self.codecs:
                    dv = self.decision_vectors[op, n, codec]
                    cells = [self.cells[op, n, codec, r] for r in self.rates]
                    rows = [
                        ("remote mean s", [f"{c.remote_mean:>10.6f}" for c in cells]),
                        ("remote ci95 s", [f"{c.remote_ci:>10.6f}" for c in cells]),
                        ("marshalling ratio", [f"{c.marshalling_ratio:>10.4f}" for c in cells]),
                        ("alt/baseline", [
                            f"{self.alt_to_baseline(op, n, codec, r):>10.4f}"
                            for r in self.rates
                        ]),
                        ("penalty s", [f"{c.penalty:>10.6f}" for c in cells]),
                        ("decision", [f"{c.decision:>10d}" for c in cells]),
                        ("border", [f"{int(c.border):>10d}" for c in cells]),
                    ]
                    for i, (name, values) in enumerate(rows):
                        label = codec if i == 0 else ""
                        out.append(f"{label:<12}{name:<22}" + "  ".join(values))
                    out.append(
                        f"{'':<12}decision vector       "
                        f"[{''.join(str(b) for b in dv)}] sum={sum(dv)} "
                        f"cumulative penalty={self.cumulative_penalties[op, n][codec]:.6f} s"
                    )
                out.append("")
        clamped = sum(c.comm_clamped_reps for c in self.cells.values())
        out.append(f"records with clamped communication time: {clamped}")
        return "\n".join(out) + "\n"


def _fmt_rate(rate_bps: float) -> str:
    return str(int(rate_bps)) if float(rate_bps).is_integer() else repr(float(rate_bps))


def _ordered_unique(values):
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen


def analyze_records(records: list[ExperimentRecord]) -> AnalysisReport:
    if not records:
        raise IncompleteGridError("no records to analyze")
    ops = _ordered_unique(r.op for r in records)
    sizes = sorted({r.n for r in records})
    codecs = _ordered_unique(r.codec for r in records)
    rates = sorted({r.rate_bps for r in records})

    groups: dict[tuple, list[ExperimentRecord]] = {}
    for r in records:
        groups.setdefault((r.op, r.n, r.codec, r.rate_bps), []).append(r)

    cells: dict[tuple, CellStats] = {}
    for op in ops:
        for n in sizes:
            for codec in codecs:
                for rate in rates:
                    group = groups.get((op, n, codec, rate))
                    if not group:
                        raise IncompleteGridError(
                            f"missing cell op={op.name} n={n} codec={codec} "
                            f"rate_bps={_fmt_rate(rate)}"
                        )
                    cells[op, n, codec, rate] = _cell_stats(op, n, codec, rate, group)

    decision_vectors = {}
    for op in ops:
        for n in sizes:
            for codec in codecs:
                local_means = {r: cells[op, n, codec, r].local_mean for r in rates}
                remote_means = {r: cells[op, n, codec, r].remote_mean for r in rates}
                decision_vectors[op, n, codec] = decision_vector(
                    rates, local_means, remote_means)

    cumulative_penalties = {}
    for op in ops:
        for n in sizes:
            local = {c: {r: cells[op, n, c, r].local_mean for r in rates} for c in codecs}
            remote = {c: {r: cells[op, n, c, r].remote_mean for r in rates} for c in codecs}
            cumulative_penalties[op, n] = cumulative_penalty_vector(
                rates, codecs, local, remote)

    return AnalysisReport(
        ops=ops, sizes=sizes, codecs=codecs, rates=rates, cells=cells,
        decision_vectors=decision_vectors,
        cumulative_penalties=cumulative_penalties,
        baseline_codec=codecs[0],
    )


def _mean(values) -> float:
    xs = list(values)
    return math.fsum(xs) / len(xs)


def _cell_stats(op, n, codec, rate, group) -> CellStats:
    group = sorted(group, key=lambda r: r.rep)
    stage_means = {}
    stage_cis = {}
    for name in _STAGES:
        mean, ci = mean_ci95([getattr(r.timings, name) for r in group])
        stage_means[name] = mean
        stage_cis[name] = ci
    local_mean, local_ci = mean_ci95([r.t_local for r in group])
    remote_mean, remote_ci = mean_ci95([remote_completion(r.timings) for r in group])
    comm_mean = _mean(comm_time(r.timings) for r in group)
    mean_timings = StageTimings(**stage_means)
    return CellStats(
        op=op, n=n, codec=codec, rate_bps=rate, reps=len(group),
        local_mean=local_mean, local_ci=local_ci,
        remote_mean=remote_mean, remote_ci=remote_ci,
        stage_means=stage_means, stage_cis=stage_cis,
        comm_mean=comm_mean,
        marshalling_ratio=marshalling_ratio(mean_timings),
        exec_share=exec_share(mean_timings),
        decision=decide(local_mean, remote_mean),
        border=abs(local_mean - remote_mean) <= remote_ci,
        comm_clamped_reps=sum(comm_is_clamped(r.timings) for r in group),
        penalty=wrong_decision_penalty(local_mean, remote_mean),
    )


def analyze_csv(in_path: str, summary_path: str | None = None) -> AnalysisReport:
    """Analyze a records CSV; optionally persist the summary CSV."""
    from .runner import read_records_csv

    report = analyze_records(read_records_csv(in_path))
    if summary_path is not None:
        report.write_summary_csv(summary_path)
    return report
