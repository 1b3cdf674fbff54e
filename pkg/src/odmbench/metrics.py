"""Stage-decomposed completion-time metrics and offloading-decision analytics.

A remote invocation decomposes into client encode, the request round trip,
and client decode; the server reports its own decode/execute/encode stages in
response headers, so the time the bytes actually spent on the network is
inferred rather than measured:

    comm = t_request - (t_srv_decode + t_srv_exec + t_srv_encode)

Marshalling time is everything except server execution: both client codec
stages, both server codec stages and the inferred communication time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    IncompleteGridError,
    InsufficientDataError,
    InvalidArgumentError,
    UndefinedRatioError,
)
from .workloads import OpKind


@dataclass(frozen=True)
class StageTimings:
    """One offloaded invocation, split into its six measured stages (seconds)."""

    t_encode_client: float
    t_request: float
    t_decode_client: float
    t_srv_decode: float
    t_srv_exec: float
    t_srv_encode: float

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0.0 or math.isnan(value):
                raise InvalidArgumentError(f"{name} must be >= 0, got {value}")


@dataclass(frozen=True)
class ExperimentRecord:
    """One repetition of one swept parameter combination."""

    mode: str
    op: OpKind
    n: int
    rate_bps: float
    codec: str
    rep: int
    timings: StageTimings
    t_local: float
    req_bytes: int
    resp_bytes: int


def comm_time(t: StageTimings) -> float:
    """Inferred network time; clock skew can drive the inference negative,
    in which case it clamps to 0 (see :func:`comm_is_clamped`)."""
    return max(0.0, t.t_request - (t.t_srv_decode + t.t_srv_exec + t.t_srv_encode))


def comm_is_clamped(t: StageTimings) -> bool:
    """True when the inferred communication time was negative and clamped."""
    return t.t_request < t.t_srv_decode + t.t_srv_exec + t.t_srv_encode


def remote_completion(t: StageTimings) -> float:
    """Total wall time of an offloaded invocation as seen by the client."""
    return t.t_encode_client + t.t_request + t.t_decode_client


def marshalling_ratio(t: StageTimings) -> float:
    """Fraction of the remote completion time spent marshalling (all codec
    stages plus inferred communication)."""
    total = remote_completion(t)
    if total <= 0.0:
        raise UndefinedRatioError("remote completion time is zero")
    marshalling = (
        t.t_encode_client
        + t.t_decode_client
        + t.t_srv_decode
        + t.t_srv_encode
        + comm_time(t)
    )
    return marshalling / total


def exec_share(t: StageTimings) -> float:
    """Fraction of the remote completion time spent executing on the server."""
    total = remote_completion(t)
    if total <= 0.0:
        raise UndefinedRatioError("remote completion time is zero")
    return t.t_srv_exec / total


def decide(t_local: float, t_remote: float) -> int:
    """1 when offloading wins strictly; ties prefer local execution (0)."""
    return 1 if t_remote < t_local else 0


def wrong_decision_penalty(t_local: float, t_remote: float) -> float:
    """Time lost by choosing the inferior execution site, whichever it is."""
    return abs(t_remote - t_local)


def alt_to_baseline_ratio(t_alt: float, t_baseline: float) -> float:
    if t_baseline <= 0.0:
        raise UndefinedRatioError("baseline completion time is zero")
    return t_alt / t_baseline


def decision_vector(rates, local_means, remote_means) -> list[int]:
    """Per-rate offload bits from mean completion times.

    ``local_means`` and ``remote_means`` map each rate in ``rates`` to the
    mean local/remote completion time of that cell.
    """
    bits = []
    for rate in rates:
        if rate not in local_means or rate not in remote_means:
            raise IncompleteGridError(f"missing rate {rate!r} in aggregates")
        bits.append(decide(local_means[rate], remote_means[rate]))
    return bits


def cumulative_penalty_vector(rates, labels, local_means, remote_means) -> dict[str, float]:
    """Per-codec-label sum of wrong-decision penalties over all rates.

    ``local_means[label][rate]`` / ``remote_means[label][rate]`` hold the
    mean completion times for one (op, n) group.
    """
    penalties: dict[str, float] = {}
    for label in labels:
        total = 0.0
        for rate in rates:
            try:
                local = local_means[label][rate]
                remote = remote_means[label][rate]
            except KeyError:
                raise IncompleteGridError(
                    f"missing cell codec={label!r} rate={rate!r}"
                ) from None
            total += wrong_decision_penalty(local, remote)
        penalties[label] = total
    return penalties


# Two-sided 95% Student-t critical values t(0.975, df), classic abridged
# table (e.g. NIST/SEMATECH e-Handbook, section 1.3.6.7.2).  Rows are exact;
# gaps are filled by linear interpolation in df; beyond df=120 the normal
# approximation 1.96 applies.
T_TABLE_975 = (
    (1, 12.706), (2, 4.303), (3, 3.182), (4, 2.776), (5, 2.571),
    (6, 2.447), (7, 2.365), (8, 2.306), (9, 2.262), (10, 2.228),
    (11, 2.201), (12, 2.179), (13, 2.160), (14, 2.145), (15, 2.131),
    (16, 2.120), (17, 2.110), (18, 2.101), (19, 2.093), (20, 2.086),
    (21, 2.080), (22, 2.074), (23, 2.069), (24, 2.064), (25, 2.060),
    (26, 2.056), (27, 2.052), (28, 2.048), (29, 2.045), (30, 2.042),
    (40, 2.021), (50, 2.009), (60, 2.000), (80, 1.990), (100, 1.984),
    (120, 1.980),
)


def t_quantile_975(df: int) -> float:
    """t(0.975, df) from the embedded table, interpolating between rows."""
    if df < 1:
        raise InvalidArgumentError(f"degrees of freedom must be >= 1, got {df}")
    if df > T_TABLE_975[-1][0]:
        return 1.96
    prev_df, prev_t = T_TABLE_975[0]
    for row_df, row_t in T_TABLE_975:
        if df == row_df:
            return row_t
        if df < row_df:
            frac = (df - prev_df) / (row_df - prev_df)
            return prev_t + frac * (row_t - prev_t)
        prev_df, prev_t = row_df, row_t
    raise AssertionError("unreachable")


def mean_ci95(samples) -> tuple[float, float]:
    """Mean and 95% confidence half-width t(0.975, n-1) * s / sqrt(n)."""
    xs = [float(x) for x in samples]
    n = len(xs)
    if n < 2:
        raise InsufficientDataError(f"need >= 2 samples, got {n}")
    mean = math.fsum(xs) / n
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    half_width = t_quantile_975(n - 1) * math.sqrt(var) / math.sqrt(n)
    return mean, half_width
