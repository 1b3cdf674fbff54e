"""Experiment configuration.

Config files are line oriented: one ``key = value`` per line, ``#`` starts a
comment, lists are comma separated.  Every key has a default, so an empty
file is a valid full-grid configuration.  Keys:

    ops               = MUL, INV, LN
    sizes             = 400, 500, ... 1200
    rates_mbps        = 10, 20, 40, 60, 80, 100
    latency_ms        = 0
    codecs            = TEXT-slow, TEXT-fast, RAW   (model)  /  TEXT, RAW (live)
    repetitions       = 40
    seed              = 1
    mode              = model | live
    server            = 127.0.0.1:9300    (live: a running serve endpoint)
    proxy_listen      = 127.0.0.1:0       (live: where the managed proxy binds)
    bucket_bytes      = 65536             (live shaping burst capacity)
    codec_cost.LABEL  = a, b              (model: one encode or decode of an
                                           n x n matrix costs a + b*n^2 s)
    exec_cost.OP      = c_client, c_server (model: executing OP on an n x n
                                           matrix costs c * n^p seconds with
                                           p = 3 for MUL/INV, 2 for LN)
    server_overhead_s = 0                 (model: flat extra request time)

Codec labels map onto wire formats by prefix: ``TEXT*`` marshals as JSON
text, ``RAW*`` as binary.  Two labels may share a wire format but differ in
modeled marshal speed (the default TEXT-slow / TEXT-fast pair).

The default cost model ships calibrated so that a default model-mode sweep
reproduces the qualitative offloading picture this harness is built to
study: matrix products become worth offloading as size and bandwidth grow
(binary marshalling first, at n=400 only at the top rate, all rates by
n=1200), while inversion and elementwise log never are, with marshalling
dominating their remote completion time.  ``scripts/calibrate_model.py``
re-derives and re-validates these coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .workloads import OpKind

EXEC_POWER = {OpKind.MUL: 3, OpKind.INV: 3, OpKind.LN: 2}

DEFAULT_OPS = (OpKind.MUL, OpKind.INV, OpKind.LN)
DEFAULT_SIZES = (400, 500, 600, 700, 800, 900, 1000, 1100, 1200)
DEFAULT_RATES_MBPS = (10.0, 20.0, 40.0, 60.0, 80.0, 100.0)
DEFAULT_MODEL_CODECS = ("TEXT-slow", "TEXT-fast", "RAW")
DEFAULT_LIVE_CODECS = ("TEXT", "RAW")
DEFAULT_REPETITIONS = 40
DEFAULT_SEED = 1
DEFAULT_SERVER = "127.0.0.1:9300"
DEFAULT_PROXY_LISTEN = "127.0.0.1:0"
DEFAULT_BUCKET_BYTES = 65536

DEFAULT_CODEC_COSTS = {
    "TEXT-slow": (0.13, 7.0e-6),
    "TEXT-fast": (0.13, 3.5e-6),
    "RAW": (0.13, 5.0e-9),
    # live labels reuse the plain-wire coefficients for model-mode dry runs
    "TEXT": (0.13, 7.0e-6),
}
DEFAULT_EXEC_COSTS = {
    OpKind.MUL: (1.34e-8, 1.675e-9),
    OpKind.INV: (1.0e-9, 1.2e-10),
    OpKind.LN: (4.0e-8, 5.0e-9),
}


@dataclass
class CostModel:
    """Deterministic stand-in for hardware timings (model mode)."""

    codec_costs: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_CODEC_COSTS))
    exec_costs: dict[OpKind, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_EXEC_COSTS))
    server_overhead_s: float = 0.0

    def marshal_cost(self, label: str, n: int) -> float:
        a, b = self.codec_costs[label]
        return a + b * n * n

    def exec_cost(self, op: OpKind, n: int, server: bool) -> float:
        c_client, c_server = self.exec_costs[op]
        c = c_server if server else c_client
        return c * float(n) ** EXEC_POWER[op]


@dataclass
class ExperimentConfig:
    ops: tuple[OpKind, ...] = DEFAULT_OPS
    sizes: tuple[int, ...] = DEFAULT_SIZES
    rates_mbps: tuple[float, ...] = DEFAULT_RATES_MBPS
    latency_ms: float = 0.0
    codecs: tuple[str, ...] | None = None  # None: mode-dependent default
    repetitions: int = DEFAULT_REPETITIONS
    seed: int = DEFAULT_SEED
    mode: str = "model"
    server: str = DEFAULT_SERVER
    proxy_listen: str = DEFAULT_PROXY_LISTEN
    bucket_bytes: int = DEFAULT_BUCKET_BYTES
    cost_model: CostModel = field(default_factory=CostModel)

    def resolved_codecs(self) -> tuple[str, ...]:
        if self.codecs is not None:
            return self.codecs
        return DEFAULT_MODEL_CODECS if self.mode == "model" else DEFAULT_LIVE_CODECS


def _parse_list(value: str, line_no: int, item_parser, what: str):
    items = [part.strip() for part in value.split(",")]
    if any(not part for part in items):
        raise ConfigError(f"line {line_no}: empty item in {what} list")
    try:
        return tuple(item_parser(part) for part in items)
    except ValueError:
        raise ConfigError(f"line {line_no}: cannot parse {what} list {value!r}") from None


def _parse_op(name: str) -> OpKind:
    try:
        return OpKind[name.upper()]
    except KeyError:
        raise ValueError(name) from None


def _parse_pair(value: str, line_no: int, key: str) -> tuple[float, float]:
    parts = [part.strip() for part in value.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"line {line_no}: {key} needs two comma-separated numbers")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"line {line_no}: cannot parse {key} value {value!r}") from None


def loads_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse config text; raises :class:`ConfigError` naming the bad line."""
    cfg = ExperimentConfig()
    explicit_codecs = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not value:
            raise ConfigError(f"line {line_no}: empty value for {key!r}")

        if key == "ops":
            try:
                cfg.ops = _parse_list(value, line_no, _parse_op, "ops")
            except ConfigError:
                raise ConfigError(f"line {line_no}: unknown op in {value!r}") from None
        elif key == "sizes":
            cfg.sizes = _parse_list(value, line_no, int, "sizes")
        elif key == "rates_mbps":
            cfg.rates_mbps = _parse_list(value, line_no, float, "rates_mbps")
        elif key == "latency_ms":
            cfg.latency_ms = _parse_scalar(float, value, line_no, key)
        elif key == "codecs":
            explicit_codecs = _parse_list(value, line_no, str, "codecs")
        elif key == "repetitions":
            cfg.repetitions = _parse_scalar(int, value, line_no, key)
        elif key == "seed":
            cfg.seed = _parse_scalar(int, value, line_no, key)
        elif key == "mode":
            cfg.mode = value
        elif key == "server":
            cfg.server = value
        elif key == "proxy_listen":
            cfg.proxy_listen = value
        elif key == "bucket_bytes":
            cfg.bucket_bytes = _parse_scalar(int, value, line_no, key)
        elif key == "server_overhead_s":
            cfg.cost_model.server_overhead_s = _parse_scalar(float, value, line_no, key)
        elif key.startswith("codec_cost."):
            label = key[len("codec_cost."):]
            if not label:
                raise ConfigError(f"line {line_no}: codec_cost needs a label suffix")
            cfg.cost_model.codec_costs[label] = _parse_pair(value, line_no, key)
        elif key.startswith("exec_cost."):
            try:
                op = _parse_op(key[len("exec_cost."):])
            except ValueError:
                raise ConfigError(f"line {line_no}: unknown op in key {key!r}") from None
            cfg.cost_model.exec_costs[op] = _parse_pair(value, line_no, key)
        else:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")

    cfg.codecs = explicit_codecs
    validate_config(cfg, source)
    return cfg


def _parse_scalar(kind, value: str, line_no: int, key: str):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"line {line_no}: cannot parse {key} value {value!r}") from None


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read(), source=path)


def validate_config(cfg: ExperimentConfig, source: str = "<config>") -> None:
    def fail(message: str):
        raise ConfigError(f"{source}: {message}")

    if cfg.mode not in ("live", "model"):
        fail(f"mode must be 'live' or 'model', got {cfg.mode!r}")
    if not cfg.ops:
        fail("ops must be non-empty")
    if not cfg.sizes:
        fail("sizes must be non-empty")
    if any(n < 1 for n in cfg.sizes):
        fail("sizes must be >= 1")
    if not cfg.rates_mbps:
        fail("rates_mbps must be non-empty")
    if any(r <= 0 for r in cfg.rates_mbps):
        fail("rates_mbps must be > 0")
    if cfg.latency_ms < 0:
        fail("latency_ms must be >= 0")
    if cfg.repetitions < 2:
        fail(f"repetitions must be >= 2, got {cfg.repetitions}")
    codecs = cfg.resolved_codecs()
    if not codecs:
        fail("codecs must be non-empty")
    if len(set(codecs)) != len(codecs):
        fail("codec labels must be unique")
    for label in codecs:
        if not (label.startswith("TEXT") or label.startswith("RAW")):
            fail(f"codec label {label!r} must start with 'TEXT' or 'RAW'")
    if cfg.mode == "model":
        for label in codecs:
            if label not in cfg.cost_model.codec_costs:
                fail(f"no codec_cost for label {label!r}")
            a, b = cfg.cost_model.codec_costs[label]
            if a < 0 or b < 0:
                fail(f"codec_cost.{label} coefficients must be >= 0")
        for op in cfg.ops:
            if op not in cfg.cost_model.exec_costs:
                fail(f"no exec_cost for op {op.name}")
            c_client, c_server = cfg.cost_model.exec_costs[op]
            if c_client < 0 or c_server < 0:
                fail(f"exec_cost.{op.name} coefficients must be >= 0")
        if cfg.cost_model.server_overhead_s < 0:
            fail("server_overhead_s must be >= 0")
    if cfg.mode == "live":
        for label in codecs:
            if label not in ("TEXT", "RAW"):
                fail(f"live codecs must be TEXT or RAW, got {label!r}")


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; loads_config(dump_config(cfg)) round-trips."""
    lines = [
        "ops = " + ", ".join(op.name for op in cfg.ops),
        "sizes = " + ", ".join(str(n) for n in cfg.sizes),
        "rates_mbps = " + ", ".join(repr(r) for r in cfg.rates_mbps),
        f"latency_ms = {cfg.latency_ms!r}",
        "codecs = " + ", ".join(cfg.resolved_codecs()),
        f"repetitions = {cfg.repetitions}",
        f"seed = {cfg.seed}",
        f"mode = {cfg.mode}",
        f"server = {cfg.server}",
        f"proxy_listen = {cfg.proxy_listen}",
        f"bucket_bytes = {cfg.bucket_bytes}",
        f"server_overhead_s = {cfg.cost_model.server_overhead_s!r}",
    ]
    for label, (a, b) in cfg.cost_model.codec_costs.items():
        lines.append(f"codec_cost.{label} = {a!r}, {b!r}")
    for op, (c_client, c_server) in cfg.cost_model.exec_costs.items():
        lines.append(f"exec_cost.{op.name} = {c_client!r}, {c_server!r}")
    return "\n".join(lines) + "\n"
