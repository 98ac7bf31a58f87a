"""Run configuration files.

The format is flat ``key = value`` text with optional ``[section]`` headers
and ``#`` comments::

    command = stop-release

    [params]
    n_sites = 512
    g_eff = 5

    [protocol]
    t_ramp = 200

    [pulse]
    sigma = 16
    k0 = pi/2

Numeric values may be written as arithmetic on numbers and ``pi``.
Unspecified keys fall back to the defaults below (``G = 1``, ``L = 1``,
``omega_m = 100``, ``g_eff = 5``).
"""
from __future__ import annotations

import ast
import enum
import math
import operator
from dataclasses import asdict, dataclass, field

from .dynamics import DetuningProtocol, Frame, PulseSpec, RampShape
from .model import ArrayParams
from .oracle import Boundary

__all__ = ["Command", "OutputFormat", "ConfigError", "SweepSpec", "RunSettings", "RunConfig", "parse_config"]


class Command(enum.Enum):
    BANDS = "bands"
    BANDWIDTH_SWEEP = "bandwidth-sweep"
    VELOCITY_SWEEP = "velocity-sweep"
    MIXING_SWEEP = "mixing-sweep"
    GAP_SWEEP = "gap-sweep"
    PROPAGATE = "propagate"
    STOP_RELEASE = "stop-release"

    @property
    def is_sweep(self) -> bool:
        return self.value.endswith("-sweep")


class OutputFormat(enum.Enum):
    CSV = "csv"
    JSON = "json"


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.key = key
        self.line = line


@dataclass(frozen=True)
class SweepSpec:
    variable: str = "detuning_om"
    start: float = -100.0
    stop: float = 100.0
    points: int = 201
    k: float = math.pi / 2  # kL at which velocity, mixing and the fixed-k gap are evaluated


@dataclass(frozen=True)
class RunSettings:
    dt: float = 2.5e-4
    sample_every: int = 400
    t_end: float | None = None
    frame: Frame = Frame.MIDBAND
    boundary: Boundary = Boundary.PERIODIC


@dataclass(frozen=True)
class RunConfig:
    command: Command
    params: ArrayParams
    n_k: int = 256
    sweep: SweepSpec | None = None
    protocol: DetuningProtocol | None = None
    release: DetuningProtocol | None = None
    pulse: PulseSpec | None = None
    run: RunSettings = field(default_factory=RunSettings)
    output_path: str | None = None
    output_format: OutputFormat | None = None

    def resolved(self) -> dict:
        """Plain-data view of every setting, defaults included."""

        def plain(obj):
            if obj is None:
                return None
            d = asdict(obj)
            return {k: (v.value if isinstance(v, enum.Enum) else v) for k, v in d.items()}

        return {
            "command": self.command.value,
            "n_k": self.n_k,
            "params": plain(self.params),
            "sweep": plain(self.sweep),
            "protocol": plain(self.protocol),
            "release": plain(self.release),
            "pulse": plain(self.pulse),
            "run": plain(self.run),
        }


_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def _eval_number(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            val = ev(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(text)

    return ev(ast.parse(text.strip(), mode="eval").body)


def _float(text):
    val = float(_eval_number(text))
    if not math.isfinite(val):
        raise ValueError(text)
    return val


def _int(text):
    val = _eval_number(text)
    if isinstance(val, float):
        if not val.is_integer():
            raise ValueError(text)
        val = int(val)
    return val


def _enum(cls):
    def conv(text):
        return cls(text.strip().lower())

    conv.__name__ = cls.__name__
    return conv


_float.__name__ = "number"
_int.__name__ = "integer"

# section -> key -> converter
SCHEMA = {
    "": {"command": _enum(Command), "n_k": _int},
    "params": {
        "n_sites": _int,
        "spacing": _float,
        "omega_m": _float,
        "g_eff": _float,
        "hopping": _float,
        "detuning_om": _float,
    },
    "sweep": {"variable": str, "start": _float, "stop": _float, "points": _int, "k": _float},
    "protocol": {
        "initial_dom": _float,
        "final_dom": _float,
        "t_hold_pre": _float,
        "t_ramp": _float,
        "t_hold_post": _float,
        "shape": _enum(RampShape),
    },
    "release": {"t_ramp": _float, "t_hold_post": _float, "shape": _enum(RampShape)},
    "pulse": {"center": _float, "k0": _float, "sigma": _float},
    "run": {
        "dt": _float,
        "sample_every": _int,
        "t_end": _float,
        "frame": _enum(Frame),
        "boundary": _enum(Boundary),
    },
    "output": {"path": str, "format": _enum(OutputFormat)},
}

SWEEP_VARIABLES = ("detuning_om",)


def _tokenize(text: str):
    """Return ``{section: {key: (value, line)}}`` and the line of each section header."""
    values: dict[str, dict[str, tuple[object, int]]] = {"": {}}
    headers: dict[str, int] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=lineno)
            section = line[1:-1].strip().lower()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", key=section, line=lineno)
            if section in headers:
                raise ConfigError(f"duplicate section [{section}]", key=section, line=lineno)
            headers[section] = lineno
            values.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        where = f"[{section}]" if section else "the top level"
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in {where}", key=key, line=lineno)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r} in {where}", key=key, line=lineno)
        conv = SCHEMA[section][key]
        try:
            parsed = conv(val)
        except (ValueError, SyntaxError, TypeError, ZeroDivisionError, OverflowError):
            expected = getattr(conv, "__name__", "value")
            raise ConfigError(f"key {key!r}: cannot read {val!r} as {expected}", key=key, line=lineno) from None
        values[section][key] = (parsed, lineno)
    return values, headers


def parse_config(text: str, command: str | Command | None = None) -> RunConfig:
    """Parse and validate a run configuration.

    ``command`` supplies the command when the text has none (the CLI passes
    its positional argument); if both are given they must agree.
    """
    values, headers = _tokenize(text)

    def get(section, key, default=None):
        entry = values.get(section, {}).get(key)
        return default if entry is None else entry[0]

    def line_of(section, key=None):
        if key is not None and key in values.get(section, {}):
            return values[section][key][1]
        return headers.get(section)

    def build(section, key_for_error, factory):
        try:
            return factory()
        except ValueError as exc:
            raise ConfigError(f"{key_for_error}: {exc}", key=key_for_error, line=line_of(section)) from None

    cmd = get("", "command")
    if command is not None:
        cli_cmd = Command(command)
        if cmd is not None and cmd is not cli_cmd:
            raise ConfigError(
                f"command {cmd.value!r} in the file disagrees with {cli_cmd.value!r} on the command line",
                key="command",
                line=line_of("", "command"),
            )
        cmd = cli_cmd
    if cmd is None:
        raise ConfigError("missing required key 'command'", key="command")

    omega_m = get("params", "omega_m", 100.0)
    params = build(
        "params",
        "params",
        lambda: ArrayParams(
            n_sites=get("params", "n_sites", 512),
            spacing=get("params", "spacing", 1.0),
            omega_m=omega_m,
            g_eff=get("params", "g_eff", 5.0),
            hopping=get("params", "hopping", 1.0),
            detuning_om=get("params", "detuning_om", -omega_m),
        ),
    )

    n_k = get("", "n_k", 256)
    if n_k < 2:
        raise ConfigError("n_k must be >= 2", key="n_k", line=line_of("", "n_k"))

    sweep = None
    if "sweep" in headers:
        sweep = SweepSpec(
            variable=get("sweep", "variable", "detuning_om"),
            start=get("sweep", "start", -100.0),
            stop=get("sweep", "stop", 100.0),
            points=get("sweep", "points", 201),
            k=get("sweep", "k", math.pi / 2),
        )
        if sweep.variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"sweep variable {sweep.variable!r} not supported (use {', '.join(SWEEP_VARIABLES)})",
                key="variable",
                line=line_of("sweep", "variable"),
            )
        if sweep.points < 2:
            raise ConfigError("points must be >= 2", key="points", line=line_of("sweep", "points"))
        if not sweep.start < sweep.stop:
            raise ConfigError("sweep requires start < stop", key="stop", line=line_of("sweep", "stop"))
    elif cmd.is_sweep:
        raise ConfigError(f"command {cmd.value!r} requires a [sweep] section", key="sweep")

    protocol = release = None
    if "protocol" in headers:
        protocol = build(
            "protocol",
            "protocol",
            lambda: DetuningProtocol(
                initial_dom=get("protocol", "initial_dom", -params.omega_m),
                final_dom=get("protocol", "final_dom", params.omega_m),
                t_hold_pre=get("protocol", "t_hold_pre", 20.0),
                t_ramp=get("protocol", "t_ramp", 200.0),
                t_hold_post=get("protocol", "t_hold_post", 50.0),
                shape=get("protocol", "shape", RampShape.LINEAR),
            ),
        )
    elif cmd is Command.STOP_RELEASE:
        raise ConfigError("command 'stop-release' requires a [protocol] section", key="protocol")
    if "release" in headers and cmd is not Command.STOP_RELEASE:
        raise ConfigError("[release] only applies to 'stop-release'", key="release", line=headers["release"])
    if cmd is Command.STOP_RELEASE:
        release = build(
            "release",
            "release",
            lambda: DetuningProtocol(
                initial_dom=protocol.final_dom,
                final_dom=protocol.initial_dom,
                t_ramp=get("release", "t_ramp", protocol.t_ramp),
                t_hold_post=get("release", "t_hold_post", protocol.t_hold_pre),
                shape=get("release", "shape", protocol.shape),
            ),
        )

    pulse = None
    if "pulse" in headers:
        pulse = build(
            "pulse",
            "pulse",
            lambda: _pulse(
                center=get("pulse", "center", params.n_sites / 8),
                k0=get("pulse", "k0", math.pi / 2),
                sigma=get("pulse", "sigma", 16.0),
                spacing=params.spacing,
            ),
        )
    elif cmd in (Command.STOP_RELEASE, Command.PROPAGATE):
        raise ConfigError(f"command {cmd.value!r} requires a [pulse] section", key="pulse")

    run = RunSettings(
        dt=get("run", "dt", 2.5e-4),
        sample_every=get("run", "sample_every", 400),
        t_end=get("run", "t_end"),
        frame=get("run", "frame", Frame.MIDBAND),
        boundary=get("run", "boundary", Boundary.PERIODIC),
    )
    if not run.dt > 0:
        raise ConfigError("dt must be > 0", key="dt", line=line_of("run", "dt"))
    if run.sample_every < 1:
        raise ConfigError("sample_every must be >= 1", key="sample_every", line=line_of("run", "sample_every"))
    if run.t_end is not None and run.t_end < 0:
        raise ConfigError("t_end must be >= 0", key="t_end", line=line_of("run", "t_end"))
    if cmd is Command.PROPAGATE and protocol is None and run.t_end is None:
        raise ConfigError("'propagate' needs either a [protocol] section or run.t_end", key="t_end")
    if run.boundary is Boundary.PERIODIC and params.n_sites < 3 and cmd in (Command.PROPAGATE, Command.STOP_RELEASE):
        raise ConfigError("periodic runs need n_sites >= 3", key="n_sites", line=line_of("params", "n_sites"))
    if cmd is Command.STOP_RELEASE and run.boundary is not Boundary.PERIODIC:
        raise ConfigError("'stop-release' runs on a periodic lattice", key="boundary", line=line_of("run", "boundary"))

    return RunConfig(
        command=cmd,
        params=params,
        n_k=n_k,
        sweep=sweep,
        protocol=protocol,
        release=release,
        pulse=pulse,
        run=run,
        output_path=get("output", "path"),
        output_format=get("output", "format"),
    )


def _pulse(center, k0, sigma, spacing):
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if not -math.pi <= k0 * spacing <= math.pi:
        raise ValueError(f"carrier k0 L = {k0 * spacing} lies outside the first Brillouin zone")
    return PulseSpec(center=center, k0=k0, sigma=sigma)
