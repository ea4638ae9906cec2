"""INI run configuration: laboratory inputs in Hz, run options, named presets.

Layout::

    [params]          physical inputs; rates/frequencies in Hz (2*pi applied on load)
    [run]             channel, format, seed, jobs, resolution, n_traj
    [sweep]           axes = name:scale:lo:hi:n, ... ; outputs = field, ...
    [preset.NAME]     overrides of [params] for a named point (e.g. green)

Unknown sections or keys are rejected, naming the offender.  The effective
configuration can be dumped and re-read without loss (floats use ``repr``).
"""
from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError, NonPositiveFrequency
from .model import Channel, PhysicalParams, hz, table_one
from .sweep import AXIS_NAMES, FIELDS, Axis

# keys given in Hz in the file, stored in rad/s in PhysicalParams
FREQUENCY_KEYS = ("Omega", "Gamma", "gamma_m", "kappa_minus", "g", "omega_L")

PARAM_KEYS = ("m", "Omega", "Gamma", "T", "gamma_m", "kappa_minus", "zeta", "delta_minus",
              "g", "eta", "N_th", "damping", "ell", "omega_L", "P_in", "abar")


RUN_KEYS = ("channel", "format", "seed", "jobs", "resolution", "n_traj")
SWEEP_KEYS = ("axes", "outputs")
PRESET_KEYS = tuple(k for k in PARAM_KEYS if k != "damping")

FORMATS = ("csv", "json")


def default_params_hz() -> dict[str, object]:
    p = table_one()
    out: dict[str, object] = {}
    for k in PARAM_KEYS:
        v = getattr(p, k)
        if k in FREQUENCY_KEYS and v is not None:
            # undo the 2*pi round trip so the defaults read back as entered
            v = float(f"{v / (2.0 * math.pi):.15g}")
        out[k] = v
    return out


def default_jobs() -> int:
    env = os.environ.get("OPTOENT_JOBS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"OPTOENT_JOBS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("OPTOENT_JOBS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass
class RunConfig:
    params_hz: dict[str, object] = field(default_factory=default_params_hz)
    channel: Channel = Channel.X
    format: str = "csv"
    seed: int = 0
    jobs: int = field(default_factory=default_jobs)
    resolution: int = 40
    n_traj: int = 2000
    axes: str | None = None
    outputs: str | None = None
    presets: dict[str, dict[str, float]] = field(default_factory=lambda: {"black": {}})

    # -- conversion -----------------------------------------------------
    def physical(self, overrides_hz: dict[str, float] | None = None) -> PhysicalParams:
        merged = dict(self.params_hz)
        if overrides_hz:
            merged.update(overrides_hz)
        kwargs = {}
        for k, v in merged.items():
            if v is None:
                continue
            kwargs[k] = hz(v) if k in FREQUENCY_KEYS else v
        try:
            return PhysicalParams(**kwargs)
        except (DomainError, NonPositiveFrequency) as exc:
            raise ConfigError(f"invalid parameters: {exc}") from exc

    def preset_params(self, name: str) -> PhysicalParams:
        if name not in self.presets:
            raise ConfigError(
                f"unknown preset {name!r}; defined: {sorted(self.presets)} "
                f"(add a [preset.{name}] section to the config)")
        return self.physical(self.presets[name])

    def preset_overrides_si(self) -> dict[str, dict[str, float]]:
        return {name: {k: (hz(v) if k in FREQUENCY_KEYS else v) for k, v in over.items()}
                for name, over in self.presets.items()}

    def sweep_axes(self) -> tuple[Axis, ...] | None:
        if not self.axes:
            return None
        return parse_axes(self.axes)

    def sweep_outputs(self) -> tuple[str, ...]:
        if not self.outputs:
            return FIELDS
        return parse_outputs(self.outputs)

    # -- serialization --------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["params"] = {k: _fmt(v) for k, v in self.params_hz.items() if v is not None}
        cp["run"] = {"channel": self.channel.value, "format": self.format, "seed": str(self.seed),
                     "jobs": str(self.jobs), "resolution": str(self.resolution),
                     "n_traj": str(self.n_traj)}
        sweep = {}
        if self.axes:
            sweep["axes"] = self.axes
        if self.outputs:
            sweep["outputs"] = self.outputs
        if sweep:
            cp["sweep"] = sweep
        for name in sorted(self.presets):
            cp[f"preset.{name}"] = {k: _fmt(v) for k, v in self.presets[name].items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (int, float)) and not isinstance(v, bool) else str(v)


def _float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _int(section: str, key: str, raw: str, minimum: int) -> int:
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None
    if v < minimum:
        raise ConfigError(f"[{section}] {key}: must be >= {minimum}, got {v}")
    return v


def parse_axes(text: str) -> tuple[Axis, ...]:
    """``"delta_minus:linear:0.01:1:40, Gamma:log:1e-9:1e-3:40"`` (Gamma in Hz)."""
    axes = []
    for item in (s.strip() for s in text.split(",")):
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 5:
            raise ConfigError(f"axis {item!r}: expected name:scale:lo:hi:n")
        name, scale, lo, hi, n = parts
        if name not in AXIS_NAMES:
            raise ConfigError(f"axis {item!r}: unknown parameter {name!r}; choose from {AXIS_NAMES}")
        if scale not in ("linear", "log"):
            raise ConfigError(f"axis {item!r}: scale must be linear or log")
        lo_v, hi_v = _float("sweep", "axes", lo), _float("sweep", "axes", hi)
        n_v = _int("sweep", "axes", n, 1)
        if name == "Gamma":
            lo_v, hi_v = hz(lo_v), hz(hi_v)
        if scale == "log" and not (lo_v > 0 and hi_v > 0):
            raise ConfigError(f"axis {item!r}: log scale needs positive bounds")
        axes.append(Axis.log(name, lo_v, hi_v, n_v) if scale == "log"
                    else Axis.linear(name, lo_v, hi_v, n_v))
    if not 1 <= len(axes) <= 2:
        raise ConfigError("a sweep needs one or two axes")
    if len({a.name for a in axes}) != len(axes):
        raise ConfigError("duplicate sweep axis")
    return tuple(axes)


def parse_outputs(text: str) -> tuple[str, ...]:
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    for n in names:
        if n not in FIELDS:
            raise ConfigError(f"unknown output field {n!r}; choose from {FIELDS}")
    return names


def _apply(cfg: RunConfig, section: str, key: str, raw: str) -> None:
    raw = raw.strip()
    if section == "params":
        if key not in PARAM_KEYS:
            raise ConfigError(f"unknown key {key!r} in [params]")
        cfg.params_hz[key] = raw if key == "damping" else _float(section, key, raw)
    elif section == "run":
        if key not in RUN_KEYS:
            raise ConfigError(f"unknown key {key!r} in [run]")
        if key == "channel":
            try:
                cfg.channel = Channel.parse(raw)
            except DomainError as exc:
                raise ConfigError(f"[run] channel: {exc}") from None
        elif key == "format":
            if raw not in FORMATS:
                raise ConfigError(f"[run] format must be one of {FORMATS}, got {raw!r}")
            cfg.format = raw
        elif key == "seed":
            cfg.seed = _int(section, key, raw, 0)
        elif key == "jobs":
            cfg.jobs = _int(section, key, raw, 1)
        elif key == "resolution":
            cfg.resolution = _int(section, key, raw, 2)
        elif key == "n_traj":
            cfg.n_traj = _int(section, key, raw, 100)
    elif section == "sweep":
        if key not in SWEEP_KEYS:
            raise ConfigError(f"unknown key {key!r} in [sweep]")
        if key == "axes":
            parse_axes(raw)
            cfg.axes = raw
        else:
            parse_outputs(raw)
            cfg.outputs = raw
    elif section.startswith("preset."):
        name = section[len("preset."):]
        if not name:
            raise ConfigError("empty preset name")
        if key not in PRESET_KEYS:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        cfg.presets.setdefault(name, {})[key] = _float(section, key, raw)
    else:
        raise ConfigError(f"unknown section [{section}]")


def load_config(text: str | None = None, sets: list[str] | None = None) -> RunConfig:
    """Parse INI text (None = defaults) then apply ``section.key=value`` overrides.

    A bare ``key=value`` override targets ``[params]`` if it names a physical
    input and ``[run]`` otherwise.
    """
    cfg = RunConfig()
    if text is not None:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        for section in cp.sections():
            if section.startswith("preset."):
                cfg.presets.setdefault(section[len("preset."):], {})
            for key, raw in cp.items(section):
                _apply(cfg, section, key, raw)
    for item in sets or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if "." in key and key.rsplit(".", 1)[0] in ("params", "run", "sweep") or key.startswith("preset."):
            section, key = key.rsplit(".", 1)
        else:
            section = "params" if key in PARAM_KEYS else "run" if key in RUN_KEYS else \
                "sweep" if key in SWEEP_KEYS else None
            if section is None:
                raise ConfigError(f"unknown key {key!r} in --set")
        _apply(cfg, section, key, raw)
    cfg.physical()  # validate eagerly
    for name in cfg.presets:
        cfg.preset_params(name)
    return cfg
