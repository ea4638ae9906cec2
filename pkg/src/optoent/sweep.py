"""Point evaluation of the full pipeline, parameter grids and threshold extraction."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .errors import NoCrossing, OptoentError
from .gaussian import (combine_modes, entanglement_from_matrix, purity, squeeze_eigenvalues,
                       squeezing_angle)
from .model import Channel, ModeSpec, PhysicalParams, both_modes, hz
from .riccati import Cov2, conditional_steady_state

AXIS_NAMES = ("Gamma", "delta_minus", "zeta")

FIELDS = (
    "epsilon_cr", "E_N", "E_min_plus", "E_min_minus", "purity_plus", "purity_minus",
    "angle_plus", "angle_minus", "angle_diff", "omega_m_plus", "omega_m_minus",
    "Cq_minus", "Cq_plus",
)
FREQUENCY_FIELDS = ("omega_m_plus", "omega_m_minus")


@dataclass(frozen=True, eq=False)
class PointResult:
    params: PhysicalParams
    channel: Channel
    plus: ModeSpec
    minus: ModeSpec
    V_plus: Cov2
    V_minus: Cov2
    epsilon_cr: float
    E_N: float
    E_min_plus: float
    E_min_minus: float
    purity_plus: float
    purity_minus: float
    angle_plus: float
    angle_minus: float

    @property
    def angle_diff(self) -> float:
        return abs(self.angle_plus - self.angle_minus)

    @property
    def omega_m_plus(self) -> float:
        return self.plus.omega_m

    @property
    def omega_m_minus(self) -> float:
        return self.minus.omega_m

    @property
    def Cq_minus(self) -> float:
        return self.minus.quantum_cooperativity

    @property
    def Cq_plus(self) -> float:
        return self.plus.quantum_cooperativity

    def scalars(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in FIELDS}


def evaluate_point(params: PhysicalParams, channel: "Channel | str" = Channel.X) -> PointResult:
    """Common/differential steady states, mirror-basis entanglement and squeezing."""
    channel = Channel.parse(channel)
    plus, minus = both_modes(params)
    Vp = conditional_steady_state(plus, channel)
    Vm = conditional_steady_state(minus, channel)
    report = entanglement_from_matrix(combine_modes(Vp, Vm, plus.omega_m, minus.omega_m))
    return PointResult(
        params=params, channel=channel, plus=plus, minus=minus, V_plus=Vp, V_minus=Vm,
        epsilon_cr=report.epsilon_cr, E_N=report.E_N,
        E_min_plus=squeeze_eigenvalues(Vp)[0], E_min_minus=squeeze_eigenvalues(Vm)[0],
        purity_plus=purity(Vp), purity_minus=purity(Vm),
        angle_plus=squeezing_angle(Vp), angle_minus=squeezing_angle(Vm),
    )


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple[float, ...]
    scale: str = "linear"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"axis must be one of {AXIS_NAMES}, got {self.name!r}")
        if len(self.values) < 1:
            raise ValueError("axis needs at least one value")

    @classmethod
    def linear(cls, name: str, lo: float, hi: float, n: int) -> "Axis":
        return cls(name, tuple(float(v) for v in np.linspace(lo, hi, n)), "linear")

    @classmethod
    def log(cls, name: str, lo: float, hi: float, n: int) -> "Axis":
        return cls(name, tuple(float(v) for v in np.geomspace(lo, hi, n)), "log")


@dataclass(frozen=True)
class SweepSpec:
    base: PhysicalParams
    axes: tuple[Axis, ...]
    channel: Channel = Channel.X
    outputs: tuple[str, ...] = FIELDS

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep has one or two axes")
        if len({a.name for a in self.axes}) != len(self.axes):
            raise ValueError("duplicate sweep axis")
        unknown = set(self.outputs) - set(FIELDS)
        if unknown:
            raise ValueError(f"unknown output fields {sorted(unknown)}")
        object.__setattr__(self, "channel", Channel.parse(self.channel))

    def cells(self) -> list[dict[str, float]]:
        names = [a.name for a in self.axes]
        return [dict(zip(names, combo)) for combo in product(*(a.values for a in self.axes))]


def _evaluate_cell(args) -> dict:
    base, channel, coords = args
    record: dict = dict(coords)
    try:
        point = evaluate_point(base.replace(**coords), channel)
    except (OptoentError, ValueError, ArithmeticError) as exc:
        record["status"] = type(exc).__name__
        record.update({name: math.nan for name in FIELDS})
        return record
    record["status"] = "ok"
    record.update(point.scalars())
    return record


@dataclass(eq=False)
class GridResult:
    axes: list[Axis]
    records: list[dict]
    metadata: dict = field(default_factory=dict)
    spec: SweepSpec | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a.values) for a in self.axes)

    def field(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=float).reshape(self.shape)

    def columns(self, view: str = "params") -> list[str]:
        """CSV column order; ``view="cooperativity"`` leads with C_-/n_th^-."""
        outputs = list(self.spec.outputs) if self.spec else [
            k for k in self.records[0] if k in FIELDS]
        lead = []
        for a in self.axes:
            if view == "cooperativity" and a.name == "Gamma":
                lead.append("Cq_minus")
            else:
                lead.append(_column_name(a.name))
        rest = [c for c in outputs if c not in lead]
        if "Cq_minus" not in lead and "Cq_minus" not in rest:
            rest.insert(0, "Cq_minus")
        return lead + rest + ["status"]

    def rows(self, view: str = "params") -> list[dict]:
        cols = self.columns(view)
        out = []
        for r in self.records:
            row = {}
            for c in cols:
                if c == "Gamma_Hz":
                    row[c] = r["Gamma"] / (2.0 * math.pi)
                elif c in FREQUENCY_FIELDS:
                    row[c] = r[c] / (2.0 * math.pi)
                else:
                    row[c] = r[c]
            out.append(row)
        return out

    def to_csv(self, view: str = "params") -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns(view), lineterminator="\n")
        writer.writeheader()
        for row in self.rows(view):
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_json(self, view: str = "params") -> str:
        payload = {
            "metadata": self.metadata,
            "axes": {_column_name(a.name): [_axis_out(a.name, v) for v in a.values] for a in self.axes},
            "columns": self.columns(view),
            "records": self.rows(view),
        }
        return json.dumps(payload, indent=1, sort_keys=True, allow_nan=True)


def _column_name(axis: str) -> str:
    return "Gamma_Hz" if axis == "Gamma" else axis


def _axis_out(axis: str, value: float) -> float:
    return value / (2.0 * math.pi) if axis == "Gamma" else value


def params_metadata(params: PhysicalParams) -> dict:
    return {k: v for k, v in asdict(params).items()}


def run_sweep(spec: SweepSpec, jobs: int = 1) -> GridResult:
    """Evaluate every cell (row-major over ``spec.axes``); failures become typed markers."""
    tasks = [(spec.base, spec.channel, c) for c in spec.cells()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_evaluate_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_evaluate_cell(t) for t in tasks]
    metadata = {
        "channel": spec.channel.value,
        "base_params": params_metadata(spec.base),
        "outputs": list(spec.outputs),
        "units": "rates in rad/s; Gamma_Hz and omega_m_* columns in Hz",
        "version": __version__,
    }
    return GridResult(list(spec.axes), records, metadata, spec)


@dataclass(frozen=True)
class ThresholdRecord:
    column: dict[str, float]
    threshold: float | None = None  # value of the scanned parameter
    Cq_minus: float | None = None
    bracket: tuple[float, float] | None = None
    bracket_values: tuple[float, float] | None = None
    error: NoCrossing | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _bisect(lo: float, hi: float, f_lo: float, f_hi: float, f: Callable[[float], float],
            level: float, log: bool, rel_tol: float) -> tuple[float, float, float, float]:
    above_lo = f_lo > level
    while (hi / lo - 1.0 if log else (hi - lo) / max(abs(hi), abs(lo))) > rel_tol:
        mid = math.sqrt(lo * hi) if log else 0.5 * (lo + hi)
        f_mid = f(mid)
        if (f_mid > level) == above_lo:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return lo, hi, f_lo, f_hi


def threshold_scan(grid: GridResult, field: str = "epsilon_cr", level: float = 0.0,
                   scan_axis: str = "Gamma", evaluate: Callable[[dict], float] | None = None,
                   refine: bool = True, rel_tol: float = 0.01,
                   pick: str = "last") -> list[ThresholdRecord]:
    """Locate, per column of the other axis, where ``field`` crosses ``level``.

    Along a Gamma axis the quantum cooperativity falls as Gamma grows, so the
    last crossing (``pick="last"``) is the minimal cooperativity that still
    gives ``field > level``.  With ``refine`` the bracket is bisected until it
    is narrower than ``rel_tol`` in the scanned parameter, re-evaluating the
    pipeline (or ``evaluate``); otherwise the crossing is linearly
    interpolated between bracketing cells.
    """
    names = [a.name for a in grid.axes]
    k = names.index(scan_axis)
    scan = grid.axes[k]
    log = scan.scale == "log"
    values = grid.field(field)
    if values.ndim == 1:
        values = values[None, :]
        others = [{}]
    else:
        values = np.moveaxis(values, k, -1)
        other = grid.axes[1 - k]
        others = [{other.name: v} for v in other.values]

    if evaluate is None and grid.spec is not None:
        spec = grid.spec

        def evaluate(coords):
            try:
                return getattr(evaluate_point(spec.base.replace(**coords), spec.channel), field)
            except (OptoentError, ValueError, ArithmeticError):
                return math.nan

    xs = np.array(scan.values)
    order = np.argsort(xs)
    out = []
    for col, row in zip(others, values):
        xs_s, fs = xs[order], row[order]
        idx = [i for i in range(len(xs_s) - 1)
               if np.isfinite(fs[i]) and np.isfinite(fs[i + 1])
               and (fs[i] > level) != (fs[i + 1] > level)]
        if not idx:
            out.append(ThresholdRecord(col, error=NoCrossing(f"{field} never crosses {level} at {col}")))
            continue
        i = idx[-1] if pick == "last" else idx[0]
        lo, hi, f_lo, f_hi = float(xs_s[i]), float(xs_s[i + 1]), float(fs[i]), float(fs[i + 1])
        if refine and evaluate is not None:
            lo, hi, f_lo, f_hi = _bisect(
                lo, hi, f_lo, f_hi, lambda x: evaluate({**col, scan_axis: x}), level, log, rel_tol)
            x = math.sqrt(lo * hi) if log else 0.5 * (lo + hi)
        else:
            x = lo + (level - f_lo) * (hi - lo) / (f_hi - f_lo)
        cq = None
        if grid.spec is not None:
            plus, minus = both_modes(grid.spec.base.replace(**col, **{scan_axis: x}))
            cq = minus.quantum_cooperativity
        out.append(ThresholdRecord(col, x, cq, (lo, hi), (f_lo, f_hi)))
    return out


# named parameter sets for the coloured markers; only the experimental one is known
PRESETS: dict[str, dict[str, float]] = {"black": {}}

FIGURES = ("fig2", "fig3", "fig5", "fig6", "fig7", "fig8", "fig9")


def default_map_axes(n: int = 40) -> tuple[Axis, Axis]:
    return (Axis.linear("delta_minus", 0.01, 1.0, n),
            Axis.log("Gamma", hz(1e-9), hz(1e-3), n))


def figure_specs(name: str, base: PhysicalParams, resolution: int = 40,
                 presets: dict[str, dict[str, float]] | None = None) -> dict[str, SweepSpec]:
    """Sweep specs behind a figure, keyed by a short label."""
    axes = default_map_axes(resolution)
    maps = {
        "fig2": (Channel.X, ("epsilon_cr", "E_N", "omega_m_plus", "omega_m_minus")),
        "fig3": (Channel.X, ("E_min_minus", "E_min_plus")),
        "fig5": (Channel.X, ("purity_minus", "purity_plus")),
        "fig6": (Channel.X, ("angle_plus", "angle_minus", "angle_diff")),
        "fig7": (Channel.Y, ("epsilon_cr", "E_N")),
    }
    if name in maps:
        channel, outputs = maps[name]
        return {name: SweepSpec(base, axes, channel, outputs)}
    if name in ("fig8", "fig9"):
        outputs = (("E_N", "epsilon_cr", "omega_m_plus", "omega_m_minus") if name == "fig8"
                   else ("purity_plus", "purity_minus"))
        zeta = Axis.linear("zeta", 1.0, 30.0, max(2, 2 * resolution))
        table = PRESETS if presets is None else presets
        return {f"{name}_{label}": SweepSpec(base.replace(**over), (zeta,), Channel.X, outputs)
                for label, over in table.items()}
    raise ValueError(f"unknown figure {name!r}; choose from {FIGURES}")


def figure_outputs(name: str) -> Sequence[str]:
    return FIGURES
