"""Network and scenario file ingestion, boundary schedules, CSV emission.

Native network format (one record per non-comment line, '#' comments):

    node <id>
    pipe <id> <from> <to> <length_m> <diameter_m> [theta_per_m]

GasLib subset: XML ``<pipe from=.. to=..>`` elements with ``<length>`` and
``<diameter>`` children carrying value/unit attributes (km/m and mm/m).
Compressor stations, valves and other non-pipe connections are rejected.

Scenario format: key/value lines documented in the README; pressures in bar
(1 bar = 1e5 Pa), mass flows in kg/s counted positive into the network.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ParseError, ScheduleError, ValidationError
from .network import NetworkGraph, NodeId, PipeId, PipeSpec
from .physics import AgaLaw, IsentropicLaw, IsothermalLaw, PressureLaw

BAR = 1.0e5  # Pa

DATA_DIR = Path(__file__).parent / "data"

LENGTH_UNITS = {"m": 1.0, "km": 1000.0, "meter": 1.0}
DIAMETER_UNITS = {"m": 1.0, "mm": 1.0e-3, "meter": 1.0}


def bundled_path(name: str) -> Path:
    p = DATA_DIR / name
    if not p.exists():
        raise FileNotFoundError(f"no bundled data file named {name!r}")
    return p


# ---------------------------------------------------------------------------
# network parsing


def parse_network(text: str, fmt: str = "auto") -> NetworkGraph:
    if fmt == "auto":
        fmt = "gaslib-subset" if text.lstrip().startswith("<") else "native"
    if fmt == "native":
        return _parse_native(text)
    if fmt == "gaslib-subset":
        return _parse_gaslib(text)
    raise ParseError(f"unknown network format {fmt!r}")


def parse_network_file(path) -> NetworkGraph:
    return parse_network(Path(path).read_text())


def _parse_native(text: str) -> NetworkGraph:
    nodes: List[NodeId] = []
    pipes: List[PipeSpec] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "node":
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: node record needs exactly one id")
            nodes.append(parts[1])
        elif kind == "pipe":
            if len(parts) not in (6, 7):
                raise ParseError(
                    f"line {lineno}: pipe record needs "
                    "'pipe <id> <from> <to> <length_m> <diameter_m> [theta_per_m]'"
                )
            pid, from_node, to_node = parts[1:4]
            try:
                length = float(parts[4])
                diameter = float(parts[5])
                theta = float(parts[6]) if len(parts) == 7 else 0.0
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            try:
                pipes.append(
                    PipeSpec(pid, from_node, to_node, length, diameter, theta)
                )
            except ValidationError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
        else:
            raise ParseError(f"line {lineno}: unknown record kind {kind!r}")
    declared = set(nodes)
    used = {n for p in pipes for n in (p.from_node, p.to_node)}
    stray = declared - used
    if stray:
        raise ParseError(f"declared node(s) not attached to any pipe: {sorted(stray)}")
    return NetworkGraph(pipes)


def serialize_network(graph: NetworkGraph) -> str:
    lines = [f"node {v}" for v in graph.nodes]
    for p in graph.pipes:
        rec = f"pipe {p.id} {p.from_node} {p.to_node} {p.length!r} {p.diameter!r}"
        if p.theta != 0.0:
            rec += f" {p.theta!r}"
        lines.append(rec)
    return "\n".join(lines) + "\n"


def _strip_ns(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


_REJECTED_ELEMENTS = {
    "compressorStation",
    "valve",
    "controlValve",
    "resistor",
    "shortPipe",
}


def _parse_gaslib(text: str) -> NetworkGraph:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from None
    pipes: List[PipeSpec] = []
    counter = 0
    for elem in root.iter():
        tag = _strip_ns(elem.tag)
        if tag in _REJECTED_ELEMENTS:
            ident = elem.get("id", "?")
            raise ParseError(
                f"unsupported element <{tag}> (id={ident!r}): only plain pipes "
                "are accepted; remove compressors/valves first"
            )
        if tag != "pipe":
            continue
        counter += 1
        pid = elem.get("id") or f"pipe{counter}"
        from_node = elem.get("from")
        to_node = elem.get("to")
        if from_node is None or to_node is None:
            raise ParseError(f"<pipe id={pid!r}> is missing a from/to attribute")
        length = _child_quantity(elem, pid, "length", LENGTH_UNITS)
        diameter = _child_quantity(elem, pid, "diameter", DIAMETER_UNITS)
        try:
            pipes.append(PipeSpec(pid, from_node, to_node, length, diameter))
        except ValidationError as exc:
            raise ParseError(f"<pipe id={pid!r}>: {exc}") from None
    if not pipes:
        raise ParseError("document contains no <pipe> elements")
    return NetworkGraph(pipes)


def _child_quantity(elem, pid: str, name: str, units: Mapping[str, float]) -> float:
    child = None
    for sub in elem:
        if _strip_ns(sub.tag) == name:
            child = sub
            break
    if child is None:
        raise ParseError(f"<pipe id={pid!r}> is missing a <{name}> child")
    value = child.get("value")
    if value is None:
        raise ParseError(f"<{name}> of pipe {pid!r} is missing the value attribute")
    unit = child.get("unit", "m")
    if unit not in units:
        raise ParseError(
            f"<{name}> of pipe {pid!r} has unknown unit {unit!r} "
            f"(accepted: {sorted(units)})"
        )
    try:
        return float(value) * units[unit]
    except ValueError:
        raise ParseError(f"<{name}> of pipe {pid!r} has non-numeric value {value!r}") from None


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class InitialCondition:
    """Initial pressure profile on one pipe, in bar.

    constant:   p(x) = p_base
    half_step:  p(x) = p_base + h on the first half (x < L/2), p_base after
    sinusoidal: p(x) = p_base + h sin(f pi x / L)
    """

    kind: str
    p_base: float
    h: float = 0.0
    f: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "half_step", "sinusoidal"):
            raise ValidationError(f"unknown initial-condition kind {self.kind!r}")
        if not (math.isfinite(self.p_base) and math.isfinite(self.h)):
            raise ValidationError("initial condition needs finite p_base and h")
        if self.kind == "sinusoidal" and self.f <= 0:
            raise ValidationError("sinusoidal initial condition needs f >= 1")

    def pressure_bar(self, x: np.ndarray, length: float) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(x, self.p_base, dtype=float)
        if self.kind == "half_step":
            return np.where(x < length / 2.0, self.p_base + self.h, self.p_base)
        return self.p_base + self.h * np.sin(self.f * math.pi * x / length)


@dataclass(frozen=True)
class BoundaryPoint:
    t: float
    p_bar: float
    m_kg_s: float  # positive = mass flowing from the node into the network


@dataclass
class ScenarioSpec:
    """Everything needed to run one experiment on a given network."""

    law_kind: str = "isothermal"
    c: float = 340.0
    rho_ref: float = 1.0
    law_a: float = 1.0
    law_gamma: float = 1.4
    law_rs_t: float = 115600.0
    law_alpha: float = 0.0
    theta: float = 0.0137
    rest_pressure_bar: float = 60.0
    t_end: float = 600.0
    dt: Optional[float] = None
    mode: str = "exact-advection"
    mu_preset: str = "uniform"  # uniform | mixed
    mu_uniform: float = 0.0
    mu_overrides: Dict[NodeId, float] = field(default_factory=dict)
    ic_s: Dict[PipeId, InitialCondition] = field(default_factory=dict)
    ic_r: Dict[PipeId, InitialCondition] = field(default_factory=dict)
    boundary: Dict[NodeId, Tuple[BoundaryPoint, ...]] = field(default_factory=dict)
    boundary_default: Optional[Tuple[BoundaryPoint, ...]] = None

    def __post_init__(self) -> None:
        if self.mu_preset not in ("uniform", "mixed"):
            raise ValidationError(f"unknown mu preset {self.mu_preset!r}")
        if abs(self.mu_uniform) > 1.0:
            raise ValidationError("uniform mu must lie in [-1, 1]")
        for v, m in self.mu_overrides.items():
            if abs(m) > 1.0:
                raise ValidationError(f"mu override at {v!r} outside [-1, 1]")
        if self.theta < 0:
            raise ValidationError("theta must be nonnegative")
        for points in list(self.boundary.values()) + (
            [self.boundary_default] if self.boundary_default else []
        ):
            _check_schedule(points)

    def make_law(self) -> PressureLaw:
        if self.law_kind == "isothermal":
            return IsothermalLaw(c=self.c, rho_ref=self.rho_ref)
        if self.law_kind == "isentropic":
            return IsentropicLaw(a=self.law_a, gamma=self.law_gamma, rho_ref=self.rho_ref)
        if self.law_kind == "aga":
            return AgaLaw(rs_t=self.law_rs_t, alpha=self.law_alpha, rho_ref=self.rho_ref)
        raise ValidationError(f"unknown pressure law {self.law_kind!r}")

    def resolve_mu(self, graph: NetworkGraph) -> Dict[NodeId, float]:
        """Per-node gains: preset first, explicit overrides on top."""
        if self.mu_preset == "uniform":
            mu = {v: self.mu_uniform for v in graph.nodes}
        else:
            mu = {v: _mixed_mu(v) for v in graph.nodes}
        for v, m in self.mu_overrides.items():
            if v not in mu:
                raise ValidationError(f"mu override for unknown node {v!r}")
            mu[v] = m
        return mu

    def schedule_for(self, v: NodeId) -> Tuple[BoundaryPoint, ...]:
        if v in self.boundary:
            return self.boundary[v]
        if self.boundary_default is not None:
            return self.boundary_default
        return (BoundaryPoint(0.0, self.rest_pressure_bar, 0.0),)

    def ic_for(self, which: str, pipe_id: PipeId) -> InitialCondition:
        table = {"S": self.ic_s, "R": self.ic_r}[which]
        return table.get(pipe_id, InitialCondition("constant", self.rest_pressure_bar))


# Gains for the `mixed` preset reproduced from the experiment description:
# measurement injection (mu=0) at every even-indexed node plus these odd ones.
_MIXED_EXTRA_ZEROS = {1, 5, 7, 15, 17, 29}


def _mixed_mu(v: NodeId) -> float:
    try:
        idx = int(v)
    except ValueError:
        raise ValidationError(
            f"the mixed mu preset needs integer node ids, got {v!r}"
        ) from None
    return 0.0 if (idx % 2 == 0 or idx in _MIXED_EXTRA_ZEROS) else 1.0


def _check_schedule(points: Sequence[BoundaryPoint]) -> None:
    if not points:
        raise ValidationError("boundary schedule needs at least one breakpoint")
    ts = [p.t for p in points]
    if any(t1 <= t0 for t0, t1 in zip(ts, ts[1:])):
        raise ValidationError(f"schedule breakpoints must be strictly increasing, got {ts}")
    for p in points:
        if not (math.isfinite(p.p_bar) and math.isfinite(p.m_kg_s)) or p.p_bar <= 0:
            raise ValidationError(f"bad schedule breakpoint {p}")


def parse_scenario(text: str) -> ScenarioSpec:
    spec = ScenarioSpec()
    boundary: Dict[NodeId, List[BoundaryPoint]] = {}
    boundary_default: List[BoundaryPoint] = []
    mu_overrides: Dict[NodeId, float] = {}
    ic_s: Dict[PipeId, InitialCondition] = {}
    ic_r: Dict[PipeId, InitialCondition] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        try:
            if key == "law":
                spec = _parse_law_line(spec, parts)
            elif key == "c":
                spec = replace(spec, c=_positive(parts, 1))
            elif key == "rho_ref":
                spec = replace(spec, rho_ref=_positive(parts, 1))
            elif key == "theta":
                spec = replace(spec, theta=float(parts[1]))
            elif key == "rest_pressure":
                spec = replace(spec, rest_pressure_bar=_positive(parts, 1))
            elif key == "t_end":
                spec = replace(spec, t_end=_positive(parts, 1))
            elif key == "dt":
                spec = replace(spec, dt=_positive(parts, 1))
            elif key == "mode":
                if parts[1] not in ("exact-advection", "cfl-safe"):
                    raise ValidationError(f"unknown mode {parts[1]!r}")
                spec = replace(spec, mode=parts[1])
            elif key == "mu":
                if parts[1] == "uniform":
                    spec = replace(spec, mu_preset="uniform", mu_uniform=float(parts[2]))
                elif parts[1] == "mixed":
                    spec = replace(spec, mu_preset="mixed")
                elif parts[1] == "node":
                    mu_overrides[parts[2]] = float(parts[3])
                else:
                    raise ValidationError(f"unknown mu directive {parts[1]!r}")
            elif key == "ic":
                which, pid, kind = parts[1], parts[2], parts[3]
                if which not in ("S", "R"):
                    raise ValidationError(f"ic system must be S or R, got {which!r}")
                if kind == "constant":
                    ic = InitialCondition("constant", float(parts[4]))
                elif kind == "half_step":
                    ic = InitialCondition("half_step", float(parts[4]), float(parts[5]))
                elif kind == "sinusoidal":
                    ic = InitialCondition(
                        "sinusoidal", float(parts[4]), float(parts[5]), int(parts[6])
                    )
                else:
                    raise ValidationError(f"unknown ic kind {kind!r}")
                (ic_s if which == "S" else ic_r)[pid] = ic
            elif key == "boundary":
                target = parts[1]
                point = BoundaryPoint(float(parts[2]), float(parts[3]), float(parts[4]))
                if target == "default":
                    boundary_default.append(point)
                else:
                    boundary.setdefault(target, []).append(point)
            else:
                raise ValidationError(f"unknown key {key!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise ParseError(f"line {lineno}: {exc}") from None
            raise ParseError(f"line {lineno}: malformed {key!r} record ({exc})") from None
    try:
        spec = replace(
            spec,
            mu_overrides=mu_overrides,
            ic_s=ic_s,
            ic_r=ic_r,
            boundary={v: tuple(pts) for v, pts in boundary.items()},
            boundary_default=tuple(boundary_default) if boundary_default else None,
        )
    except ValidationError as exc:
        raise ParseError(str(exc)) from None
    return spec


def parse_scenario_file(path) -> ScenarioSpec:
    return parse_scenario(Path(path).read_text())


def _parse_law_line(spec: ScenarioSpec, parts: Sequence[str]) -> ScenarioSpec:
    kind = parts[1]
    if kind == "isothermal":
        return replace(spec, law_kind="isothermal")
    if kind == "isentropic":
        return replace(spec, law_kind="isentropic", law_a=float(parts[2]), law_gamma=float(parts[3]))
    if kind == "aga":
        return replace(spec, law_kind="aga", law_rs_t=float(parts[2]), law_alpha=float(parts[3]))
    raise ValidationError(f"unknown pressure law {kind!r}")


def _positive(parts: Sequence[str], i: int) -> float:
    val = float(parts[i])
    if not val > 0:
        raise ValidationError(f"value must be positive, got {val}")
    return val


# ---------------------------------------------------------------------------
# boundary schedules


def interp_schedule(points: Sequence[BoundaryPoint], t: float) -> Tuple[float, float]:
    """Piecewise-linear (pressure_bar, mass_flow) at time t.

    Constant extrapolation on both sides: before the first breakpoint the
    first value is used, after the last the last one.
    """
    if t < 0:
        raise ScheduleError(f"schedule evaluated at negative time t={t}")
    _check_schedule(points)
    ts = np.array([p.t for p in points])
    ps = np.array([p.p_bar for p in points])
    ms = np.array([p.m_kg_s for p in points])
    return float(np.interp(t, ts, ps)), float(np.interp(t, ts, ms))


def eval_boundary_schedule(
    points: Sequence[BoundaryPoint], t: float, pipe: PipeSpec, law: PressureLaw
) -> float:
    """Prescribed incoming invariant u(t) at a boundary node of `pipe`.

    u = Rt(rho(p)) + m / (rho A) with A = pi D^2 / 4 and m counted positive
    into the network; the inflow convention makes the expression the same at
    both pipe ends.
    """
    p_bar, m = interp_schedule(points, t)
    rho = float(law.density_from_pressure(p_bar * BAR))
    return float(law.rtilde(rho)) + m / (rho * pipe.area)


def make_boundary_control(
    points: Sequence[BoundaryPoint], pipe: PipeSpec, law: PressureLaw
):
    """Callable t -> u for the solver, closing over one node's schedule."""
    pts = tuple(points)
    _check_schedule(pts)
    ts = np.array([p.t for p in pts])
    ps = np.array([p.p_bar for p in pts])
    ms = np.array([p.m_kg_s for p in pts])
    area = pipe.area

    def control(t: float) -> float:
        if t < 0:
            raise ScheduleError(f"schedule evaluated at negative time t={t}")
        p_bar = float(np.interp(t, ts, ps))
        m = float(np.interp(t, ts, ms))
        rho = float(law.density_from_pressure(p_bar * BAR))
        return float(law.rtilde(rho)) + m / (rho * area)

    return control
