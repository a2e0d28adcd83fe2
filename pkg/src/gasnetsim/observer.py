"""Coupled truth/observer stepping and the direct error-system mode.

The observer runs the same kernel as the truth system; the only difference
is the node map, which blends the truth measurements with the observer's own
incoming invariants through the per-node gain mu in [-1, 1] (mu = 0: full
measurement injection, mu = 1: no measurement used).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, ValidationError
from .network import NetworkGraph, NodeId, PipeId, junction_outflow, omega_v
from .solver import (
    Control,
    EdgeGrid,
    SimState,
    advect_step,
    friction_root_shifted,
    friction_step,
    gather_node_inputs,
    step_system,
)


@dataclass
class ObserverConfig:
    """Per-node gains and the boundary control schedules shared by both systems."""

    mu: Dict[NodeId, float]
    controls: Dict[NodeId, Control] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for v, m in self.mu.items():
            if not abs(m) <= 1.0:
                raise ValidationError(f"mu at node {v!r} is {m}, outside [-1, 1]")

    def decay_eligible(self, graph: NetworkGraph) -> bool:
        """True when every pipe has at least one endpoint with |mu| < 1."""
        for p in graph.pipes:
            if all(abs(self.mu[v]) >= 1.0 for v in (p.from_node, p.to_node)):
                return False
        return True


@dataclass
class CoupledState:
    """Truth state, observer state and their shared configuration."""

    s_state: SimState
    r_state: SimState
    config: ObserverConfig

    def __post_init__(self) -> None:
        if self.s_state.dt != self.r_state.dt:
            raise ConfigurationError("truth and observer states must share dt")
        if self.s_state.step_index != self.r_state.step_index:
            raise ConfigurationError("truth and observer states must share the clock")
        if set(self.s_state.grids) != set(self.r_state.grids):
            raise ConfigurationError("truth and observer states must share the grids")

    @property
    def t(self) -> float:
        return self.s_state.t


@dataclass
class NodalTrace:
    """Error-invariant traces at one node for one tick (diagnostic record)."""

    mu: float
    delta_in: Dict[PipeId, float]
    delta_out: Dict[PipeId, float]


def measure_nodal(
    s_state: SimState, graph: NetworkGraph
) -> Dict[NodeId, Tuple[Dict[PipeId, float], Optional[Dict[PipeId, float]]]]:
    """Truth measurements per node: (incoming traces, outgoing traces).

    Incoming: R+ from the last cell at a pipe's x=L end, R- from the first
    cell at its x=0 end.  Outgoing traces satisfy the node condition, so for
    interior nodes they are the junction map applied to the incoming ones;
    boundary nodes report None (the observer boundary rule does not use them).
    """
    ins = gather_node_inputs(s_state, graph)
    out: Dict[NodeId, Tuple[Dict[PipeId, float], Optional[Dict[PipeId, float]]]] = {}
    for v, incoming in ins.items():
        if len(incoming) >= 2:
            out[v] = (incoming, junction_outflow(incoming, graph.diameters_at(v)))
        else:
            out[v] = (incoming, None)
    return out


def diff_junction_outflow(
    delta_in: Mapping[PipeId, float],
    diameters: Mapping[PipeId, float],
    mu: float,
) -> Dict[PipeId, float]:
    """Error-invariant node map at an interior node.

    delta_out_e = mu * (omega_v * sum_g D_g^2 delta_in_g - delta_in_e), which
    satisfies sum D^2 |delta_out|^2 = mu^2 sum D^2 |delta_in|^2.
    """
    if abs(mu) > 1.0:
        raise ValidationError(f"mu={mu} outside [-1, 1]")
    if set(delta_in) != set(diameters):
        raise ValidationError("diff_junction_outflow: key mismatch")
    w = omega_v(diameters.values())
    total = sum(diameters[e] ** 2 * d for e, d in delta_in.items())
    return {e: mu * (w * total - d) for e, d in delta_in.items()}


def observer_node_update(
    mu: float,
    diameters: Mapping[PipeId, float],
    r_in: Mapping[PipeId, float],
    s_in: Optional[Mapping[PipeId, float]] = None,
    s_out: Optional[Mapping[PipeId, float]] = None,
    u: Optional[float] = None,
) -> Dict[PipeId, float]:
    """Outgoing observer invariants at one node.

    Interior (degree >= 2, needs s_in and s_out):
        R_out_e = S_out_e - mu (R_in_e - S_in_e)
                  + mu omega_v sum_g D_g^2 (R_in_g - S_in_g)
    Degree 1 (needs u):  R_out = (1 - mu) u + mu R_in.
    """
    if abs(mu) > 1.0:
        raise ValidationError(f"mu={mu} outside [-1, 1]")
    if len(r_in) == 1:
        if u is None:
            raise ValidationError("boundary observer update needs the control value u")
        ((e, r),) = r_in.items()
        return {e: (1.0 - mu) * u + mu * r}
    if s_in is None or s_out is None:
        raise ValidationError("interior observer update needs s_in and s_out")
    if not (set(r_in) == set(s_in) == set(s_out) == set(diameters)):
        raise ValidationError("observer_node_update: key mismatch")
    delta_in = {e: r_in[e] - s_in[e] for e in r_in}
    delta_out = diff_junction_outflow(delta_in, diameters, mu)
    return {e: s_out[e] + delta_out[e] for e in r_in}


def step_coupled(
    cs: CoupledState,
    graph: NetworkGraph,
    collect_nodal: bool = False,
) -> Tuple[CoupledState, Optional[Dict[NodeId, NodalTrace]]]:
    """Advance truth and observer together by one tick.

    Both node maps read the previous-step edge states (one shared
    measurement snapshot), then the two systems advance independently with
    the same boundary schedule.
    """
    cfg = cs.config
    s, r = cs.s_state, cs.r_state
    t = s.t
    s_in = gather_node_inputs(s, graph)
    r_in = gather_node_inputs(r, graph)
    s_out: Dict[NodeId, Dict[PipeId, float]] = {}
    r_out: Dict[NodeId, Dict[PipeId, float]] = {}
    traces: Optional[Dict[NodeId, NodalTrace]] = {} if collect_nodal else None
    for v in graph.nodes:
        mu = cfg.mu[v]
        diam = graph.diameters_at(v)
        if len(s_in[v]) == 1:
            if v not in cfg.controls:
                raise ConfigurationError(f"no boundary control for node {v!r}")
            u = cfg.controls[v](t)
            s_out[v] = junction_outflow(s_in[v], diam, boundary_gain=(mu, u))
            r_out[v] = observer_node_update(mu, diam, r_in[v], u=u)
            if traces is not None:
                din = {e: r_in[v][e] - s_in[v][e] for e in s_in[v]}
                traces[v] = NodalTrace(mu, din, {e: mu * d for e, d in din.items()})
        else:
            so = junction_outflow(s_in[v], diam)
            s_out[v] = so
            din = {e: r_in[v][e] - s_in[v][e] for e in s_in[v]}
            dout = diff_junction_outflow(din, diam, mu)
            r_out[v] = {e: so[e] + dout[e] for e in so}
            if traces is not None:
                traces[v] = NodalTrace(mu, din, dout)
    s_next = step_system(s, graph, cfg.controls, cfg.mu, node_outs=s_out)
    r_next = step_system(r, graph, cfg.controls, cfg.mu, node_outs=r_out)
    return CoupledState(s_next, r_next, cfg), traces


def direct_diff_step(
    d_state: SimState,
    graph: NetworkGraph,
    mu: Mapping[NodeId, float],
    s_new: Optional[SimState] = None,
) -> SimState:
    """Advance the error system delta = R - S directly by one tick.

    Node maps: delta_out = mu * delta_in at boundary nodes and the
    diff junction map at interior nodes.  The friction source
    sigma(delta + S) - sigma(S) is applied by the same implicit split,
    solving for the new delta with the truth difference frozen at its
    post-step value; `s_new` must therefore be the truth state already
    advanced to the same step index.  With zero friction everywhere the
    truth trajectory is not needed.
    """
    needs_truth = any(p.nu > 0.0 for p in graph.pipes)
    if needs_truth:
        if s_new is None:
            raise ConfigurationError(
                "direct_diff_step needs the advanced truth state when friction is active"
            )
        if s_new.step_index != d_state.step_index + 1:
            raise ConfigurationError(
                "truth state must already be advanced by one step "
                f"(got {s_new.step_index}, expected {d_state.step_index + 1})"
            )
    d_in = gather_node_inputs(d_state, graph)
    outs: Dict[NodeId, Dict[PipeId, float]] = {}
    for v, incoming in d_in.items():
        m = mu[v]
        if abs(m) > 1.0:
            raise ValidationError(f"mu at node {v!r} is {m}, outside [-1, 1]")
        if len(incoming) == 1:
            outs[v] = {e: m * d for e, d in incoming.items()}
        else:
            outs[v] = diff_junction_outflow(incoming, graph.diameters_at(v), m)
    grids: Dict[PipeId, EdgeGrid] = {}
    for p in graph.pipes:
        g = advect_step(
            d_state.grids[p.id],
            inflow_plus=outs[p.from_node][p.id],
            inflow_minus=outs[p.to_node][p.id],
        )
        if p.nu > 0.0:
            sg = s_new.grids[p.id]
            a = 2.0 * d_state.dt * p.nu
            ssum = g.r_plus + g.r_minus
            d = friction_root_shifted(g.r_plus - g.r_minus, sg.r_plus - sg.r_minus, a)
            g = replace(g, r_plus=(ssum + d) / 2.0, r_minus=(ssum - d) / 2.0)
        grids[p.id] = g
    return SimState(grids=grids, dt=d_state.dt, step_index=d_state.step_index + 1)


def difference_state(r_state: SimState, s_state: SimState) -> SimState:
    """Pointwise observer error delta = R - S packaged as a SimState."""
    grids: Dict[PipeId, EdgeGrid] = {}
    for pid, rg in r_state.grids.items():
        sg = s_state.grids[pid]
        grids[pid] = replace(
            rg, r_plus=rg.r_plus - sg.r_plus, r_minus=rg.r_minus - sg.r_minus
        )
    return SimState(grids=grids, dt=r_state.dt, step_index=r_state.step_index)
