"""Scenario assembly and the recording run loops used by the CLI and the
experiment scripts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .diagnostics import (
    LyapunovSeries,
    RegularityTracker,
    SnapshotFrame,
    lyapunov_l0,
    lyapunov_l0_per_edge,
    lyapunov_l1,
    nodal_energy_residual,
)
from .errors import NumericalError, ValidationError
from .fileio import ScenarioSpec, make_boundary_control
from .network import NetworkGraph, NodeId, PipeId
from .observer import (
    CoupledState,
    ObserverConfig,
    SimState,
    difference_state,
    direct_diff_step,
    step_coupled,
    step_system,
)
from .physics import PressureLaw
from .solver import build_grids


@dataclass
class Assembled:
    """A scenario resolved against a concrete network."""

    graph: NetworkGraph  # with the scenario friction coefficient applied
    law: PressureLaw
    dt: float
    n_steps: int
    mu: Dict[NodeId, float]
    config: ObserverConfig
    s_state: SimState
    r_state: SimState


def default_dt(graph: NetworkGraph, c: float, min_cells: int = 8) -> float:
    """Time step giving the shortest pipe at least `min_cells` cells."""
    return min(p.length for p in graph.pipes) / (min_cells * c)


def assemble(graph: NetworkGraph, scenario: ScenarioSpec) -> Assembled:
    """Resolve gains, controls, grids and initial states for one scenario."""
    law = scenario.make_law()
    c = law.sound_speed()
    eff_graph = graph.with_theta(scenario.theta)
    dt = scenario.dt if scenario.dt is not None else default_dt(eff_graph, c)
    n_steps = int(math.ceil(scenario.t_end / dt - 1e-12))
    mu = scenario.resolve_mu(eff_graph)
    controls = {
        v: make_boundary_control(scenario.schedule_for(v), eff_graph.incident_pipes(v)[0], law)
        for v in eff_graph.boundary_nodes
    }
    config = ObserverConfig(mu=mu, controls=controls)
    s_state = _initial_state(eff_graph, scenario, law, dt, "S")
    r_state = _initial_state(eff_graph, scenario, law, dt, "R")
    return Assembled(eff_graph, law, dt, n_steps, mu, config, s_state, r_state)


def _initial_state(
    graph: NetworkGraph, scenario: ScenarioSpec, law: PressureLaw, dt: float, which: str
) -> SimState:
    from .fileio import BAR

    grids = build_grids(graph, law.sound_speed(), dt, mode=scenario.mode)
    known = set(g.pipe for g in grids.values())
    table = scenario.ic_s if which == "S" else scenario.ic_r
    unknown = set(table) - known
    if unknown:
        raise ValidationError(f"initial condition for unknown pipe(s): {sorted(unknown)}")
    for pid, g in grids.items():
        ic = scenario.ic_for(which, pid)
        p_bar = ic.pressure_bar(g.cell_centers(), g.length)
        rho = law.density_from_pressure(np.asarray(p_bar) * BAR)
        rt = np.asarray(law.rtilde(rho), dtype=float)
        g.r_plus[:] = rt  # zero initial velocity: R+ = R- = Rt(rho)
        g.r_minus[:] = rt
    return SimState(grids=grids, dt=dt, step_index=0)


@dataclass
class RunResult:
    """Everything recorded during one coupled run."""

    series: LyapunovSeries
    residuals: List[Tuple[float, NodeId, float]]
    m_tilde: float
    b_tilde: float
    snapshots: List[SnapshotFrame]
    final: CoupledState
    graph: NetworkGraph

    @property
    def sync_time(self) -> Optional[float]:
        return self.series.sync_time()


def _check_finite(l0_value: float, t: float) -> None:
    if not math.isfinite(l0_value):
        raise NumericalError(f"simulation blew up: L0 is not finite at t={t}")


def run_observer_pair(
    graph: NetworkGraph,
    scenario: ScenarioSpec,
    record_l1: bool = True,
    record_per_edge: bool = False,
    residual_stride: int = 0,
    snapshot_times: Sequence[float] = (),
) -> RunResult:
    """Advance the coupled truth/observer pair over the scenario horizon.

    Records the Lyapunov series every step, the per-node residual of the
    nodal energy identity every `residual_stride` steps (0 disables), the
    running regularity bounds and snapshot frames at the requested times
    (snapped to the nearest step).
    """
    asm = assemble(graph, scenario)
    cs = CoupledState(asm.s_state, asm.r_state, asm.config)
    n = asm.n_steps
    snap_steps = sorted({min(n, max(0, round(t / asm.dt))) for t in snapshot_times})
    times = np.empty(n + 1)
    l0 = np.empty(n + 1)
    l1 = np.empty(n) if record_l1 else None
    per_edge: Optional[Dict[PipeId, np.ndarray]] = (
        {p.id: np.empty(n + 1) for p in asm.graph.pipes} if record_per_edge else None
    )
    residuals: List[Tuple[float, NodeId, float]] = []
    snapshots: List[SnapshotFrame] = []
    tracker = RegularityTracker()

    delta = difference_state(cs.r_state, cs.s_state)
    prev_delta = delta
    times[0] = cs.t
    l0[0] = lyapunov_l0(delta.grids, asm.graph)
    if per_edge is not None:
        for pid, val in lyapunov_l0_per_edge(delta.grids, asm.graph).items():
            per_edge[pid][0] = val
    tracker.observe(cs.s_state, cs.r_state)
    if 0 in snap_steps:
        snapshots.append(SnapshotFrame.from_state(delta))

    for k in range(1, n + 1):
        collect = residual_stride > 0 and (k - 1) % residual_stride == 0
        cs, traces = step_coupled(cs, asm.graph, collect_nodal=collect)
        if traces is not None:
            t_prev = (k - 1) * asm.dt
            for v, tr in traces.items():
                res = nodal_energy_residual(
                    tr.delta_in, tr.delta_out, tr.mu, asm.graph.diameters_at(v)
                )
                residuals.append((t_prev, v, res))
        delta = difference_state(cs.r_state, cs.s_state)
        times[k] = cs.t
        l0[k] = lyapunov_l0(delta.grids, asm.graph)
        _check_finite(l0[k], cs.t)
        if per_edge is not None:
            for pid, val in lyapunov_l0_per_edge(delta.grids, asm.graph).items():
                per_edge[pid][k] = val
        if l1 is not None:
            l1[k - 1] = lyapunov_l1(prev_delta.grids, delta.grids, asm.graph, asm.dt)
        prev_delta = delta
        tracker.observe(cs.s_state, cs.r_state)
        if k in snap_steps:
            snapshots.append(SnapshotFrame.from_state(delta))

    series = LyapunovSeries(times=times, l0=l0, l1=l1, per_edge_l0=per_edge)
    return RunResult(
        series=series,
        residuals=residuals,
        m_tilde=tracker.m_tilde,
        b_tilde=tracker.b_tilde,
        snapshots=snapshots,
        final=cs,
        graph=asm.graph,
    )


def run_truth(
    graph: NetworkGraph,
    scenario: ScenarioSpec,
    snapshot_times: Sequence[float] = (),
) -> Tuple[SimState, List[SnapshotFrame], NetworkGraph]:
    """Advance the truth system alone; returns final state and snapshots."""
    asm = assemble(graph, scenario)
    state = asm.s_state
    snap_steps = sorted({min(asm.n_steps, max(0, round(t / asm.dt))) for t in snapshot_times})
    snapshots: List[SnapshotFrame] = []
    if 0 in snap_steps:
        snapshots.append(SnapshotFrame.from_state(state))
    for k in range(1, asm.n_steps + 1):
        state = step_system(state, asm.graph, asm.config.controls, asm.mu)
        sample = state.grids[asm.graph.pipes[0].id].r_plus
        if sample.size and not math.isfinite(float(sample[0])):
            raise NumericalError(f"simulation blew up at t={state.t}")
        if k in snap_steps:
            snapshots.append(SnapshotFrame.from_state(state))
    return state, snapshots, asm.graph


def run_difference_direct(
    graph: NetworkGraph, scenario: ScenarioSpec
) -> Tuple[LyapunovSeries, SimState, NetworkGraph]:
    """Run the error system directly, stepping the truth alongside when the
    friction source needs it."""
    asm = assemble(graph, scenario)
    needs_truth = any(p.nu > 0.0 for p in asm.graph.pipes)
    d_state = difference_state(asm.r_state, asm.s_state)
    s_state = asm.s_state
    n = asm.n_steps
    times = np.empty(n + 1)
    l0 = np.empty(n + 1)
    times[0] = 0.0
    l0[0] = lyapunov_l0(d_state.grids, asm.graph)
    for k in range(1, n + 1):
        if needs_truth:
            s_state = step_system(s_state, asm.graph, asm.config.controls, asm.mu)
            d_state = direct_diff_step(d_state, asm.graph, asm.mu, s_new=s_state)
        else:
            d_state = direct_diff_step(d_state, asm.graph, asm.mu)
        times[k] = d_state.t
        l0[k] = lyapunov_l0(d_state.grids, asm.graph)
        _check_finite(l0[k], d_state.t)
    return LyapunovSeries(times=times, l0=l0), d_state, asm.graph
