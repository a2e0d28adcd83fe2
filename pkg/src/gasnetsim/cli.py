"""Command-line entry points: simulate, observe, certify, snapshot.

Exit codes: 0 success, 2 validation/input error, 3 numerical failure.
All artifacts are plain CSV/text files with '.' decimal points, written
deterministically for identical inputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .bounds import BoundInputs, decay_certificates, wellposedness_constants
from .diagnostics import SnapshotFrame, fit_decay_rate
from .errors import NumericalError, ValidationError
from .fileio import BAR, parse_network_file, parse_scenario_file
from .physics import pressure_from_riemann
from .run import run_observer_pair, run_truth

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_times(text: str) -> List[float]:
    if not text.strip():
        return []
    return [float(tok) for tok in text.split(",")]


def _load_inputs(args):
    net_path = Path(args.network)
    if not net_path.exists():
        raise ValidationError(f"network file not found: {net_path}")
    scn_path = Path(args.scenario)
    if not scn_path.exists():
        raise ValidationError(f"scenario file not found: {scn_path}")
    graph = parse_network_file(net_path)
    scenario = parse_scenario_file(scn_path)
    return graph, scenario


def _write_series_csv(path: Path, header: str, rows) -> None:
    with path.open("w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def _write_snapshots(out_dir: Path, snapshots: Sequence[SnapshotFrame], cols=("delta_plus", "delta_minus")) -> None:
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    for frame in snapshots:
        name = f"t_{frame.t:g}.csv"
        with (snap_dir / name).open("w", newline="\n") as fh:
            fh.write(f"pipe,x,{cols[0]},{cols[1]}\n")
            for pid in frame.x:
                xs = frame.x[pid]
                dp = frame.delta_plus[pid]
                dm = frame.delta_minus[pid]
                for i in range(len(xs)):
                    fh.write(f"{pid},{_fmt(xs[i])},{_fmt(dp[i])},{_fmt(dm[i])}\n")


def _default_snapshot_times(scenario) -> List[float]:
    return [0.0, scenario.t_end / 2.0, scenario.t_end]


def _cmd_observe(args) -> int:
    graph, scenario = _load_inputs(args)
    snap_times = (
        _parse_times(args.snapshots) if args.snapshots else _default_snapshot_times(scenario)
    )
    result = run_observer_pair(
        graph,
        scenario,
        record_l1=True,
        residual_stride=args.residual_stride,
        snapshot_times=snap_times,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series = result.series
    _write_series_csv(out / "l0.csv", "t,l0", zip(series.times.tolist(), series.l0.tolist()))
    _write_series_csv(
        out / "l1.csv", "t,l1", zip(series.times.tolist(), series.l1.tolist())
    )
    _write_series_csv(out / "residuals.csv", "t,node,residual", result.residuals)
    _write_snapshots(out, result.snapshots)

    lines = []
    if args.fit_window:
        parts = _parse_times(args.fit_window)
        if len(parts) != 2 or parts[0] >= parts[1]:
            raise ValidationError(f"--fit-window needs 't0,t1' with t0 < t1, got {args.fit_window!r}")
        window = (parts[0], parts[1])
    else:
        window = (0.25 * scenario.t_end, 0.95 * scenario.t_end)
    lines.append(f"fit_window_s = [{window[0]:g}, {window[1]:g}]")
    for label, use_l1 in (("l0", False), ("l1", True)):
        try:
            rate, r2 = fit_decay_rate(series, window, use_l1=use_l1)
            lines.append(f"{label}_decay_rate_per_s = {_fmt(rate)}")
            lines.append(f"{label}_fit_r2 = {_fmt(r2)}")
        except ValidationError as exc:
            lines.append(f"{label}_decay_rate_per_s = n/a ({exc})")
    sync = result.sync_time
    lines.append(
        f"finite_time_sync_s = {_fmt(sync)}" if sync is not None else "finite_time_sync_s = none"
    )
    lines.append(f"m_tilde = {_fmt(result.m_tilde)}")
    lines.append(f"b_tilde = {_fmt(result.b_tilde)}")
    (out / "rates.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    graph, scenario = _load_inputs(args)
    snap_times = _parse_times(args.snapshots) if args.snapshots else []
    state, snapshots, eff_graph = run_truth(graph, scenario, snapshot_times=snap_times)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    law = scenario.make_law()
    with (out / "state.csv").open("w", newline="\n") as fh:
        fh.write("pipe,x,r_plus,r_minus,pressure_bar,velocity\n")
        for pid, g in state.grids.items():
            xs = g.cell_centers()
            for i in range(g.n_cells):
                rp, rm = float(g.r_plus[i]), float(g.r_minus[i])
                p_bar = pressure_from_riemann(law, rp, rm) / BAR
                v = (rp - rm) / 2.0
                fh.write(f"{pid},{_fmt(xs[i])},{_fmt(rp)},{_fmt(rm)},{_fmt(p_bar)},{_fmt(v)}\n")
    if snapshots:
        _write_snapshots(out, snapshots, cols=("r_plus", "r_minus"))
    return EXIT_OK


def _cmd_snapshot(args) -> int:
    graph, scenario = _load_inputs(args)
    snap_times = _parse_times(args.times)
    if not snap_times:
        raise ValidationError("snapshot needs --times t1[,t2,...]")
    result = run_observer_pair(
        graph, scenario, record_l1=False, residual_stride=0, snapshot_times=snap_times
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_snapshots(out, result.snapshots)
    return EXIT_OK


def _cmd_certify(args) -> int:
    graph, scenario = _load_inputs(args)
    law = scenario.make_law()
    c = law.sound_speed()
    eff_graph = graph.with_theta(scenario.theta)
    mu = scenario.resolve_mu(eff_graph)
    if args.m_tilde is not None and args.b_tilde is not None:
        m_tilde, b_tilde = args.m_tilde, args.b_tilde
        source = "supplied"
    else:
        result = run_observer_pair(graph, scenario, record_l1=False, residual_stride=0)
        m_tilde, b_tilde = result.m_tilde, result.b_tilde
        source = "estimated from a scenario run"
    inputs = BoundInputs.from_graph(
        eff_graph, c, t_horizon=scenario.t_end, m=args.amplitude_bound,
        m_tilde=m_tilde, b_tilde=b_tilde,
    )
    wp = wellposedness_constants(inputs.t_horizon, inputs.m, inputs.nu_max)
    cert = decay_certificates(eff_graph, mu, m_tilde, b_tilde, c)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        f"network_pipes = {len(eff_graph.pipes)}",
        f"network_nodes = {len(eff_graph.nodes)}",
        f"sound_speed_m_s = {_fmt(c)}",
        f"nu_max_per_m = {_fmt(inputs.nu_max)}",
        f"t0_min_s = {_fmt(inputs.t0_min)}",
        f"t0_max_s = {_fmt(inputs.t0_max)}",
        f"m_tilde = {_fmt(m_tilde)}  # {source}",
        f"b_tilde = {_fmt(b_tilde)}  # {source}",
        f"amplitude_bound_m = {_fmt(inputs.m)}",
        f"horizon_s = {_fmt(inputs.t_horizon)}",
        f"l_kontr = {_fmt(wp.l_kontr)}",
        f"t_threshold_s = {_fmt(wp.t_threshold)}",
        f"epsilon_valid = {wp.epsilon_valid}",
        f"epsilon = {_fmt(wp.epsilon) if wp.epsilon is not None else 'invalid (l_kontr >= 1)'}",
        f"gronwall_factor = {_fmt(wp.gronwall_factor)}",
        f"c0 = {_fmt(cert.c0)}",
        f"c1 = {_fmt(cert.c1)}",
        f"upsilon0 = {_fmt(cert.ups0)}",
        f"delta_nu_t0 = {_fmt(cert.delta_nu_t0)}",
        f"l0_window_factor = {_fmt(cert.l0_window_factor)}",
        f"h1_condition_lhs = {_fmt(cert.h1_condition_lhs)}",
        f"h1_condition_rhs = {_fmt(cert.h1_condition_rhs)}",
        f"h1_holds = {cert.h1_holds}",
        "stability_constant_C_T = not computed (existence only)",
        "decay_rate_mu0 = not computed (existence only)",
        "decay_rate_mu1 = not computed (existence only)",
        "decay_constant_C_tilde = not computed (existence only)",
    ]
    (out / "certificate.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gasnetsim",
        description="Gas network transient simulator with a nodal observer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--network", required=True, help="network file (native or GasLib XML)")
        p.add_argument("--scenario", required=True, help="scenario file")
        p.add_argument("--out", required=True, help="output directory")

    p_obs = sub.add_parser("observe", help="run the coupled truth/observer pair")
    common(p_obs)
    p_obs.add_argument("--residual-stride", type=int, default=1,
                       help="record nodal residuals every N steps (0 disables)")
    p_obs.add_argument("--snapshots", default="",
                       help="comma-separated snapshot times in s (default 0, T/2, T)")
    p_obs.add_argument("--fit-window", default="",
                       help="decay-fit window 't0,t1' (default 0.25T..0.95T)")
    p_obs.set_defaults(func=_cmd_observe)

    p_sim = sub.add_parser("simulate", help="run the truth system only")
    common(p_sim)
    p_sim.add_argument("--snapshots", default="", help="comma-separated snapshot times in s")
    p_sim.set_defaults(func=_cmd_simulate)

    p_snap = sub.add_parser("snapshot", help="dump observer-error snapshots at given times")
    common(p_snap)
    p_snap.add_argument("--times", required=True, help="comma-separated times in s")
    p_snap.set_defaults(func=_cmd_snapshot)

    p_cert = sub.add_parser("certify", help="evaluate all theory constants and conditions")
    common(p_cert)
    p_cert.add_argument("--m-tilde", type=float, default=None,
                        help="regularity bound on |S+-S-| (default: estimate from a run)")
    p_cert.add_argument("--b-tilde", type=float, default=None,
                        help="regularity bound on d/dt(S+-S-) (default: estimate from a run)")
    p_cert.add_argument("--amplitude-bound", type=float, default=1.0,
                        help="amplitude bound M for the well-posedness constants")
    p_cert.set_defaults(func=_cmd_certify)
    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
