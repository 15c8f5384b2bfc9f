"""Command-line front end.

Subcommands: ``simulate``, ``compare``, ``figures``, ``analyze``,
``montecarlo``.  Exit codes: 0 converged / pass, 1 invalid input,
2 no convergence (or comparison above tolerance), 3 Monte Carlo failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import analysis
from .errors import GeoattError
from .exact import So3ExactSolution, verify_block_relations
from .feedback import lyapunov
from .integrate import Trajectory, propagate, simulate, trajectory_channels
from .linalg import negative_spectrum_distance, validate_rotation
from .scenario import ConfigError, ScenarioConfig, load_config

log = logging.getLogger("geoatt")

EXIT_OK, EXIT_INVALID, EXIT_NOCONV, EXIT_MC = 0, 1, 2, 3
COMPARE_TOL = 1e-5
FIG1_TIMES = (0.0, 1.2, 2.4, 3.9)
FIG_DENSITY = 200  # path points per unit time
FIG_T_MAX = 5.0


def trajectory_columns(n: int) -> list[str]:
    cols = ["t"] + [f"r{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    cols += ["V", "Vdot", "u_norm_sq"]
    cols += [f"err_axis_{i + 1}" for i in range(n)]
    cols += [f"dist_axis_{i + 1}" for i in range(n)]
    return cols + ["ortho_resid"]


def trajectory_table(traj: Trajectory):
    n = traj.n
    ch = traj.channels
    parts = [traj.times[:, None], traj.states.reshape(len(traj.times), n * n)]
    parts += [ch[c][:, None] for c in ("V", "Vdot", "normU_sq")]
    parts += [ch[f"err_axis_{i + 1}"][:, None] for i in range(n)]
    parts += [ch[f"dist_axis_{i + 1}"][:, None] for i in range(n)]
    parts.append(ch["ortho_resid"][:, None])
    return trajectory_columns(n), np.hstack(parts)


def _fmt(x) -> str:
    # repr of a Python float is the shortest string that round-trips
    return repr(float(x))


def write_table(fh, columns, rows, fmt: str = "csv", meta: dict | None = None):
    rows = np.asarray(rows, dtype=float)
    if fmt == "csv":
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    else:
        doc = {"columns": list(columns), "rows": [[float(x) for x in row] for row in rows]}
        if meta:
            doc["meta"] = meta
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def read_trajectory_csv(path, validate: bool = True):
    """Read a trajectory file written by ``simulate``; optionally re-validate every row."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(x) for x in row] for row in r])
    n = int(round(np.sqrt(sum(1 for c in header if c.startswith("r") and c[1:].isdigit()))))
    states = data[:, 1 : 1 + n * n].reshape(-1, n, n)
    if validate:
        for R in states:
            validate_rotation(R, 1e-8)
    return header, data, states


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    return open(path, "w", newline=""), True


def _emit(cfg: ScenarioConfig, columns, rows, meta=None):
    fh, close = _open_out(cfg.out)
    try:
        write_table(fh, columns, rows, cfg.format, meta)
    finally:
        if close:
            fh.close()


def _report(msg: str, cfg: ScenarioConfig):
    # keep stdout clean when it carries the data
    print(msg, file=sys.stderr if cfg.out in (None, "-") else sys.stdout)


def _dump_json(cfg: ScenarioConfig, doc: dict):
    fh, close = _open_out(cfg.out)
    try:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    finally:
        if close:
            fh.close()


def cmd_simulate(cfg: ScenarioConfig) -> int:
    traj = simulate(cfg.spec())
    columns, rows = trajectory_table(traj)
    _emit(cfg, columns, rows)
    V = float(traj.channels["V"][-1])
    _report(f"t = {traj.times[-1]:g}  V = {V:.3e}  {'converged' if traj.converged else 'not converged'}", cfg)
    return EXIT_OK if traj.converged else EXIT_NOCONV


def cmd_compare(cfg: ScenarioConfig) -> int:
    R0 = cfg.require_R0()
    if cfg.n != 3:
        raise ConfigError("n", "compare needs n = 3")
    if negative_spectrum_distance(R0) <= 1e-9:
        raise ConfigError("R0", "-1 is an eigenvalue of R0; the closed-form solution does not apply")
    exact = So3ExactSolution(R0, cfg.proj)
    times, states = propagate(R0[None], cfg.proj, cfg.dt, cfg.t_max, method=cfg.method, record_every=1)
    num = states[:, 0]
    ex = exact(times)
    err = np.linalg.norm(ex - num, axis=(-2, -1))
    ch_n = trajectory_channels(times, num, cfg.proj)
    ch_e = trajectory_channels(times, ex, cfg.proj)
    names = ["V"] + [f"err_axis_{i + 1}" for i in range(3)]
    columns = ["t", "err_fro"] + [f"delta_{c}" for c in names]
    rows = np.column_stack([times, err] + [ch_e[c] - ch_n[c] for c in names])
    _emit(cfg, columns, rows)
    mx = float(err.max())
    _report(f"max ||R_exact - R_numeric||_F = {mx:.3e}", cfg)
    return EXIT_OK if mx <= COMPARE_TOL else EXIT_NOCONV


_GNUPLOT_FIG1 = """\
set terminal pngcairo size 800,800
set output 'fig1.png'
set datafile separator ','
set view equal xyz
set xyplane at 0
splot for [i=1:3] 'fig1_paths.csv' using (column(3*i-1)):(column(3*i)):(column(3*i+1)) \\
    with lines title sprintf('R e_%d', i), \\
    'fig1_axes.csv' using 3:4:5 with points pt 7 title 'boundaries'
"""

_GNUPLOT_FIG2 = """\
set terminal pngcairo size 900,500
set output 'fig2.png'
set datafile separator ','
set key autotitle columnhead
set xlabel 't'
plot for [i=2:4] 'fig2_errors.csv' using 1:i with lines lw 2, \\
     for [i=5:7] 'fig2_errors.csv' using 1:i with lines dt 2
"""


def cmd_figures(cfg: ScenarioConfig, boundaries=FIG1_TIMES, density: int = FIG_DENSITY, t_max: float = FIG_T_MAX) -> int:
    if cfg.n != 3:
        raise ConfigError("n", "figures need n = 3")
    stride = max(1, int(round(1.0 / (density * cfg.dt))))
    if abs(stride * cfg.dt * density - 1.0) > 1e-9:
        raise ConfigError("dt", f"dt = {cfg.dt} does not divide the sampling interval 1/{density}")
    # run the full window: the curves are wanted past convergence as well
    traj = simulate(cfg.spec(t_max=t_max, stop_V=0.0))
    outdir = cfg.out or "."
    os.makedirs(outdir, exist_ok=True)
    idx = np.arange(0, len(traj.times), stride)
    t = traj.times[idx]
    S = traj.states[idx]
    path_cols = ["t"] + [f"axis{i + 1}_{c}" for i in range(3) for c in "xyz"]
    # columns of R are the frame axes R e_i
    path_rows = np.column_stack([t, np.swapaxes(S, -1, -2).reshape(len(t), 9)])
    with open(os.path.join(outdir, "fig1_paths.csv"), "w", newline="") as fh:
        write_table(fh, path_cols, path_rows)
    ax_rows = []
    for tb in boundaries:
        j = int(round(tb / cfg.dt))
        if j >= len(traj.times):
            raise ConfigError("boundaries", f"t = {tb} lies beyond the simulated window")
        for i in range(3):
            ax_rows.append([traj.times[j], i + 1, *traj.states[j][:, i]])
    with open(os.path.join(outdir, "fig1_axes.csv"), "w", newline="") as fh:
        write_table(fh, ["t", "axis", "x", "y", "z"], ax_rows)
    ch = traj.channels
    names = [f"err_axis_{i + 1}" for i in range(3)] + [f"dist_axis_{i + 1}" for i in range(3)]
    with open(os.path.join(outdir, "fig2_errors.csv"), "w", newline="") as fh:
        write_table(fh, ["t"] + names, np.column_stack([t] + [ch[c][idx] for c in names]))
    for name, body in (("fig1.gp", _GNUPLOT_FIG1), ("fig2.gp", _GNUPLOT_FIG2)):
        with open(os.path.join(outdir, name), "w") as fh:
            fh.write(body)
    d = [ch[f"dist_axis_{i + 1}"][-1] for i in range(3)]
    e0 = [ch[f"err_axis_{i + 1}"][0] for i in range(3)]
    print(
        "travelled " + " ".join(f"{x:.6f}" for x in d) + " | initial geodesic " + " ".join(f"{x:.6f}" for x in e0)
    )
    return EXIT_OK


def _spectrum_doc(groups):
    out = []
    for v, m in groups:
        if isinstance(v, complex):
            out.append({"value": [v.real, v.imag], "multiplicity": m})
        else:
            out.append({"value": v, "multiplicity": m})
    return out


def cmd_analyze(cfg: ScenarioConfig) -> int:
    R = cfg.require_R0()
    proj = cfg.proj
    c = analysis.classify_equilibrium(R, proj)
    doc = {
        "n": cfg.n,
        "rank_P": proj.rank,
        "k": proj.k,
        "V": float(lyapunov(R)),
        "classification": {"kind": c.kind, "i": c.i, "residuals": c.residuals, "label": str(c)},
    }
    if c.kind != "non_equilibrium":
        lam = analysis.linearization_spectrum(R, proj)
        groups = analysis.group_eigenvalues(lam)
        doc["spectrum"] = _spectrum_doc(groups)
        doc["max_real_part"] = float(lam.real.max())
        n, m, i, j = analysis.equilibrium_split(R, proj)
        d = n * (n - 1) // 2
        doc["split"] = {"m": m, "i": i, "j": j}
        doc["kernel_dimension"] = analysis.kernel_dimension(R, proj)
        doc["constraint_kernel_dimension"] = analysis.constraint_kernel_dimension(R, proj)
        doc["nonzero_eigenvalues"] = d - doc["kernel_dimension"]
        if c.kind == "identity":
            doc["predicted_spectrum"] = _spectrum_doc(analysis.predicted_identity_spectrum(n, proj.rank, proj.k))
        else:
            doc["unstable_count"] = analysis.unstable_count(n, m, i, j)
            doc["instability_bound"] = analysis.instability_bound(n, m, i, j, proj.k)
    if cfg.n == 3:
        doc["block_relations"] = list(verify_block_relations(R))
    _dump_json(cfg, doc)
    return EXIT_OK


def cmd_montecarlo(cfg: ScenarioConfig) -> int:
    forced = cfg.R0 if cfg.R0_source == "explicit" else None
    rep = analysis.monte_carlo_basin(
        cfg.n,
        cfg.proj,
        cfg.samples,
        0 if cfg.seed is None else cfg.seed,
        dt=cfg.dt,
        t_max=cfg.t_max,
        stop_V=cfg.stop_V,
        method=cfg.method,
        R0=forced,
    )
    doc = rep.to_dict()
    doc["k"] = cfg.k
    doc["P"] = cfg.proj.P.tolist()
    _dump_json(cfg, doc)
    _report(f"converged {rep.converged}/{rep.samples}", cfg)
    return EXIT_OK if rep.converged == rep.samples else EXIT_MC


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "figures": cmd_figures,
    "analyze": cmd_analyze,
    "montecarlo": cmd_montecarlo,
}


def _json_arg(text):
    if text in ("identity", "paper-sec8"):
        return text
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc.msg}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON scenario file")
    common.add_argument("--preset", choices=["paper-sec8"])
    common.add_argument("--n", type=int)
    common.add_argument("--P", type=_json_arg, help="diagonal mask or matrix as JSON, e.g. '[1,0,0]'")
    common.add_argument("--R0", type=_json_arg, help="matrix as JSON, 'identity' or 'paper-sec8'")
    common.add_argument("--k", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--tmax", dest="t_max", type=float)
    common.add_argument("--stop-v", dest="stop_V", type=float)
    common.add_argument("--method", choices=["lie_rk4", "rk4_project"])
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="geoatt", description="Geodesic attitude feedback on SO(n): simulation and analysis")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "integrate the closed loop and write the trajectory",
        "compare": "closed-form SO(3) solution against the integrator",
        "figures": "data and gnuplot scripts for the worked example's figures",
        "analyze": "equilibrium classification and linearization spectrum of R0",
        "montecarlo": "convergence from Haar-random initial attitudes",
    }
    for name, h in helps.items():
        sp = sub.add_parser(name, parents=[common], help=h)
        if name == "figures":
            sp.add_argument("--density", type=int, default=FIG_DENSITY, help="path points per unit time")
            sp.add_argument("--boundaries", type=float, nargs="+", default=list(FIG1_TIMES))
    return p


_OVERRIDES = ("preset", "n", "P", "R0", "k", "dt", "t_max", "stop_V", "method", "seed", "samples", "out", "format")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, {k: getattr(args, k) for k in _OVERRIDES})
        if args.command == "figures":
            return cmd_figures(cfg, tuple(args.boundaries), args.density)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"geoatt {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except GeoattError as exc:
        print(f"geoatt {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
