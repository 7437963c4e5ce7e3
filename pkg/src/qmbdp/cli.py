"""Command-line front end.

Each subcommand sweeps the model over ``sweep.deltas`` (and optionally
``sweep.n_sites`` / ``sweep.taus``), writes CSV tables, optional SVG
plots and a ``manifest.json`` into ``--out-dir``.

Exit status: 0 success, 1 invalid configuration, 2 a sweep point failed.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from math import comb
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .fock import DEFAULT_MAX_DIM
from .io import write_csv, write_manifest
from .plotting import SchemaError, plot_csv
from .spectra import SECTOR_DENSE_CAP

log = logging.getLogger("qmbdp")

SUBCOMMANDS = ("gaps", "lambda1", "rn", "dynamics", "trajectory", "singleshot", "transition")


# ---------------------------------------------------------------- workers
# Module-level functions so that they pickle into worker processes.

def _work_gaps(cfg: RunConfig, n: int, delta: float, tau: float) -> dict:
    from .fock import right_count
    from .operators import build_h0, build_h1
    from .spectra import diagonalize_sector, vvpt_gap
    from .system import ChainSystem

    system = ChainSystem(cfg.detection(delta, n))
    mask = right_count(system.sector)
    H0 = build_h0(system.sector, system.config.params)
    q = [diagonalize_sector(H0, mask, 0), diagonalize_sector(H0, mask, 1)]
    table = vvpt_gap(q, diagonalize_sector(H0, mask, 2), build_h1(system.sector, system.config.params))
    return {"rows": list(table.rows()), "alpha_mid": table.alpha_mid}


def _work_lambda1(cfg: RunConfig, n: int, delta: float, tau: float) -> dict:
    from .krylov import mq_leading
    from .system import ChainSystem

    system = ChainSystem(cfg.detection(delta, n, tau))
    s = cfg.values["solver"]
    est = mq_leading(system.plan, system.P, system.Q, m=s["krylov_m"],
                     max_restarts=s["krylov_restarts"], tol=s["krylov_tol"], seed=cfg["run.seed"])
    return {"est": est}


def _work_rn(cfg: RunConfig, n: int, delta: float, tau: float) -> dict:
    from .detection import no_detection_series

    series = no_detection_series(cfg.detection(delta, n, tau))
    return {"log_r": series.log_r}


def _work_dynamics(cfg: RunConfig, n: int, delta: float, tau: float) -> dict:
    from .detection import free_dynamics

    dc = cfg.detection(delta, n)
    times = [t * cfg["model.J"] for t in cfg["dynamics.times"]]
    site = cfg["dynamics.site"]
    res = free_dynamics(dc, times, ["NR", site, (dc.p, dc.q)])
    return {"times": times, "NR": res["NR"], "site": res[f"n{site}"], "npnq": res[f"n{dc.p}n{dc.q}"]}


def _work_trajectory(cfg: RunConfig, n: int, delta: float, tau: float) -> dict:
    from .trajectories import trajectory_ensemble

    records, summary = trajectory_ensemble(cfg.detection(delta, n, tau), cfg["trajectory.n_traj"], cfg["run.seed"])
    return {"records": records, "summary": summary}


def _work_singleshot(cfg: RunConfig, n: int, delta: float, tau: float) -> dict:
    from .detection import single_shot_probability

    t = cfg["singleshot.t"] * cfg["model.J"]
    return {"t": t, "npnq": single_shot_probability(cfg.detection(delta, n), t)}


WORKERS = {
    "gaps": _work_gaps,
    "lambda1": _work_lambda1,
    "rn": _work_rn,
    "transition": _work_rn,
    "dynamics": _work_dynamics,
    "trajectory": _work_trajectory,
    "singleshot": _work_singleshot,
}


def _run_point(job):
    sub, cfg, n, delta, tau = job
    try:
        return {"ok": True, **WORKERS[sub](cfg, n, delta, tau)}
    except Exception as exc:  # reported as a failure marker, the sweep continues
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


# ---------------------------------------------------------------- planning

@dataclass
class Outputs:
    out_dir: Path
    files: list[Path] = field(default_factory=list)
    tables: list[tuple[Path, str]] = field(default_factory=list)

    def csv(self, name: str, header, rows, plot_kind: str | None = None) -> Path:
        path = write_csv(self.out_dir / name, header, rows)
        self.files.append(path)
        if plot_kind:
            self.tables.append((path, plot_kind))
        return path


def _tag(x: float) -> str:
    return f"{x:g}".replace("-", "m")


def _jobs(sub: str, cfg: RunConfig):
    taus = cfg.taus if sub in ("lambda1", "rn", "transition", "trajectory") else [cfg["detector.tau"]]
    return [(sub, cfg, n, d, t) for n in cfg.sizes for t in taus for d in cfg.deltas]


def _check_feasible(sub: str, cfg: RunConfig) -> None:
    for n in cfg.sizes:
        dim = comb(n, n // 2)
        if dim > DEFAULT_MAX_DIM:
            raise ConfigError(f"fock-basis refused N={n}: dimension {dim} above budget {DEFAULT_MAX_DIM}")
        if sub == "gaps":
            block = comb(n // 2, 2) ** 2
            if block > SECTOR_DENSE_CAP:
                raise ConfigError(f"sector-spectra refused N={n}: N_R=2 block {block} above dense cap {SECTOR_DENSE_CAP}")


def _status(res) -> str:
    return "ok" if res["ok"] else "failed: " + res["error"].replace("\n", " ")


def _write(sub: str, cfg: RunConfig, jobs, results, out: Outputs) -> None:
    if sub == "gaps":
        summary = []
        for (_, _, n, d, _), res in zip(jobs, results):
            if res["ok"]:
                out.csv(f"gaps_N{n}_delta{_tag(d)}.csv",
                        ["alpha[1]", "E_alpha[J]", "g_alpha[1]", "flagged[1]"], res["rows"])
                g = [r[2] for r in res["rows"]]
                am = res["alpha_mid"]
                summary.append([n, d, g[1], g[am], am, sum(r[3] for r in res["rows"]), "ok"])
            else:
                summary.append([n, d, None, None, None, None, _status(res)])
        out.csv("gaps_summary.csv",
                ["n_sites[1]", "delta[J]", "g_1[1]", "g_alpha_mid[1]", "alpha_mid[1]", "n_flagged[1]", "status"],
                summary, "gaps")
    elif sub == "lambda1":
        rows = []
        for (_, _, n, d, t), res in zip(jobs, results):
            e = res.get("est")
            rows.append([n, d, t, e.lambda1 if e else None, e.theta1 if e else None,
                         e.converged if e else None, e.restarts if e else None,
                         e.residual if e else None, _status(res)])
        out.csv("lambda1.csv", ["n_sites[1]", "delta[J]", "tau[1/J]", "lambda1[1/step]", "theta1[rad]",
                                "converged[1]", "restarts[1]", "residual[1]", "status"], rows, "lambda1")
    elif sub in ("rn", "transition"):
        rows = []
        for (_, _, n, d, t), res in zip(jobs, results):
            if res["ok"]:
                lr = res["log_r"]
                series = [[k, math.exp(max(v, -690.0)), -math.expm1(max(v, -690.0)), v / math.log(10)]
                          for k, v in enumerate(lr)]
                if sub == "rn":
                    out.csv(f"rn_series_N{n}_tau{_tag(t)}_delta{_tag(d)}.csv",
                            ["k[1]", "R_k[1]", "T_k[1]", "log10_R_k[1]"], series)
                rows.append([n, t, d, series[-1][1], series[-1][3], series[-1][2], "ok"])
            else:
                rows.append([n, t, d, None, None, None, _status(res)])
        header = ["n_sites[1]", "tau[1/J]", "delta[J]", "R_n[1]", "log10_R_n[1]", "T_n[1]", "status"]
        if sub == "rn":
            out.csv("rn.csv", header, rows, "rn")
        else:
            from .detection import transition_point

            out.csv("transition_sweep.csv", header, rows)
            eps = cfg["transition.eps"]
            summary = []
            for n in cfg.sizes:
                for t in sorted({r[1] for r in rows}):
                    pts = [r for r in rows if r[0] == n and r[1] == t]
                    sweep = {r[2]: r[3] for r in pts if r[3] is not None}
                    star = transition_point(sweep, eps)
                    summary.append([n, t, eps, star, star is not None])
            out.csv("transition.csv", ["n_sites[1]", "tau[1/J]", "eps[1]", "delta_star[J]", "found[1]"],
                    summary, "transition")
    elif sub == "dynamics":
        summary = []
        site = cfg["dynamics.site"]
        for (_, _, n, d, _), res in zip(jobs, results):
            if res["ok"]:
                rows = list(zip(res["times"], res["NR"], res["site"], res["npnq"]))
                out.csv(f"dynamics_N{n}_delta{_tag(d)}.csv",
                        ["t[1/J]", "N_R[1]", f"n_{site}[1]", "npnq[1]"], rows, "dynamics")
                summary.append([n, d, rows[-1][0], rows[-1][1], "ok"])
            else:
                summary.append([n, d, None, None, _status(res)])
        out.csv("dynamics_summary.csv", ["n_sites[1]", "delta[J]", "t[1/J]", "N_R[1]", "status"],
                summary, "dynamics_summary")
    elif sub == "trajectory":
        summary = []
        for (_, _, n, d, t), res in zip(jobs, results):
            tag = f"N{n}_tau{_tag(t)}_delta{_tag(d)}"
            if res["ok"]:
                recs = res["records"]
                out.csv(f"trajectory_{tag}.csv", ["trajectory_index[1]", "seed[1]", "C[1]", "aborted"],
                        [[i, r.seed, r.clicks, r.aborted or ""] for i, r in enumerate(recs)])
                out.csv(f"trajectory_clicks_{tag}.csv", ["trajectory_index[1]", "step[1]"],
                        [[i, k] for i, r in enumerate(recs) for k in r.click_steps])
                s = res["summary"]
                summary.append([n, t, d, s.n_traj, s.mean_clicks, s.min_clicks, s.max_clicks,
                                s.p_no_click, s.n_aborted, "ok"])
            else:
                summary.append([n, t, d] + [None] * 6 + [_status(res)])
        out.csv("trajectory_summary.csv",
                ["n_sites[1]", "tau[1/J]", "delta[J]", "n_traj[1]", "mean_C[1]", "min_C[1]", "max_C[1]",
                 "P_C0[1]", "n_aborted[1]", "status"], summary, "trajectory")
    elif sub == "singleshot":
        rows = []
        for (_, _, n, d, _), res in zip(jobs, results):
            rows.append([n, d, res.get("t"), res.get("npnq"), _status(res)])
        out.csv("singleshot.csv", ["n_sites[1]", "delta[J]", "t[1/J]", "npnq[1]", "status"], rows, "singleshot")


def _worker_count(requested: int) -> int:
    if requested and requested > 0:
        return requested
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def run(sub: str, cfg: RunConfig, out_dir: Path, threads: int = 0) -> int:
    _check_feasible(sub, cfg)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    jobs = _jobs(sub, cfg)
    workers = min(_worker_count(threads), len(jobs))
    log.info("%s: %d sweep points on %d worker(s)", sub, len(jobs), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    out = Outputs(Path(out_dir))
    _write(sub, cfg, jobs, results, out)
    if cfg["run.plots"]:
        for path, kind in out.tables:
            try:
                out.files.append(plot_csv(path, kind, floor=cfg["run.log_floor"]))
            except (SchemaError, ValueError) as exc:
                log.warning("no plot for %s: %s", path.name, exc)
    failed = [r["error"] for r in results if not r["ok"]]
    for err in failed:
        log.error("sweep point failed: %s", err)
    write_manifest(
        Path(out_dir) / "manifest.json",
        {
            "tool": "qmbdp",
            "version": __version__,
            "subcommand": sub,
            "config": cfg.as_text_dict(),
            "master_seed": cfg["run.seed"],
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "elapsed_s": round(time.perf_counter() - t0, 3),
            "workers": workers,
            "failed_points": len(failed),
        },
        out.files,
    )
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmbdp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = subs.add_parser(name)
        sp.add_argument("--config", type=Path, help="INI file with [section] key = value entries")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
        sp.add_argument("--out-dir", type=Path, default=Path("out"))
        sp.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
        sp.add_argument("--seed", type=int, default=None, help="master seed (run.seed)")
    pp = subs.add_parser("plot")
    pp.add_argument("csv", type=Path)
    pp.add_argument("--kind", required=True)
    pp.add_argument("--out", type=Path)
    pp.add_argument("--floor", type=float, default=1e-300)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "plot":
        try:
            path = plot_csv(args.csv, args.kind, args.out, args.floor)
        except (SchemaError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(path)
        return 0
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"run.threads={args.threads}")
    try:
        cfg = load_config(args.config, overrides)
        _check_feasible(args.command, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return run(args.command, cfg, args.out_dir, cfg["run.threads"])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
