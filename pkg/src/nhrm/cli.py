"""Command-line driver: ``nhrm <experiment> --config <path> [--out dir] [--threads n]``.

Each run validates the whole config, computes every result in memory and
only then writes the run directory::

    config.echo     normalized config (defaults filled in)
    *.csv           data tables, floats with 17 significant digits
    plot.gp         gnuplot script for the tables
    summary.json    headline numbers

Exit codes: 0 success, 2 config error, 3 numerical guard tripped.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels
from .bloch import ModelParams
from .config import EXPERIMENTS, load_config
from .errors import ConfigError, NumericalGuard
from .geometry import CircleLoop, PolylineLoop, chern_line_integral, chern_plaquette, zak_phase
from .lattice import (
    biorthogonal_eigensystem,
    build_hamiltonian,
    commutator_residual,
    edge_modes,
    edge_probability,
    mid_gap_states,
    spectrum,
)

__all__ = ["main", "run_experiment", "fmt"]

EXIT_OK, EXIT_CONFIG, EXIT_GUARD = 0, 2, 3


def fmt(x) -> str:
    """Float with 17 significant digits (round-trips exactly)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


class Table:
    def __init__(self, name, header):
        self.name = name
        self.header = list(header)
        self.rows = []

    def add(self, *row):
        self.rows.append([fmt(v) for v in row])


def _pmap(fn, items, threads):
    # ordered results regardless of the worker count
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _params(cfg, **override) -> ModelParams:
    m = {**cfg["model"], **override}
    return ModelParams(lam=m["lam"], delta=m["delta"], V=m["V"], N=m["N"])


def _loop(entry):
    if entry["type"] == "circle":
        return CircleLoop(tuple(entry["center"]), entry["radius"], entry["orientation"])
    if entry["type"] == "polyline":
        return PolylineLoop(tuple(tuple(v) for v in entry["vertices"]))
    return PolylineLoop.rectangle(entry["delta_range"], entry["V_range"], entry["orientation"])


def _sample_path(vertices, closed, per_edge):
    pts = [tuple(v) for v in vertices]
    if closed:
        pts.append(pts[0])
    out = []
    for i in range(len(pts) - 1):
        (d0, v0), (d1, v1) = pts[i], pts[i + 1]
        last = i == len(pts) - 2
        for s in np.linspace(0.0, 1.0, per_edge + 1)[: None if last else -1]:
            out.append((i + s, d0 + s * (d1 - d0), v0 + s * (v1 - v0)))
    return out


# -- experiments ---------------------------------------------------------------


def run_spectrum_scan(cfg, threads=1):
    blk = cfg["spectrum_scan"]
    samples = _sample_path(blk["path"], blk["closed"], blk["samples_per_edge"])
    jobs = [(b, s) for b in blk["boundaries"] for s in samples]

    def job(item):
        boundary, (s, d, v) = item
        p = _params(cfg, delta=float(np.clip(d, -1, 1)), V=v)
        m = build_hamiltonian(p, boundary, blk["kappa"] if boundary == "weak_link" else None)
        return spectrum(m), len(mid_gap_states(m))

    results = _pmap(job, jobs, threads)
    table = Table("spectrum.csv", ["boundary", "s", "delta", "V", "index", "energy"])
    mid = {}
    for (boundary, (s, d, v)), (ev, n_mid) in zip(jobs, results):
        for i, e in enumerate(ev):
            table.add(boundary, s, d, v, i, e)
        mid.setdefault(boundary, []).append(n_mid)
    n = 2 * cfg["model"]["N"]
    plot = [
        "set datafile separator ','",
        "set key off",
        "set xlabel 'path parameter s'",
        "set ylabel 'E'",
    ]
    for k, b in enumerate(blk["boundaries"]):
        plot.append(f"set title '{b}'")
        plot.append(
            f"plot 'spectrum.csv' using (strcol(1) eq '{b}' ? $2 : 1/0):6 "
            f"with points pt 7 ps 0.3"
            + ("" if k == len(blk["boundaries"]) - 1 else "; pause -1")
        )
    summary = {
        "experiment": "spectrum_scan",
        "n_samples": len(samples),
        "n_sites": n,
        "boundaries": blk["boundaries"],
        "mid_gap_counts": mid,
    }
    return [table], plot, summary


def run_chern(cfg, threads=1):
    blk = cfg["chern"]
    p = _params(cfg)
    loops = blk["loops"]
    for entry in loops:  # surface LoopThroughDegeneracy before any work
        _loop(entry).check_gap()

    def job(entry):
        loop = _loop(entry)
        line = chern_line_integral(loop, p, blk["band"], nq=blk["nq"], nk=blk["nk"])
        plaq = chern_plaquette(loop, p, blk["band"], nk=blk["nk"], nq=blk["nq"])
        return line, plaq, loop.min_distance_to_origin()

    results = _pmap(job, loops, threads)
    table = Table("chern.csv", ["loop", "line_integral", "plaquette", "min_distance"])
    reports = []
    for i, (entry, (line, plaq, dist)) in enumerate(zip(loops, results)):
        name = entry.get("name", f"loop{i}")
        table.add(name, line, plaq, dist)
        reports.append({
            "name": name,
            "line_integral": line,
            "plaquette": plaq,
            "agree": abs(line - plaq) < 1e-3,
            "min_distance": dist,
            "grid": {"nk": blk["nk"], "nq": blk["nq"]},
        })
    plot = [
        "set datafile separator ','",
        "set style data histograms",
        "set ylabel 'Chern number'",
        "plot 'chern.csv' using 2:xtic(1) title 'line integral', '' using 3 title 'plaquette'",
    ]
    return [table], plot, {"experiment": "chern", "band": blk["band"], "loops": reports}


def run_zak(cfg, threads=1):
    blk = cfg["zak"]
    p = _params(cfg)
    pts = [tuple(x) for x in blk["points"]]
    vals = _pmap(lambda dv: zak_phase(dv[0], dv[1], p, blk["band"], blk["nk"]), pts, threads)
    table = Table("zak.csv", ["delta", "V", "zak"])
    for (d, v), z in zip(pts, vals):
        table.add(d, v, z)
    plot = [
        "set datafile separator ','",
        "set xlabel 'delta'",
        "set ylabel 'Zak phase / 2pi'",
        "plot 'zak.csv' using 1:3 skip 1 with linespoints pt 7",
    ]
    summary = {
        "experiment": "zak",
        "band": blk["band"],
        "nk": blk["nk"],
        "points": [{"delta": d, "V": v, "zak": z} for (d, v), z in zip(pts, vals)],
    }
    return [table], plot, summary


def run_edge_profile(cfg, threads=1):
    p = _params(cfg)
    m = build_hamiltonian(p, "open")
    L, R = edge_modes(p)
    e, right, left = biorthogonal_eigensystem(m)
    prob = (np.conj(left) * right).real
    iL = int(np.argmin(np.abs(e + p.V)))
    iR = int(np.argmin(np.abs(e - p.V)))
    n = m.n_sites
    table = Table("edge.csv", ["site", "P_L", "P_R", "P_L_diag", "P_R_diag"])
    for l in range(1, n + 1):
        table.add(l, edge_probability(L, l), edge_probability(R, l),
                  prob[l - 1, iL], prob[l - 1, iR])
    dev_L = float(np.abs(prob[:, iL] - L.amplitude**2).max()) if iL != iR else None
    dev_R = float(np.abs(prob[:, iR] - R.amplitude**2).max()) if iL != iR else None
    plot = [
        "set datafile separator ','",
        "set xlabel 'site l'",
        "set ylabel 'P(l)'",
        "set logscale y",
        "plot 'edge.csv' using 1:2 skip 1 with linespoints title 'P_L', "
        "'' using 1:3 skip 1 with linespoints title 'P_R'",
    ]
    summary = {
        "experiment": "edge_profile",
        "ratio": L.ratio,
        "norm_factor": L.norm_factor,
        "mid_gap": [float(x) for x in mid_gap_states(m)],
        "energy_L": float(e[iL]),
        "energy_R": float(e[iR]),
        "max_profile_deviation": {"L": dev_L, "R": dev_R},
        "commutator_residual": {
            "L": commutator_residual(L, m),
            "R": commutator_residual(R, m),
        },
    }
    return [table], plot, summary


def run_pump(cfg, threads=1):
    from .dynamics import pump_experiment

    blk = cfg["pump"]
    p = _params(cfg)
    rep = pump_experiment(
        p, blk["kappa"], blk["omegas"], V0=blk["V0"], n_steps=blk["n_steps"],
        left_source=blk["left_source"], threads=threads,
    )
    tables, runs = [], []
    for i, r in enumerate(rep.runs):
        stride = blk["output_stride"] or max(1, r.n_steps // 5000)
        idx = list(range(0, r.n_steps + 1, stride))
        if idx[-1] != r.n_steps:
            idx.append(r.n_steps)
        t = Table(f"pump_{i}.csv", ["t", "V_t", "j_end", "q_end", "f", "norm_drift"])
        for s in idx:
            t.add(r.times[s], r.V_t[s], r.j_end[s], r.q_end[s], r.fidelity[s], r.norm_drift[s])
        tables.append(t)
        runs.append({
            "omega": r.omega,
            "file": t.name,
            "n_steps": r.n_steps,
            "final_charge": r.final_charge,
            "final_charge_instantaneous_left": r.final_charge_instantaneous,
            "min_fidelity": r.min_fidelity,
            "max_fidelity_deviation": 1.0 - r.min_fidelity,
            "max_norm_drift": r.max_norm_drift,
            "max_current_imag": r.current_imag,
        })
    slow = min(runs, key=lambda x: x["omega"])
    fast = max(runs, key=lambda x: x["omega"])
    plot = ["set datafile separator ','", "set multiplot layout 2,1", "set xlabel 't'"]
    for col, label in ((3, "j_end"), (4, "q_end")):
        plot.append(f"set ylabel '{label}'")
        plot.append("plot " + ", ".join(
            f"'{t.name}' using 1:{col} skip 1 with lines title 'omega={fmt(r['omega'])}'"
            for t, r in zip(tables, runs)
        ))
    plot.append("unset multiplot")
    summary = {
        "experiment": "pump",
        "kappa": rep.kappa,
        "V0": rep.V0,
        "runs": runs,
        "slowest": {"omega": slow["omega"], "final_charge": slow["final_charge"]},
        "fastest": {"omega": fast["omega"], "final_charge": fast["final_charge"]},
        "sign_flip": bool(np.sign(slow["final_charge"]) != np.sign(fast["final_charge"])),
        "metadata": rep.metadata,
    }
    return tables, plot, summary


RUNNERS = {
    "spectrum_scan": run_spectrum_scan,
    "chern": run_chern,
    "zak": run_zak,
    "edge_profile": run_edge_profile,
    "pump": run_pump,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_run(out, cfg, tables, plot, summary):
    """Single writer for the run directory."""
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.echo"), "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for t in tables:
        with open(os.path.join(out, t.name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(t.header)
            w.writerows(t.rows)
    with open(os.path.join(out, "plot.gp"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(plot) + "\n")
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(experiment, config_path, out=None, threads=1):
    """Validate, compute and write; returns the summary dict."""
    cfg = load_config(config_path, experiment)
    if threads < 1:
        raise ConfigError("--threads", "must be at least 1")
    tables, plot, summary = RUNNERS[experiment](cfg, threads)
    summary["backend"] = _kernels.BACKEND
    write_run(out or default_out(experiment), cfg, tables, plot, summary)
    return summary


def default_out(experiment):
    return f"nhrm-{experiment}"


def build_parser():
    ap = argparse.ArgumentParser(prog="nhrm", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--out", default=None, help="run directory (default nhrm-<experiment>)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = run_experiment(args.experiment, args.config, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuard as exc:
        print(f"numerical guard {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    out = args.out or default_out(args.experiment)
    print(f"{args.experiment}: wrote {os.path.join(out, 'summary.json')}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
