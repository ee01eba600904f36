"""Command-line front end.

Every command reads defaults, then an optional TOML config, then the
``QUASIBROWN_SEED`` / ``QUASIBROWN_OUT`` environment variables, then flags
(later wins).  Exit status: 0 success, 1 acceptance failure, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np
import tomli

from . import acceptance
from . import classical_processes as cp
from . import diagnostics as dg
from . import ensembles as en
from . import io
from . import quantum_dynamics as qd
from . import spectra as sp

DEFAULT_SEED = acceptance.DEFAULT_SEED
DEFAULT_OUT = "quasibrown-out"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    pass


def _block(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props}


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 1}
_ints = {"type": "array", "items": {"type": "integer"}}

COMMAND_PARAMS = {
    "fig1": {"gamma": _pos, "n_terms": _int, "grid": _int, "seeds": _ints},
    "wiener": {"n_terms": _int, "n_draws": _int, "grid": _int, "series_scale": _pos},
    "ou": {"gamma": _pos, "n_terms": _int, "grid": _int, "series_scale": _pos},
    "ou-msd": {"gamma": _pos, "n_paths": _int, "n_terms": _int, "grid": _int, "series_scale": _pos},
    "spectrum-bounds": {"A": _pos, "B": _num, "C": _num, "N": _int, "m": _pos, "M": _pos,
                        "hbar": _pos, "cutoff": _pos, "sides": {"enum": ["both", "right"]}},
    "triangle-eig": {"m": _pos, "M": _pos, "A": _pos, "hbar": _pos, "n": _int, "k": _int,
                     "refinements": {"type": "integer", "minimum": 0}},
    "inverse-sum": {"dims": _ints, "budget": _int},
    "gibbs-msd": {"n_modes": _int, "beta": {"type": "number", "minimum": 0}, "e_max": _pos,
                  "n_samples": _int, "n_chains": _int, "A": _pos, "t_min": _pos, "t_max": _pos,
                  "n_times": _int, "slope_tol": _pos},
    "nbml": {"n_modes": _int, "beta": {"type": "number", "minimum": 0}, "e_max": _pos,
             "n_samples": _int, "levels": _int},
    "zeno": {"n": _int, "domain_size": _int, "total_time": _pos, "n_peeks": _ints},
    "wfe": {"sites": _int, "w": _num, "N": _int, "operator": {"enum": ["S", "X", "P"]},
            "steps": _int, "dt_factor": _pos},
    "suite": {"only": {"type": "array", "items": {"type": ["string", "integer"]}}},
}

CONFIG_SCHEMA = _block({"seed": {"type": "integer", "minimum": 0}, "out": {"type": "string"},
                        **{cmd: _block(p) for cmd, p in COMMAND_PARAMS.items()}})

DEFAULTS = {
    "fig1": {"gamma": cp.FIG1_GAMMA, "n_terms": cp.FIG1_TERMS, "grid": cp.FIG1_GRID,
             "seeds": [1, 2, 3, 4, 5]},
    "wiener": {"n_terms": 1000, "n_draws": 10_000, "grid": 65, "series_scale": 1.0},
    "ou": {"gamma": cp.FIG1_GAMMA, "n_terms": cp.FIG1_TERMS, "grid": cp.FIG1_GRID, "series_scale": 1.0},
    "ou-msd": {"gamma": 10.0, "n_paths": 10_000, "n_terms": 1000, "grid": 11, "series_scale": 1.0},
    "spectrum-bounds": {"A": 0.5, "N": 1, "m": 1.0, "M": 1.0, "hbar": 1.0, "cutoff": 2000.0,
                        "sides": "both"},
    "triangle-eig": {"m": 1.0, "M": 4.0, "A": 0.5, "hbar": 1.0, "n": 32, "k": 5, "refinements": 2},
    "inverse-sum": {"dims": [1, 2, 3], "budget": 10 ** 6},
    "gibbs-msd": {"n_modes": 8, "beta": 0.02, "e_max": 120.0, "n_samples": 20_000, "n_chains": 64,
                  "A": 0.5, "t_min": 1e-5, "t_max": 10.0, "n_times": 256, "slope_tol": 0.1},
    "nbml": {"n_modes": 8, "beta": 0.02, "e_max": 120.0, "n_samples": 100, "levels": 10 ** 5},
    "zeno": {"n": 6, "domain_size": 3, "total_time": 1.0, "n_peeks": [1, 10, 100]},
    "wfe": {"sites": 16, "w": 1.0, "N": 1, "operator": "S", "steps": 2000, "dt_factor": 0.01},
    "suite": {"only": []},
}


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}: {exc.message}") from exc
    return doc


def resolve(args) -> tuple[dict, int, Path]:
    """Parameters for ``args.command``, root seed and output directory."""
    doc = load_config(args.config) if args.config else {}
    params = dict(DEFAULTS[args.command])
    params.update(doc.get(args.command, {}))
    seed = doc.get("seed", DEFAULT_SEED)
    out = doc.get("out", DEFAULT_OUT)
    if "QUASIBROWN_SEED" in os.environ:
        try:
            seed = int(os.environ["QUASIBROWN_SEED"])
        except ValueError as exc:
            raise ConfigError("QUASIBROWN_SEED must be an integer") from exc
    out = os.environ.get("QUASIBROWN_OUT", out)
    if args.seed is not None:
        seed = args.seed
    if args.out is not None:
        out = args.out
    if getattr(args, "only", None):
        params["only"] = [x for item in args.only for x in str(item).split(",") if x]
    if seed < 0:
        raise ConfigError("seed must be >= 0")
    return params, seed, Path(out)


def _outdir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --------------------------------------------------------------------------
# commands


def cmd_fig1(p, seed, out):
    """Five OU series curves, a combined gnuplot file and a manifest."""
    out = _outdir(out)
    t = np.linspace(0.0, 1.0, p["grid"])
    files, columns = [], [t]
    for s in p["seeds"]:
        traj = cp.ou_series_sample(cp.OUParams(p["gamma"], p["n_terms"], s),
                                   cp.draw_coefficients(p["n_terms"], s), t)
        files.append(io.write_trajectory_csv(traj, out / f"fig1_seed{s}.csv"))
        columns.append(traj.values)
    combined = out / "fig1_combined.dat"
    with combined.open("w", newline="") as fh:
        fh.write("# t " + " ".join(f"seed{s}" for s in p["seeds"]) + "\n")
        for row in zip(*columns):
            fh.write(" ".join("%.17g" % v for v in row) + "\n")
    manifest = {"command": "fig1", "params": p,
                "files": {f.name: _digest(f) for f in files + [combined]},
                "reversals": {f"seed{s}": cp.count_direction_reversals(c)
                              for s, c in zip(p["seeds"], columns[1:])}}
    io.write_json(out / "fig1_manifest.json", manifest)
    return EXIT_OK


def cmd_wiener(p, seed, out):
    out = _outdir(out)
    t = np.linspace(0.0, 1.0, p["grid"])
    draw = cp.draw_coefficients(p["n_terms"], seed)
    io.write_trajectory_csv(cp.wiener_series_sample(draw, t, p["series_scale"]), out / "wiener_path.csv")
    ens = cp.series_ensemble(cp.wiener_basis(p["n_terms"], t, p["series_scale"]), p["n_draws"], seed)
    sq = ens ** 2
    io.write_table_csv({"t": t, "mean_sq": sq.mean(axis=0),
                        "stderr": sq.std(axis=0, ddof=1) / np.sqrt(p["n_draws"]),
                        "theory": np.sum(cp.wiener_basis(p["n_terms"], t, p["series_scale"]) ** 2, axis=1)},
                       out / "wiener_variance.csv")
    return EXIT_OK


def cmd_ou(p, seed, out):
    out = _outdir(out)
    t = np.linspace(0.0, 1.0, p["grid"])
    traj = cp.ou_series_sample(cp.OUParams(p["gamma"], p["n_terms"], seed),
                               cp.draw_coefficients(p["n_terms"], seed), t, p["series_scale"])
    io.write_trajectory_csv(traj, out / "ou_series.csv")
    exact, _ = cp.ou_exact_sample(p["gamma"], t, seed)
    io.write_trajectory_csv(exact, out / "ou_exact.csv")
    return EXIT_OK


def cmd_ou_msd(p, seed, out):
    out = _outdir(out)
    t = np.linspace(0.0, 1.0, p["grid"])[1:]
    tab = cp.msd_table(p["gamma"], t, p["n_paths"], seed, p["n_terms"], series_scale=p["series_scale"])
    io.write_table_csv(tab, out / "ou_msd.csv")
    return EXIT_OK


def cmd_spectrum_bounds(p, seed, out):
    out = _outdir(out)
    geom = sp.BoxGeometry(p["A"], p.get("B"), p.get("C"), p["N"], p["m"], p["M"], p["hbar"], p["sides"])
    io.write_spectrum_csv(sp.surrounding_rectangle_spectrum(geom, p["cutoff"]), out / "surrounding.csv")
    io.write_spectrum_csv(sp.immersed_rectangle_spectrum(geom, p["cutoff"]), out / "immersed.csv")
    return EXIT_OK


def cmd_triangle_eig(p, seed, out):
    out = _outdir(out)
    grid = sp.TriangleGrid(p["m"], p["M"], p["A"], p["hbar"], p["n"])
    res = sp.triangle_dirichlet_eigs(grid, p["k"], p["refinements"])
    io.write_spectrum_csv(res.spectrum, out / "triangle.csv")
    io.write_json(out / "triangle_convergence.json", {"params": p, "levels": res.table(),
                                                      "residuals": res.residuals})
    return EXIT_OK


def cmd_inverse_sum(p, seed, out):
    out = _outdir(out)
    report = {}
    for d in p["dims"]:
        r = sp.inverse_eigenvalue_sum(dims=d, budget=p["budget"])
        io.write_table_csv({"K": r.index, "partial_sum": r.partial_sums}, out / f"inverse_sum_N{d}.csv")
        report[f"N{d}"] = {"fit": r.fit, "verdict": r.verdict, "budget": r.budget, "rationale": r.rationale}
    io.write_json(out / "inverse_sum.json", report)
    return EXIT_OK


def _gibbs(p, seed):
    spec = en.GibbsEnsembleSpec(en.box_spectrum(p["n_modes"], p.get("A", 0.5)), p["beta"], p["e_max"],
                                p["n_modes"], seed, p.get("n_chains", 32))
    return spec, en.gibbs_sample(spec, p["n_samples"])


def cmd_gibbs_msd(p, seed, out):
    out = _outdir(out)
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always", en.SamplingQualityWarning)
        spec, samples = _gibbs(p, seed)
    moments = en.coefficient_moments(samples)
    io.write_json(out / "gibbs_moments.json", {**moments.to_dict(), "ess": samples.ess,
                                               "acceptance_rate": samples.acceptance_rate,
                                               "warnings": samples.warnings})
    g = en.box_position_matrix(spec.n_modes, p["A"])
    t = np.geomspace(p["t_min"], p["t_max"], p["n_times"])
    msd = en.msd_curve(spec.zeta, g, moments, t)
    io.write_trajectory_csv(msd, out / "gibbs_msd.csv")
    win = en.diffusive_window_detect(msd, p["slope_tol"])
    io.write_json(out / "diffusive_window.json", {k: v for k, v in win.__dict__.items() if k != "local_slopes"})
    return EXIT_OK


def cmd_nbml(p, seed, out):
    out = _outdir(out)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", en.SamplingQualityWarning)
        spec, samples = _gibbs({**p, "n_chains": 4}, seed)
    g = en.box_position_matrix(spec.n_modes)
    B = dg.build_B_matrix(g, spec.zeta)
    levels = en.box_spectrum(1).eigenvalues[0] * np.arange(1, p["levels"] + 1) ** 2
    rep = dg.nbml_criteria(B, levels, spec.e_max, samples=samples, g=g)
    (out / "nbml_report.json").write_text(rep.to_json() + "\n")
    return EXIT_OK


def cmd_zeno(p, seed, out):
    out = _outdir(out)
    system = qd.random_mode_system(p["n"], seed, p["domain_size"])
    psi = qd.random_state(p["n"], seed, system.projectors["D"])
    rep = qd.zeno_survival(system, psi, "D", n_peeks=p["n_peeks"], total_time=p["total_time"])
    io.write_table_csv({"delta_t": rep.delta_t, "deficit": rep.deficit}, out / "zeno_deficit.csv")
    io.write_json(out / "zeno.json", {"exponent": rep.exponent, "prefactor": rep.prefactor,
                                      "total_time": rep.total_time, "n_peeks": rep.n_peeks,
                                      "survival": rep.peek_survival, "monotone": rep.monotone})
    return EXIT_OK


def cmd_wfe(p, seed, out):
    """Paired w=0 / w>0 runs on a chain started as a two-lump superposition."""
    out = _outdir(out)
    system = qd.lattice_system(p["sites"])
    n = system.n
    psi = np.zeros(n, dtype=complex)
    psi[n // 4] = psi[3 * n // 4] = 1 / np.sqrt(2)
    if p["operator"] == "P":
        raise ConfigError("the lattice run supports operator S or X; P is covered by the velocity check")
    dt = p["dt_factor"] / qd.stability_number(system, qd.WFEParams(p["w"], p["N"], p["operator"]), 1.0)
    runs = {w: qd.evolve_wfe(system, qd.WFEParams(w, p["N"], p["operator"]), psi, dt, p["steps"])
            for w in (0.0, p["w"])}
    cols = {"t": runs[0.0].times}
    for w, run in runs.items():
        cats = [qd.cat_indicator(s / np.linalg.norm(s), system.projectors["left"],
                                 system.projectors["right"], system.X) for s in run.states]
        cols[f"left_w{w:g}"] = [c.weight_1 for c in cats]
        cols[f"right_w{w:g}"] = [c.weight_2 for c in cats]
        cols[f"dispersion_w{w:g}"] = [qd.compute_dispersion(s / np.linalg.norm(s), system.S)
                                      for s in run.states]
    io.write_table_csv(cols, out / "wfe_cat.csv")
    ladder = qd.ladder_system()
    psi_l = qd.random_state(ladder.n, seed, ladder.projectors["low"])
    vel = {op: qd.initial_velocity_check(ladder, qd.WFEParams(p["w"], p["N"], op), psi_l).__dict__
           for op in ("S", "X", "P")}
    io.write_json(out / "wfe.json", {"norm_drift": {str(w): r.norm_drift for w, r in runs.items()},
                                     "energy_drift": {str(w): r.energy_drift for w, r in runs.items()},
                                     "initial_velocity": vel})
    return EXIT_OK


def cmd_suite(p, seed, out):
    out = _outdir(out)
    try:
        results = acceptance.run_suite(p.get("only") or None, seed, echo=print)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    io.write_json(out / "suite_report.json", {"seed": seed, "criteria": [r.to_dict() for r in results],
                                              "passed": all(r.passed for r in results)})
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {
    "fig1": cmd_fig1, "wiener": cmd_wiener, "ou": cmd_ou, "ou-msd": cmd_ou_msd,
    "spectrum-bounds": cmd_spectrum_bounds, "triangle-eig": cmd_triangle_eig,
    "inverse-sum": cmd_inverse_sum, "gibbs-msd": cmd_gibbs_msd, "nbml": cmd_nbml,
    "zeno": cmd_zeno, "wfe": cmd_wfe, "suite": cmd_suite,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"root seed (default {DEFAULT_SEED})")
    common.add_argument("--out", default=None, help=f"output directory (default ./{DEFAULT_OUT})")
    common.add_argument("--config", default=None, help="TOML config file")
    parser = argparse.ArgumentParser(prog="quasibrown", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sp_ = sub.add_parser(name, parents=[common], help=(func.__doc__ or name).split("\n")[0])
        if name == "suite":
            sp_.add_argument("--only", action="append", default=None,
                             help="criterion numbers or module names, comma separated")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        params, seed, out = resolve(args)
        return COMMANDS[args.command](params, seed, out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
