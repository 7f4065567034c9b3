"""Command-line front end.

    mpea construct    --scenario jc_fig3 --out out/
    mpea run          --scenario axial_fig4 --out out/
    mpea estimate     --scenario jc_tplus_digits --out out/
    mpea trajectories --scenario axial_fig4 --seed 7 --out out/

Exit status: 0 on success, 2 when the scenario fails validation, 1 on a
runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import engine, evolution, readout
from .errors import InsufficientContrast, MpeaError, ScenarioError
from .scenario import Scenario, load_scenario, matrix_to_json

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2


def fmt(x: float) -> str:
    return "%.17g" % x


def _write(out: Path, files: dict[str, str]):
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# -- subcommands: each returns {filename: text} -------------------------------

def cmd_construct(sc: Scenario) -> dict[str, str]:
    ev = evolution.construct_vb(sc.system, sc.tau)
    basis = "computational" if sc.system.basis is None else "reporting"
    labels = list(sc.system.basis_labels) if sc.system.basis_labels else None
    dump = {
        "model": sc.model, "tau": sc.tau, "dim": ev.dim, "basis": basis, "basis_labels": labels,
        "matrix": matrix_to_json(ev.in_basis()),
    }
    spectrum = evolution.classical_spectrum(ev)
    rows = []
    for k, r in enumerate(spectrum.rows()):
        lam = r["lambda"]
        rows.append([k, float(lam.real), float(lam.imag), r["modulus"], r["phase"], r["fraction"],
                     int(spectrum.degenerate and k < 2)])
    table = _csv(["k", "lambda_re", "lambda_im", "modulus", "phase", "fraction", "degenerate"], rows)
    return {"vb.json": _json(dump), "spectrum.csv": table}


def survival_rows(sc: Scenario):
    m_max = sc.m_max if sc.m_max is not None else (sc.m or 0)
    ev = evolution.construct_vb(sc.system, sc.tau)
    P = engine.survival_curve(ev, sc.rho_B, m_max)
    ref = engine.default_reference(sc.system, sc.tau, sc.rho_B)
    if m_max == 0:
        run = engine.init_run(sc.system, sc.rho_B, "plus", ref)
    else:
        run = engine.run_post_selected(sc.system, sc.rho_B, sc.tau, m_max, reference=ref)
    F = run.fidelity if ref is not None else [float("nan")] * (m_max + 1)
    return [[m, float(P[m]), float(F[m]), float(run.survival[m])]
            for m in range(m_max + 1)], P


def cmd_run(sc: Scenario) -> dict[str, str]:
    rows, _ = survival_rows(sc)
    return {"survival.csv": _csv(["m", "P", "F", "conditional_P"], rows)}


def estimate(sc: Scenario) -> readout.EigenEstimate:
    sampled = sc.stochastic
    if sc.readout == "qst":
        return readout.qst_estimate(
            sc.system, sc.rho_B, sc.tau, sc.readout_m,
            copies=sc.copies if sampled else None, seed=sc.seed, two_basis=sc.two_basis,
        )
    b = sc.b
    if b is None:
        run = engine.run_post_selected(sc.system, sc.rho_B, sc.tau, sc.m_b)
        ens = readout.ensemble_from_run(run, sc.copies if sampled else None, sc.seed)
        b = readout.qst_estimate_b(ens, sc.m_b)
    return readout.mqft_extract_bits(
        sc.system, sc.rho_B, sc.tau, sc.n_bits, b,
        sampling=sc.copies if sampled else "exact", qk_mode=sc.qk_mode, seed=sc.seed,
    )


def cmd_estimate(sc: Scenario) -> dict[str, str]:
    return {"estimate.json": _json(estimate(sc).to_dict())}


def cmd_trajectories(sc: Scenario) -> dict[str, str]:
    m = sc.m if sc.m is not None else sc.m_max
    sample = engine.sample_trajectories(sc.system, sc.rho_B, sc.tau, m, sc.n_traj, sc.seed, sc.workers)
    p = float(engine.survival_curve(evolution.construct_vb(sc.system, sc.tau), sc.rho_B, m)[-1])
    rows = [[i, int(a), int(s), int(s == m)] for i, (a, s) in enumerate(zip(sample.attempted, sample.succeeded))]
    summary = {
        "seed": sc.seed, "m": m, "n_traj": sample.n_traj, "success_rate": sample.success_rate,
        "P_exact": p, "binomial_sigma": float(np.sqrt(p * (1 - p) / sample.n_traj)),
    }
    return {
        "trajectories.csv": _csv(["trajectory", "attempted", "succeeded_chain_length", "success"], rows),
        "trajectories_summary.json": _json(summary),
    }


COMMANDS = {
    "construct": cmd_construct,
    "run": cmd_run,
    "estimate": cmd_estimate,
    "trajectories": cmd_trajectories,
}


def check_command(cmd: str, sc: Scenario):
    """Validation that depends on the subcommand; runs before any computation."""
    if cmd == "run" and sc.m_max is None and sc.m is None:
        raise ScenarioError("key 'run.m_max' is required for 'run'")
    if cmd == "trajectories":
        if sc.m is None and sc.m_max is None:
            raise ScenarioError("key 'run.m' is required for 'trajectories'")
        if sc.seed is None:
            raise ScenarioError("trajectory sampling is stochastic: set 'sampling.seed' or pass --seed")
    if cmd == "estimate":
        if sc.readout == "none":
            raise ScenarioError("key 'readout.method' must be qst or mqft for 'estimate'")
        if sc.stochastic:
            if sc.seed is None:
                raise ScenarioError("sampling.mode = sample needs 'sampling.seed' or --seed")
            if sc.copies is None:
                raise ScenarioError("key 'readout.copies' is required when sampling.mode = sample")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpea", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=True, help="scenario file or bundled name")
        s.add_argument("--out", type=Path, default=None, help="output directory")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--mode", choices=("exact", "sample"), default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            sc.seed = args.seed
        if args.mode is not None:
            sc.mode = args.mode
        check_command(args.command, sc)
    except ScenarioError as exc:
        print(f"mpea: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = args.out or sc.out_dir or Path("mpea_out")
    try:
        files = COMMANDS[args.command](sc)
    except InsufficientContrast as exc:
        print(f"mpea: {exc} (failing bit index {exc.bit})", file=sys.stderr)
        return EXIT_RUNTIME
    except MpeaError as exc:
        print(f"mpea: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _write(out, files)
    for name in files:
        print(out / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
