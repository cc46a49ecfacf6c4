"""Command-line experiment runner.

Exit codes: 0 all budgets met, 1 budget violation, 2 configuration error,
3 numerical hard error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .circuit import gev_via_circuit
from .config import build_family, integrator_config, load_config, scan_grid
from .dynamics import EvolutionGenerator as GEN
from .errors import ConfigError, NearOrthogonal, PHQGTError
from .measurement import (
    NEAR_CRITICAL,
    TargetStates,
    chern_scan,
    component_names,
    fluctuation_operator,
    gev,
    qgt_scan,
    summarize,
    transition_point,
)
from .models import TWO_PI, ModelI
from .qgt import chern_number

log = logging.getLogger("phqgt")

EXIT_OK, EXIT_BUDGET, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
CIRCUIT_TOL = 1e-10
CHERN_TOL = 0.1
CROSSING_TOL = 0.1


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(x)
    return format(float(x), ".12g")


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([r if isinstance(r, str) else fmt(r) for r in row])


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _schemes(choice: str) -> list[str]:
    return ["scheme1", "scheme2"] if choice == "both" else [choice]


def _out_dir(cfg) -> Path:
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _directions(scan: dict, family) -> tuple[int, int]:
    try:
        mu = family.direction(scan.get("mu", family.param_names[0]))
        nu = family.direction(scan.get("nu", family.param_names[1]))
    except KeyError as exc:
        raise ConfigError(f"scan.mu/scan.nu: {exc}") from None
    if mu == nu:
        raise ConfigError("scan.mu/scan.nu: directions must differ")
    return mu, nu


def run_qgt_figure(cfg: dict, workers: int = 1) -> tuple[int, list[Path]]:
    """Scheme tables and budget summary for a QGT line scan (Figs. 1 and 3)."""
    family = build_family(cfg["model"])
    scan, dyn = cfg["scan"], cfg["dynamics"]
    mu, nu = _directions(scan, family)
    grid = scan_grid(scan, family)
    config = integrator_config(dyn)
    out = _out_dir(cfg)
    prefix = cfg["output"]["prefix"]
    names = component_names(family, mu, nu)
    files, summary, status = [], {}, EXIT_OK
    for scheme in _schemes(cfg.get("scheme", "both")):
        rows = qgt_scan(family, grid, scheme, mu, nu, dyn["v"], dyn["dlam"], config, workers)
        header = list(family.param_names) + list(names) + [f"ref_{n}" for n in names] + [f"err_{n}" for n in names] + ["error"]
        table = []
        for r in rows:
            errs = r.abs_errors()
            table.append(list(r.lam) + [r.estimate[n] for n in names] + [r.reference[n] for n in names]
                         + [errs[n] for n in names] + [r.error or ""])
        path = out / f"{prefix}_{scheme}.csv"
        write_csv(path, header, table)
        files.append(path)
        comps = summarize(rows)
        failed_points = [r.index for r in rows if r.error]
        summary[scheme] = {
            "components": {
                n: {"max_abs_error": s.max_abs_error, "mean_abs_error": s.mean_abs_error, "scan_max": s.scan_max,
                    "budget": s.budget, "pass": s.passed}
                for n, s in comps.items()
            },
            "failed_points": failed_points,
            "pass": not failed_points and all(s.passed for s in comps.values()),
        }
        if failed_points:
            status = EXIT_NUMERIC
        elif not summary[scheme]["pass"] and status == EXIT_OK:
            status = EXIT_BUDGET
    summary["parameters"] = {"v": dyn["v"], "dlam": dyn["dlam"], "points": len(grid), "q": cfg["model"]["q"]}
    path = out / f"{prefix}_summary.json"
    write_json(path, summary)
    files.append(path)
    return status, files


def run_fig1(cfg: dict, workers: int = 1):
    return run_qgt_figure(cfg, workers)


def run_fig3(cfg: dict, workers: int = 1):
    return run_qgt_figure(cfg, workers)


def _model1(cfg) -> tuple[ModelI, float]:
    m = cfg["model"]
    if m["variant"] != "model1":
        raise ConfigError("model.variant: Chern scans require model1")
    return ModelI.from_cycles(m["omega1"], m["delta1"], m.get("delta2", 0.0)), m["q"]


def run_fig2(cfg: dict, workers: int = 1) -> tuple[int, list[Path]]:
    model, q = _model1(cfg)
    scan, dyn = cfg["scan"], cfg["dynamics"]
    points = scan.get("points", 16)
    delta2 = TWO_PI * np.linspace(scan.get("delta2_start", 0.0), scan.get("delta2_stop", 30.0), points)
    schemes = [s for s in _schemes(cfg.get("scheme", "both")) if s != "analytic"]
    n_theta = scan.get("n_theta", 21)
    rows = chern_scan(model, q, delta2, n_theta, tuple(schemes) + ("analytic",), dyn["v"], dyn["dlam"],
                      integrator_config(dyn), scan.get("phi", 0.0), workers)
    out = _out_dir(cfg)
    prefix = cfg["output"]["prefix"]
    header = ["delta2_over_delta1"] + [f"C_{s}" for s in schemes] + ["C_analytic", "near_critical", "error"]
    table = [[r.ratio] + [r.chern[s] for s in schemes] + [r.chern["analytic"], r.near_critical, "; ".join(r.errors)]
             for r in rows]
    csv_path = out / f"{prefix}_chern.csv"
    write_csv(csv_path, header, table)

    ratios = [r.ratio for r in rows]
    verdict: dict = {}
    status = EXIT_OK
    for s in schemes:
        bad = []
        for r in rows:
            if r.near_critical:
                continue
            expected = 1.0 if r.ratio < 1.0 else 0.0
            if not abs(r.chern[s] - expected) <= CHERN_TOL:
                bad.append(r.ratio)
        crossing = transition_point(ratios, [r.chern[s] for r in rows])
        spans = min(ratios) < 1.0 < max(ratios)
        crossing_ok = (not spans) or abs(crossing - 1.0) <= CROSSING_TOL
        verdict[s] = {"off_plateau": bad, "crossing": crossing, "pass": not bad and crossing_ok}
        if not verdict[s]["pass"]:
            status = EXIT_BUDGET
    hard = [r.ratio for r in rows if r.errors and not r.near_critical]
    if hard:
        status = EXIT_NUMERIC
    summary = {"schemes": verdict, "n_theta": n_theta, "near_critical_window": NEAR_CRITICAL,
               "hard_errors": hard, "rows": len(rows)}
    json_path = out / f"{prefix}_summary.json"
    write_json(json_path, summary)
    return status, [csv_path, json_path]


def run_chern(cfg: dict, workers: int = 1):
    return run_fig2(cfg, workers)


def _random_instance(rng, dim):
    def vec():
        return rng.normal(size=dim) + 1j * rng.normal(size=dim)

    return vec(), vec(), rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


def benchmark_pairs(family, lam, v, dlam, config):
    """(label, psi1, psi2, A) for the Scheme 1 and Scheme 2 measurements at one point."""
    st = TargetStates(family, lam, v, dlam, config)
    pairs = []
    A = fluctuation_operator(family, lam)
    for mu in (0, 1):
        for nu in (0, 1):
            pairs.append((f"scheme1 mu={mu} nu={nu}", st.get(mu, GEN.H_DAGGER).vector, st.get(nu, GEN.H).vector, A))
    for mu in (0, 1):
        f = family.generalized_force(lam, mu)
        for nu in (0, 1):
            pairs.append((f"scheme2-F mu={mu} nu={nu}", st.get(nu, GEN.H_DAGGER).vector, st.get(nu, GEN.H).vector, f))
            pairs.append((f"scheme2-g mu={mu} nu={nu}", st.get(nu, GEN.MINUS_H_DAGGER).vector, st.get(nu, GEN.H).vector, f))
    return pairs


def run_circuit_check(cfg: dict, workers: int = 1) -> tuple[int, list[Path]]:
    circ, dyn = cfg["circuit"], cfg["dynamics"]
    family = build_family(cfg["model"])
    rng = np.random.default_rng(circ.get("seed", 0))
    shots = circ.get("shots")
    instances = [(f"random {i}",) + _random_instance(rng, 2) for i in range(circ.get("random_instances", 100))]
    config = integrator_config(dyn)
    n_bench = circ.get("benchmark_points", 5)
    first = family.param_names[0]
    for th in np.linspace(0.1, math.pi - 0.1, n_bench):
        lam = (float(th), 0.0)
        instances += [(f"{label} {first}={th:.6g}", *rest) for label, *rest in benchmark_pairs(family, lam, dyn["v"], dyn["dlam"], config)]
    if circ.get("inject_orthogonal", True):
        instances.append(("injected orthogonal pair", np.array([1, 0], complex), np.array([0, 1], complex), np.eye(2)))

    sample_rng = np.random.default_rng(circ.get("seed", 0) + 1)
    diffs, excluded = [], []
    for label, p1, p2, A in instances:
        try:
            direct = gev(p1, p2, A).value
            via = gev_via_circuit(p1, p2, A, shots=shots, rng=sample_rng)
        except NearOrthogonal as exc:
            excluded.append({"instance": label, "reason": str(exc)})
            continue
        diffs.append(abs(via - direct))
    report = {
        "instances": len(instances),
        "evaluated": len(diffs),
        "excluded_near_orthogonal": excluded,
        "max_abs_difference": max(diffs) if diffs else math.nan,
        "mean_abs_difference": float(np.mean(diffs)) if diffs else math.nan,
    }
    if shots:
        report["mode"] = f"shot-sampling ({shots} shots per readout); statistical report only"
        status = EXIT_OK
    else:
        report["mode"] = "exact"
        report["tolerance"] = CIRCUIT_TOL
        report["pass"] = bool(diffs) and max(diffs) <= CIRCUIT_TOL
        status = EXIT_OK if report["pass"] else EXIT_BUDGET
    out = _out_dir(cfg)
    path = out / f"{cfg['output']['prefix']}.json"
    write_json(path, report)
    return status, [path]


def run_qgt_point(cfg: dict, workers: int = 1, point=None) -> tuple[int, list[Path]]:
    """All schemes at a single target point, printed and written as JSON.

    ``point`` overrides the configured point, in parameter order.
    """
    family = build_family(cfg["model"])
    scan, dyn = cfg["scan"], cfg["dynamics"]
    mu, nu = _directions(scan, family)
    lam = tuple(float(x) for x in point) if point is not None else scan_grid({**scan, "points": 1}, family)[0]
    names = component_names(family, mu, nu)
    result = {"point": dict(zip(family.param_names, lam))}
    status = EXIT_OK
    for scheme in ("analytic", "scheme1", "scheme2"):
        row = qgt_scan(family, [lam], scheme, mu, nu, dyn["v"], dyn["dlam"], integrator_config(dyn))[0]
        if row.error:
            status = EXIT_NUMERIC
            result[scheme] = {"error": row.error}
        else:
            result[scheme] = {n: row.estimate[n] for n in names}
    if family.param_names == ("theta", "phi"):
        result["chern_analytic_201"] = chern_number(family, lam[1], 201).C
    for scheme in ("analytic", "scheme1", "scheme2"):
        vals = result[scheme]
        print(f"{scheme:9s} " + "  ".join(f"{k}={fmt(v)}" if not isinstance(v, str) else v for k, v in vals.items()))
    out = _out_dir(cfg)
    path = out / f"{cfg['output']['prefix']}.json"
    write_json(path, result)
    return status, [path]


COMMANDS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "circuit-check": run_circuit_check,
    "qgt": run_qgt_point,
    "chern": run_chern,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phqgt", description="QGT measurement schemes for pseudo-Hermitian two-band models")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML experiment configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--v", type=float, help="final ramp speed")
        p.add_argument("--dlam", type=float, help="ramp offset")
        p.add_argument("--ntheta", type=int, help="theta points for Chern integration")
        p.add_argument("--scheme", choices=["scheme1", "scheme2", "both", "analytic"])
        p.add_argument("--shots", type=int, help="circuit-check: sample readouts with this many shots")
        p.add_argument("--point", type=float, nargs=2, metavar=("L1", "L2"), help="qgt: target point")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args) -> dict:
    o: dict = {}
    if args.out:
        o.setdefault("output", {})["dir"] = args.out
    if args.v is not None:
        o.setdefault("dynamics", {})["v"] = args.v
    if args.dlam is not None:
        o.setdefault("dynamics", {})["dlam"] = args.dlam
    if args.ntheta is not None:
        o.setdefault("scan", {})["n_theta"] = args.ntheta
    if args.scheme:
        o["scheme"] = args.scheme
    if args.shots is not None:
        o.setdefault("circuit", {})["shots"] = args.shots
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.command, args.config, _overrides(args))
        extra = {"point": args.point} if args.command == "qgt" else {}
        status, files = COMMANDS[args.command](cfg, max(1, args.workers), **extra)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PHQGTError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for f in files:
        log.info("wrote %s", f)
    return status


if __name__ == "__main__":
    sys.exit(main())
