"""Configuration-driven command line interface.

Commands operate on a single JSON problem document and write machine-readable
results (JSON/CSV) atomically into the output directory.  Exit codes:
0 success, 1 configuration/validation error, 2 numerical or certification
failure (a violated bound, a convergence-rate verdict below the window).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import experiments
from .bloch import assemble_fiber, eigenvalues, germ_threshold_check, \
    spectral_germ
from .cell import detect_special_cases, lambda_norm_certificates, solve_cell, \
    voigt_reuss
from .errors import BlochhomError, ValidationError
from .experiments import Metric, Problem, SLOPE_WINDOW_MIN, sector_sweep, \
    sweep_many
from .field import FIELD_PRESETS, PeriodicMatrixField
from .lattice import Lattice
from .resolvent import PlaneWaveSum, ResolventKind, SpectralPoint, \
    apply_resolvent, corrector_removal_allowed
from .symbol import SYMBOL_PRESETS, DifferentialSymbol, ellipticity_bounds

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

DEFAULT_EPS_GRID = [2.0 ** (-j) for j in range(2, 8)]


def _fmt(x: float) -> str:
    """17 significant digits: exact binary64 round trip."""
    return f"{float(x):.17g}"


def _atomic_write(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: str, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _atomic_write(path, buf.getvalue())


def _matrix_to_json(mat: np.ndarray):
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.atleast_2d(mat)]


def _parse_scalar(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, str):
        return complex(float(v))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ValidationError(f"cannot parse matrix entry {v!r}")


def _parse_matrix(rows) -> np.ndarray:
    return np.array([[_parse_scalar(v) for v in row] for row in rows],
                    dtype=complex)


def _parse_number(v, name: str) -> float:
    # tolerances may arrive as decimal strings for exactness
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ValidationError(f"cannot parse {name} = {v!r}") from None


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc


def build_lattice(cfg: dict) -> Lattice:
    try:
        cols = cfg["lattice"]["basis"]
    except KeyError:
        raise ValidationError("config is missing lattice.basis") from None
    basis = np.array(cols, dtype=float).T  # config lists basis columns
    return Lattice.from_basis(basis)


def build_symbol(cfg: dict, d: int) -> DifferentialSymbol:
    sc = cfg.get("symbol")
    if sc is None:
        raise ValidationError("config is missing symbol")
    if "preset" in sc:
        name = sc["preset"]
        if name not in SYMBOL_PRESETS:
            raise ValidationError(f"unknown symbol preset {name!r}")
        return SYMBOL_PRESETS[name](d, sc.get("p", 1))
    coeffs = {tuple(int(a) for a in entry["alpha"]): _parse_matrix(entry["matrix"])
              for entry in sc["coeffs"]}
    return DifferentialSymbol.from_coefficients(int(sc["p"]), d, coeffs)


def build_field(cfg: dict, lattice: Lattice) -> PeriodicMatrixField:
    fc = cfg.get("field")
    if fc is None:
        raise ValidationError("config is missing field")
    if "preset" in fc:
        name = fc["preset"]
        if name not in FIELD_PRESETS:
            raise ValidationError(f"unknown field preset {name!r}")
        kwargs = {k: _parse_number(v, k) for k, v in fc.items() if k != "preset"}
        return FIELD_PRESETS[name](lattice, **kwargs)
    coeffs = {tuple(int(c) for c in entry["z"]): _parse_matrix(entry["matrix"])
              for entry in fc["coeffs"]}
    return PeriodicMatrixField.from_coefficients(lattice, coeffs)


def build_zeta(cfg: dict) -> SpectralPoint:
    zc = cfg.get("zeta", {})
    return SpectralPoint(modulus=_parse_number(zc.get("modulus", 1.0), "zeta.modulus"),
                         phase=_parse_number(zc.get("phase", np.pi), "zeta.phase"))


class Setup:
    """Validated problem pieces shared by all commands."""

    def __init__(self, cfg: dict, truncation_override: int | None = None):
        self.cfg = cfg
        self.problem_id = cfg.get("problem_id", "problem")
        self.lattice = build_lattice(cfg)
        self.sym = build_symbol(cfg, self.lattice.dim)
        self.field = build_field(cfg, self.lattice)
        if self.sym.m != self.field.size:
            raise ValidationError(
                f"dimension mismatch: symbol m={self.sym.m} vs field size "
                f"m={self.field.size}")
        if self.sym.d != self.lattice.dim:
            raise ValidationError(
                f"dimension mismatch: symbol d={self.sym.d} vs lattice "
                f"d={self.lattice.dim}")
        self.N = int(truncation_override or cfg.get("truncation", 16))
        if self.N < self.field.support:
            raise ValidationError(
                f"truncation N={self.N} below field support {self.field.support}")
        grids = cfg.get("grids", {})
        self.k_resolution = int(grids.get("k_resolution", 16))
        self.eps_grid = [_parse_number(e, "eps") for e in
                         grids.get("eps", DEFAULT_EPS_GRID)]
        self.phases = [_parse_number(p, "phase") for p in
                       grids.get("phases", [np.pi / 6, np.pi / 2, np.pi,
                                            3 * np.pi / 2])]
        self.moduli = [_parse_number(v, "modulus") for v in
                       grids.get("moduli", [1.0, 2.0, 4.0, 8.0])]
        tols = cfg.get("tolerances", {})
        self.cell_tol = _parse_number(tols.get("cell_tol", 1e-10), "cell_tol")
        self.zeta = build_zeta(cfg)

    def solve(self):
        return solve_cell(self.field, self.sym, self.N, tol=self.cell_tol)


def cmd_cell_solve(setup: Setup, out: str, args) -> int:
    sol = setup.solve()
    alpha0, _ = ellipticity_bounds(setup.sym)
    vr = voigt_reuss(setup.field, sol.g0)
    tag = detect_special_cases(setup.field, setup.sym, sol)
    certs = lambda_norm_certificates(sol, alpha0)
    doc = {
        "problem_id": setup.problem_id,
        "g0": _matrix_to_json(sol.g0),
        "g_over": _matrix_to_json(vr.g_over),
        "g_under": _matrix_to_json(vr.g_under),
        "residual": sol.residual,
        "norms": {
            "lambda_l2": certs.norm_l2,
            "lambda_bl2": certs.norm_bl2,
            "lambda_hp": certs.norm_hp,
            "bound_l2": certs.bound_l2,
            "bound_bl2": certs.bound_bl2,
            "bound_hp": certs.bound_hp,
        },
        "special_case": tag.value,
        "voigt_reuss_holds": vr.holds,
        "margins": [vr.lower_margin, vr.upper_margin],
    }
    _write_json(os.path.join(out, "g0.json"), doc)
    if setup.cfg.get("dump_lambda"):
        rows = []
        for z, lam in sorted(sol.lambda_coeffs.items()):
            for i in range(lam.shape[0]):
                for j in range(lam.shape[1]):
                    rows.append(list(z) + [i, j, _fmt(lam[i, j].real),
                                           _fmt(lam[i, j].imag)])
        header = [f"z{i}" for i in range(setup.lattice.dim)] + \
            ["row", "col", "re", "im"]
        _write_csv(os.path.join(out, "lambda.csv"), header, rows)
    if not args.quiet:
        print(f"g0 = {np.array2string(sol.g0, precision=8)}")
        print(f"special case: {tag.value}; Voigt-Reuss holds: {vr.holds}")
    return EXIT_OK if vr.holds else EXIT_NUMERICAL


def cmd_bands(setup: Setup, out: str, args) -> int:
    sol = setup.solve()
    grids = setup.cfg.get("grids", {})
    points = int(grids.get("band_points", 32))
    count = int(grids.get("band_count", min(6, setup.sym.n * 3)))
    theta = np.array(grids.get("theta", [1.0] + [0.0] * (setup.lattice.dim - 1)),
                     dtype=float)
    theta = theta / np.linalg.norm(theta)
    r0 = setup.lattice.packing_radius
    germ = spectral_germ(sol.g0, setup.sym, theta)
    germ_eigs = np.linalg.eigvalsh(germ)
    rows = []
    for t in np.linspace(0.0, 0.95 * r0, points):
        k = t * theta
        fib = assemble_fiber(setup.field, setup.sym, k, setup.N)
        evs = eigenvalues(fib, count)
        pred = germ_eigs * t ** (2 * setup.sym.p)
        rows.append([_fmt(t)] + [_fmt(c) for c in k] + [_fmt(e) for e in evs]
                    + [_fmt(g) for g in pred])
    header = (["t"] + [f"k{i}" for i in range(setup.lattice.dim)]
              + [f"E{j + 1}" for j in range(count)]
              + [f"germ{j + 1}" for j in range(setup.sym.n)])
    _write_csv(os.path.join(out, "bands.csv"), header, rows)
    if not args.quiet:
        print(f"bands.csv: {points} points along theta = {theta}")
    return EXIT_OK


def cmd_germ_check(setup: Setup, out: str, args) -> int:
    sol = setup.solve()
    alpha0, _ = ellipticity_bounds(setup.sym)
    _, norm_ginv, _ = setup.field.bounds()
    c_star = alpha0 / norm_ginv
    r0 = setup.lattice.packing_radius
    grids = setup.cfg.get("grids", {})
    theta = np.array(grids.get("theta", [1.0] + [0.0] * (setup.lattice.dim - 1)),
                     dtype=float)
    theta = theta / np.linalg.norm(theta)
    t_list = [_parse_number(t, "t") * r0 for t in
              grids.get("t_fractions", [0.1, 0.05, 0.025])]
    report = germ_threshold_check(setup.field, setup.sym, theta, t_list,
                                  setup.N, g0=sol.g0)
    # germ nondegeneracy over a theta grid
    from .symbol import sphere_samples
    germ_min = np.inf
    for th in sphere_samples(setup.lattice.dim, 64):
        S = spectral_germ(sol.g0, setup.sym, th, c_star=c_star)
        germ_min = min(germ_min, float(np.linalg.eigvalsh(S)[0]))
    doc = {
        "problem_id": setup.problem_id,
        "theta": list(map(float, report.theta)),
        "t_list": list(report.t_list),
        "germ_eigenvalues": [float(g) for g in report.germ_eigs],
        "ratios": [[float(v) for v in row] for row in report.ratios],
        "fit_order": report.fit_order,
        "fit_constant": report.fit_constant,
        "exact": report.exact,
        "germ_min_eigenvalue": germ_min,
        "c_star": c_star,
    }
    _write_json(os.path.join(out, "germ.json"), doc)
    ok = report.exact or (report.fit_order is not None
                          and report.fit_order >= SLOPE_WINDOW_MIN)
    if not args.quiet:
        print(f"germ check: order = {report.fit_order}, exact = {report.exact}, "
              f"min germ eig = {germ_min:.6g} >= c* = {c_star:.6g}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_solve(setup: Setup, out: str, args) -> int:
    waves_cfg = setup.cfg.get("waves")
    if not waves_cfg:
        raise ValidationError("config is missing waves for the solve command")
    terms = []
    for entry in waves_cfg:
        freq = np.array(entry["frequency"], dtype=float)
        amp = np.array([_parse_scalar(v) for v in entry["amplitude"]],
                       dtype=complex)
        if len(amp) != setup.sym.n:
            raise ValidationError(
                f"wave amplitude length {len(amp)} must equal n={setup.sym.n}")
        terms.append((freq, amp))
    waves = PlaneWaveSum.from_terms(terms)
    eps = _parse_number(setup.cfg.get("eps", 0.125), "eps")
    kind = ResolventKind[setup.cfg.get("kind", "FULL")]
    sol = setup.solve()
    result = apply_resolvent(kind, waves, setup.zeta, eps, setup.field,
                             setup.sym, sol.g0, setup.N)
    doc = {
        "problem_id": setup.problem_id,
        "kind": kind.value,
        "eps": eps,
        "zeta": {"modulus": setup.zeta.modulus, "phase": setup.zeta.phase},
        "terms": [{
            "frequency": [float(c) for c in f],
            "amplitude": [[float(a.real), float(a.imag)] for a in amp],
        } for f, amp in result.terms],
    }
    _write_json(os.path.join(out, "solve.json"), doc)
    if not args.quiet:
        print(f"solve: {len(result.terms)} output waves")
    return EXIT_OK


def cmd_verify(setup: Setup, out: str, args) -> int:
    sol = setup.solve()
    tag = detect_special_cases(setup.field, setup.sym, sol)
    problem = Problem(problem_id=setup.problem_id, field=setup.field,
                      sym=setup.sym, sol=sol, N=setup.N)
    names = setup.cfg.get("metrics", ["RESOLVENT", "ENERGY", "FLUX"])
    metrics = [Metric[name] for name in names]
    removal_ok = corrector_removal_allowed(setup.sym.p, setup.lattice.dim, tag)
    if Metric.NO_SMOOTHING in metrics and not removal_ok:
        metrics = [mt for mt in metrics if mt is not Metric.NO_SMOOTHING]
    sweeps = sweep_many(metrics, problem, setup.zeta, setup.eps_grid,
                        setup.k_resolution, jobs=args.jobs)
    verdict = {"problem_id": setup.problem_id, "seed": setup.cfg.get("seed", 0),
               "metrics": {}, "overall_pass": True}
    for metric, sw in sweeps.items():
        rows = [[metric.value, _fmt(e), _fmt(setup.zeta.phase),
                 _fmt(setup.zeta.modulus), _fmt(v),
                 _fmt(sector_envelope(setup.zeta, setup.sym.p, metric, e))]
                for e, v in zip(sw.eps_grid, sw.values)]
        _write_csv(os.path.join(out, f"sweep_{metric.value.lower()}.csv"),
                   ["metric", "eps", "phase", "modulus", "value",
                    "bound_envelope"], rows)
        verdict["metrics"][metric.value] = {
            "slope": sw.slope,
            "stderr": sw.slope_stderr,
            "exact": sw.exact,
            "pass": sw.passes,
        }
        verdict["overall_pass"] = verdict["overall_pass"] and sw.passes
        if not args.quiet:
            label = "EXACT" if sw.exact else f"slope {sw.slope:.3f}"
            print(f"{metric.value}: {label} -> "
                  f"{'pass' if sw.passes else 'FAIL'}")
    if Metric.NO_SMOOTHING in [Metric[name] for name in names] and not removal_ok:
        verdict["metrics"]["NO_SMOOTHING"] = {"slope": None, "stderr": None,
                                              "exact": False, "pass": None,
                                              "note": "unknown: corrector "
                                              "removal conditions not met"}
    _write_json(os.path.join(out, "verdict.json"), verdict)
    return EXIT_OK if verdict["overall_pass"] else EXIT_NUMERICAL


def sector_envelope(zeta: SpectralPoint, p: int, metric: Metric,
                    eps: float) -> float:
    from .resolvent import sector_constant
    power = (1.0 / (2 * p) - 1.0 if metric is Metric.RESOLVENT
             else 1.0 / (2 * p) - 0.5)
    return sector_constant(zeta.phase) ** 2 * eps * zeta.modulus ** power


def cmd_report(out: str, args) -> int:
    path = os.path.join(out, "verdict.json")
    if not os.path.exists(path):
        raise ValidationError(f"no verdict.json under {out}; run verify first")
    with open(path) as fh:
        verdict = json.load(fh)
    print(f"problem: {verdict.get('problem_id')}")
    for name, entry in sorted(verdict.get("metrics", {}).items()):
        if entry.get("pass") is None:
            print(f"  {name:12s} {entry.get('note', 'skipped')}")
        elif entry.get("exact"):
            print(f"  {name:12s} EXACT -> pass")
        else:
            slope = entry.get("slope")
            print(f"  {name:12s} slope {slope:.3f} -> "
                  f"{'pass' if entry['pass'] else 'FAIL'}")
    ok = verdict.get("overall_pass", False)
    print(f"overall: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERICAL


COMMANDS = {"cell-solve", "bands", "germ-check", "solve", "verify", "report"}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="blochhom",
        description="Cell problems, band structure, and resolvent-error "
                    "verification for periodic high-order elliptic operators.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="problem JSON document")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--truncation", type=int, default=None,
                        help="override the configured truncation order")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        os.makedirs(args.out, exist_ok=True)
        if args.command == "report":
            return cmd_report(args.out, args)
        if not args.config:
            raise ValidationError("--config is required for this command")
        setup = Setup(load_config(args.config), args.truncation)
        handler = {
            "cell-solve": cmd_cell_solve,
            "bands": cmd_bands,
            "germ-check": cmd_germ_check,
            "solve": cmd_solve,
            "verify": cmd_verify,
        }[args.command]
        return handler(setup, args.out, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlochhomError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
