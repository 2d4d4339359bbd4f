"""Command-line entry point: ``surfids <command> --config run.toml``.

Outputs go to ``<out>/<digest>/{curves,reports,fits}`` with a
``manifest.txt`` echoing the resolved configuration.  Exit codes: 0 pass,
1 study failure, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import analysis, config, counting, disorder, hamiltonians, magnetic
from .errors import (
    AboveEssentialFloor,
    BadParameters,
    BudgetExceeded,
    ConfigInvalid,
    FactorizationBreakdown,
    HaloTooSmall,
    HypothesisViolated,
    NoBoundState,
    SolverFailure,
    SurfIDSError,
)

EXIT_OK, EXIT_STUDY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = ("free-ids", "transverse-gap", "idss", "reduced-ids", "sandwich", "lifshits-fit",
            "selftest")


class WallClockExceeded(SurfIDSError):
    pass


# --- building objects from a config ----------------------------------------

def field_matrix(cfg) -> np.ndarray:
    m = cfg["model"]
    if m["B"] is not None:
        return np.asarray(m["B"], dtype=float)
    return magnetic.canonical_matrix(m["b"], m["n"])


def parallel_spectrum(cfg) -> hamiltonians.ParallelSpectrum:
    p = cfg["model.parallel"]
    kind = p["kind"]
    if kind == "levels":
        floor = math.inf if p["essential_floor"] is None else p["essential_floor"]
        model = hamiltonians.ExplicitLevels(tuple(p["levels"]), floor)
        return hamiltonians.solve_parallel(model, None, p["count"])
    model = {
        "delta": lambda: hamiltonians.DeltaWell(p["alpha"]),
        "harmonic": lambda: hamiltonians.harmonic(p["omega"]),
        "poschl_teller": lambda: hamiltonians.poschl_teller(p["s"]),
        "square_well": lambda: hamiltonians.square_well(p["depth"], p["half_width"]),
    }[kind]()
    grid = hamiltonians.LatticeWindow(1, 2 * p["Y"], p["hy"])
    return hamiltonians.solve_parallel(model, grid, p["count"])


def profile(cfg):
    pr = cfg["model.profile"]
    if pr is None:
        return None
    lon = None
    if pr["longitudinal"] != "constant":
        lon = disorder.LongitudinalFactor(pr["longitudinal"], pr["width"], pr["center"])
    if pr["kind"] == "compact":
        return disorder.compact_profile(pr["side"], pr["amplitude"], lon)
    if pr["kind"] == "gaussian":
        return disorder.gaussian_profile(pr["rate"], pr["beta"], pr["amplitude"], lon)
    return disorder.power_law_profile(pr["kappa"], pr["amplitude"], lon)


def coupling(cfg) -> disorder.CouplingLaw:
    c = cfg["model.coupling"]
    if c is None:
        return disorder.CouplingLaw()
    return disorder.CouplingLaw(c["law"], c["E0"], c["kappa"])


def surface_model(cfg) -> counting.SurfaceModel:
    num = cfg["numerics"]
    return counting.SurfaceModel(
        B=field_matrix(cfg), parallel=parallel_spectrum(cfg), h=num["h"], profile=profile(cfg),
        law=coupling(cfg), shift=cfg["model"]["shift"], halo=num["halo"],
        tail_tol=num["tail_tol"], dense_cap=num["dense_cap"], max_dim=num["max_dim"])


# --- output -------------------------------------------------------------------

class Output:
    def __init__(self, root, cfg, command, fmt):
        self.dir = os.path.join(root, config.digest(cfg))
        self.fmt = fmt
        self.written = []
        counting.write_atomic(os.path.join(self.dir, "manifest.txt"),
                              config.manifest_text(cfg, command, fmt))

    def table(self, sub, name, header, rows):
        """Write rows of numbers/strings as CSV or JSON."""
        if self.fmt == "json":
            text = json.dumps([dict(zip(header, r)) for r in rows], indent=1) + "\n"
            path = os.path.join(self.dir, sub, name + ".json")
        else:
            def cell(x):
                if isinstance(x, (float, np.floating)):
                    return repr(float(x))
                if isinstance(x, (bool, np.bool_)):
                    return str(int(x))
                return str(x)
            text = ",".join(header) + "\n" + "".join(",".join(cell(x) for x in r) + "\n" for r in rows)
            path = os.path.join(self.dir, sub, name + ".csv")
        counting.write_atomic(path, text)
        self.written.append(path)
        return path

    def text(self, sub, name, text):
        path = os.path.join(self.dir, sub, name)
        counting.write_atomic(path, text)
        self.written.append(path)
        return path

    def curve(self, name, curve: counting.EmpiricalCurve):
        rows = [(float(e), float(v), float(s), curve.n_real, float(curve.L), float(curve.h),
                 int(curve.seed0)) for e, v, s in zip(curve.energies, curve.values, curve.std_err)]
        self.text("curves", name + ".dat", curve.plot_data())
        return self.table("curves", name, ["E", "value", "std_err", "n_real", "L", "h", "seed0"], rows)

    def sandwich(self, name, rep: analysis.SandwichReport):
        rows = [tuple(float(x) for x in r[:-1]) + (bool(r[-1]),) for r in
                zip(rep.energies, rep.lower, rep.target, rep.upper, rep.tolerance, rep.slack,
                    rep.passes)]
        self.table("reports", name, ["E", "lower", "target", "upper", "tolerance", "slack", "pass"],
                   rows)
        self.text("reports", name + ".txt", rep.summary())
        for part in ("lower", "target", "upper"):
            vals = getattr(rep, part)
            self.text("reports", f"{name}_{part}.dat",
                      "".join(f"{float(e)!r} {float(v)!r}\n" for e, v in zip(rep.energies, vals)))


def _fmt_tag(L):
    return repr(float(L)).replace(".", "p")


class Guard:
    def __init__(self, seconds):
        self.seconds = seconds
        self.start = time.monotonic()

    def check(self):
        if self.seconds is not None and time.monotonic() - self.start > self.seconds:
            raise WallClockExceeded(f"run exceeded max_seconds = {self.seconds}")


def _energies(cfg):
    if cfg["numerics"]["energies"] is None:
        raise ConfigInvalid(["numerics.energies: required for this command"])
    return config.energy_grid(cfg["numerics"]["energies"])


def _lambdas(cfg):
    st = cfg["study"]
    if st["lambdas"] is None:
        raise ConfigInvalid(["study.lambdas: required for this command"])
    return config.energy_grid(st["lambdas"])


# --- commands -------------------------------------------------------------------

def cmd_free_ids(cfg, out, guard, threads):
    B = field_matrix(cfg)
    ms = magnetic.canonicalize_field(B)
    E = _energies(cfg)
    rows = [(float(e), magnetic.free_ids(ms, e)) for e in E]
    header = ["E", "N0"]
    if cfg["model.parallel"] is not None:
        rho = parallel_spectrum(cfg).counting_measure()
        ok = E < rho.limit
        rows = [r + (magnetic.convolve_with_counting(ms, rho, r[0]) if k else "",)
                for r, k in zip(rows, ok)]
        header.append("N0_conv_rho")
    out.table("curves", "free_ids", header, rows)
    if ms.m:
        lad = magnetic.landau_ladder(ms, float(E.max()) if E.size else 0.0)
        out.table("reports", "landau_ladder", ["level", "multiplicity"], list(lad.levels))
    return True


def cmd_transverse_gap(cfg, out, guard, threads):
    B = field_matrix(cfg)
    num = cfg["numerics"]
    rows = []
    for L in num["L"]:
        w = hamiltonians.LatticeWindow(B.shape[0], L, num["h"])
        op = hamiltonians.build_transverse(w, B, cfg["model"]["shift"])
        Z = hamiltonians.ground_energy(op, num["dense_cap"])
        rows.append((float(L), Z, math.log(Z) / L**2 if Z > 0 else float("nan")))
        guard.check()
    out.table("curves", "transverse_gap", ["L", "Z", "lnZ_over_L2"], rows)
    return True


def cmd_idss(cfg, out, guard, threads):
    model = surface_model(cfg)
    num = cfg["numerics"]
    E = _energies(cfg)
    for L in num["L"]:
        curve, st = counting.idss_estimate(model, L, E, num["n_realizations"], num["seed"], threads)
        tag = _fmt_tag(L)
        out.curve(f"idss_L{tag}", curve)
        out.table("reports", f"idss_L{tag}_stats", ["E", "mean", "std", "min", "max", "n_real"],
                  [(float(e), float(a), float(b), float(c), float(d), st.n_real)
                   for e, a, b, c, d in zip(E, st.mean, st.std, st.minimum, st.maximum)])
        guard.check()
    if len(num["L"]) > 1:
        tab = counting.convergence_study(model, num["L"], E, num["n_realizations"], num["seed"],
                                         threads)
        out.text("reports", "convergence.csv", tab.to_csv())
    return True


def _edge_params(cfg, model, L):
    st = cfg["study"]
    par = model.parallel
    j = st["j"]
    if st["lambda_star"] is None:
        raise ConfigInvalid(["study.lambda_star: required for this command"])
    M = model.sup_bound(L)
    if j == 1:
        E1 = float(par.energies[0])
        E2 = float(par.energies[1]) if len(par) > 1 else float(par.complete_below)
        d = analysis.ground_edge_parameters(M, E1, E2, st["lambda_star"], st["delta"])
        return {"scales": {"1-delta": 1 - d, "1": 1.0}}
    E_prev, Ej = float(par.energies[j - 2]), float(par.energies[j - 1])
    E_next = float(par.energies[j]) if j < len(par) else float(par.complete_below)
    dm, dp = analysis.internal_edge_parameters(M, E_prev, Ej, E_next, st["lambda_star"],
                                               st["delta_minus"], st["delta_plus"])
    return {"scales": {"1-delta_plus": 1 - dp, "1": 1.0, "1+delta_minus": 1 + dm}}


def cmd_reduced_ids(cfg, out, guard, threads):
    model = surface_model(cfg)
    num = cfg["numerics"]
    lam = _lambdas(cfg)
    j = cfg["study"]["j"]
    for L in num["L"]:
        scales = _edge_params(cfg, model, L)["scales"]
        for name, c in scales.items():
            curve, _ = counting.reduced_ids_estimate(model, L, lam, num["n_realizations"],
                                                     num["seed"], j, c, threads)
            out.curve(f"reduced_j{j}_{name}_L{_fmt_tag(L)}", curve)
            guard.check()
    return True


def cmd_sandwich(cfg, out, guard, threads):
    model = surface_model(cfg)
    num, st = cfg["numerics"], cfg["study"]
    ok = True
    for L in num["L"]:
        tag = _fmt_tag(L)
        for check in st["checks"]:
            if check == "global":
                rep, curve = analysis.global_study(model, L, _energies(cfg), num["n_realizations"],
                                                   num["seed"], st["stat_tol"], st["abs_tol"],
                                                   threads)
                out.sandwich(f"global_L{tag}", rep)
                ok &= rep.passed
            elif check == "finite":
                rep = analysis.finite_sandwich_check(model, L, _energies(cfg),
                                                     num["n_realizations"], num["seed"])
                out.table("reports", f"finite_L{tag}", ["E", "M", "violations"],
                          [(float(e), rep.M, int(np.count_nonzero(
                              (rep.counts[:, i] < rep.lower[:, i]) | (rep.counts[:, i] > rep.upper[:, i]))))
                           for i, e in enumerate(rep.energies)])
                ok &= rep.passed
            elif check == "ground":
                if st["lambda_star"] is None:
                    raise ConfigInvalid(["study.lambda_star: required for the ground check"])
                rep, proj = analysis.ground_edge_study(
                    model, L, _lambdas(cfg), st["lambda_star"], num["n_realizations"],
                    num["seed"], st["delta"], st["stat_tol"], st["abs_tol"], threads)
                out.sandwich(f"ground_L{tag}", rep)
                out.table("reports", f"projection_L{tag}", ["lambda", "violations"],
                          [(float(x), int(np.count_nonzero(proj.full[:, i] < proj.projected[:, i])))
                           for i, x in enumerate(proj.lambdas)])
                ok &= rep.passed and proj.passed
            elif check == "internal":
                if st["lambda_star"] is None:
                    raise ConfigInvalid(["study.lambda_star: required for the internal check"])
                rep = analysis.internal_edge_study(
                    model, L, st["j"], _lambdas(cfg), st["lambda_star"], num["n_realizations"],
                    num["seed"], st["delta_minus"], st["delta_plus"], st["stat_tol"],
                    st["abs_tol"], threads)
                out.sandwich(f"internal_L{tag}", rep)
                ok &= rep.passed
            elif check == "plateau":
                rep = analysis.plateau_check(model, L, st["j"], num["n_realizations"], num["seed"],
                                             rel_tol=st["plateau_tol"], threads=threads)
                out.text("reports", f"plateau_L{tag}.txt", rep.summary())
                ok &= rep.passed
            guard.check()
    return ok


def _fit_defaults(curve_path):
    fit = {k: d for k, (_, d, _) in config.SCHEMA["fit"].items()}
    fit["curve"] = curve_path
    return fit


def cmd_lifshits_fit(cfg, out, guard, threads, curve_path=None):
    fit = cfg["fit"]
    if fit is None and curve_path is None:
        raise ConfigInvalid(["fit: section required (or pass --curve)"])
    fit = fit or _fit_defaults(curve_path)
    if curve_path is not None:
        fit = dict(fit, curve=curve_path, synthetic=None)
    if fit["curve"] is not None:
        c = counting.EmpiricalCurve.read_csv(fit["curve"])
        lam = c.energies - fit["edge"]
        y = c.values - fit["baseline"]
        asymptotic = False
    else:
        lam = _lambdas(cfg)
        p, cc = fit["exponent"], fit["c"]
        base = lam if fit["synthetic"] == "power" else np.abs(np.log(lam))
        y = np.exp(-cc * base ** p)
        asymptotic = True
    window = tuple(fit["window"]) if fit["window"] else None
    res = analysis.fit_lifshits(lam, y, fit["axis"], window, asymptotic=asymptotic)
    out.table("fits", "lifshits", ["lambda", "x", "z", "used"],
              [(float(a), float(b), float(c_), bool(u))
               for a, b, c_, u in zip(res.lambdas, res.abscissa, res.ordinate, res.used)])
    out.table("fits", "lifshits_slope", ["slope", "ci_lo", "ci_hi", "stderr", "n_used", "axis"],
              [(res.slope, res.ci[0], res.ci[1], res.stderr, int(res.used.sum()), res.axis)])
    out.text("fits", "lifshits.txt", res.summary())
    out.text("fits", "lifshits.dat", "".join(f"{float(x)!r} {float(z)!r}\n"
                                              for x, z, u in zip(res.abscissa, res.ordinate, res.used) if u))
    return True


HANDLERS = {
    "free-ids": cmd_free_ids,
    "transverse-gap": cmd_transverse_gap,
    "idss": cmd_idss,
    "reduced-ids": cmd_reduced_ids,
    "sandwich": cmd_sandwich,
    "lifshits-fit": cmd_lifshits_fit,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="surfids", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML experiment file")
        p.add_argument("--seed", type=int, help="base seed (overrides the config)")
        p.add_argument("--out", default="out", help="output root directory")
        p.add_argument("--threads", type=int, help="worker threads")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if name == "lifshits-fit":
            p.add_argument("--curve", help="EmpiricalCurve CSV to fit instead of [fit].curve")
    return ap


def _err(msg):
    print(msg, file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        from .selftest import run_selftest

        report, ok = run_selftest()
        if args.config or args.seed is not None:
            _err("selftest ignores --config and --seed")
        path = os.path.join(args.out, "selftest", "report.txt")
        counting.write_atomic(path, report)
        sys.stdout.write(report)
        return EXIT_OK if ok else EXIT_STUDY
    try:
        if args.config is None:
            if args.command == "lifshits-fit" and args.curve:
                cfg = {"fit": _fit_defaults(args.curve),
                       "numerics": {"threads": 1, "max_seconds": None}}
            else:
                raise ConfigInvalid(["--config: required"])
        else:
            cfg = config.load_config(args.config, args.seed)
        threads = args.threads or cfg["numerics"]["threads"]
        if threads < 1:
            raise ConfigInvalid(["--threads: must be >= 1"])
        guard = Guard(cfg["numerics"]["max_seconds"])
        out = Output(args.out, cfg, args.command, args.format)
        handler = HANDLERS[args.command]
        if args.command == "lifshits-fit":
            ok = handler(cfg, out, guard, threads, getattr(args, "curve", None))
        else:
            ok = handler(cfg, out, guard, threads)
    except (ConfigInvalid, BadParameters, HypothesisViolated, AboveEssentialFloor,
            NoBoundState) as exc:
        _err(f"configuration error: {exc}")
        adm = getattr(exc, "admissible", None)
        if adm:
            for k, (lo, hi) in adm.items():
                _err(f"  admissible {k}: ({lo!r}, {hi!r})")
        return EXIT_CONFIG
    except (SolverFailure, FactorizationBreakdown, BudgetExceeded, HaloTooSmall,
            WallClockExceeded, SurfIDSError) as exc:
        _err(f"numeric failure: {exc}")
        return EXIT_NUMERIC
    if not ok:
        _err(f"study failed; see {os.path.join(out.dir, 'reports')}")
        return EXIT_STUDY
    print(out.dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
