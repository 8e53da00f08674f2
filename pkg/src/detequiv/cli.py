"""Command-line front end.

Exit status: 0 on success, 2 on invalid input, 3 when a numerical iteration
does not converge.  Every result goes to a file (or standard output when no
path is given); diagnostics are a single line on standard error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, closedform, equivalent, master, schwinger
from .equivalent import RadialMeasure, measure_for_profile, sinkhorn_limit
from .master import ConvergenceError, admissibility_scan, solve_master, solve_regularized
from .montecarlo import kernels
from .montecarlo.empirical import EIGEN_CAP, SVD_CAP, compare, sample_spectrum
from .montecarlo.sampling import LAWS
from .output import csv_text, dumps, write_text
from .profile import ProfileError, analyze_graph, load_profile, normalize
from .schwinger import SDConvergenceError, solve_sd

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3


class InvalidInput(ValueError):
    pass


def numeric_defaults() -> dict:
    """Every default tolerance and cap that can influence numerical output."""
    sched = master.ContinuationSchedule()
    return {
        "master.tol": master.TOL,
        "master.max_iter": master.MAX_ITER,
        "master.edge_tol": master.EDGE_TOL,
        "master.trivial_qmax": master.TRIVIAL_QMAX,
        "master.err_tol": master.ERR_TOL,
        "master.stall_window": master.STALL_WINDOW,
        "master.osc_run": master.OSC_RUN,
        "master.schedule": [sched.t0, sched.factor, sched.t_min, sched.q_change,
                            sched.stage_tol, sched.stage_budget],
        "equivalent.grid_points": equivalent.GRID_POINTS,
        "equivalent.chunk": equivalent.CHUNK,
        "equivalent.atom_fractions": list(equivalent.ATOM_FRACTIONS),
        "equivalent.sinkhorn_tol": equivalent.SINKHORN_TOL,
        "schwinger.tol": schwinger.TOL,
        "schwinger.max_iter": schwinger.MAX_ITER,
        "schwinger.stall_window": schwinger.STALL_WINDOW,
        "schwinger.wegner_floor": schwinger.WEGNER_FLOOR,
        "closedform.u_tol": closedform.U_TOL,
        "kernels.jacobi_tol": kernels.JACOBI_TOL,
        "kernels.jacobi_max_sweeps": kernels.JACOBI_MAX_SWEEPS,
        "kernels.qr_sweeps_per_n": kernels.QR_SWEEPS_PER_N,
        "montecarlo.eigen_cap": EIGEN_CAP,
        "montecarlo.svd_cap": SVD_CAP,
    }


def defaults_fingerprint() -> str:
    text = json.dumps(numeric_defaults(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# argument handling

def _positive(kind):
    def conv(text):
        try:
            val = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return val
    return conv


def _unit_interval(text):
    val = float(text)
    if not 0 < val < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1): {text!r}")
    return val


def _nonneg_float(text):
    val = float(text)
    if not val >= 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text!r}")
    return val


def _float_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors are a single line on standard error."""

    def error(self, message):
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="detequiv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version",
                    version=f"detequiv {__version__} (numeric defaults {defaults_fingerprint()})")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, profile=True):
        p.add_argument("--config", help="JSON file whose keys are option names of this command")
        if profile:
            p.add_argument("--profile", default="constant",
                           help="kind name, inline JSON, or a .json/.csv file")
            p.add_argument("--n", type=_positive(int), help="dimension (for kind names)")
        p.add_argument("--out", help="output path (standard output when omitted)")
        p.add_argument("--threads", type=_positive(int), default=1, help="worker threads")

    p = sub.add_parser("solve", help="master (or regularized, with --t) equations at one radius")
    common(p)
    p.add_argument("--s", type=_positive(float), help="radius |z| (required)")
    p.add_argument("--t", type=_positive(float), help="regularization; omit for t -> 0")
    p.add_argument("--tol", type=_positive(float), default=master.TOL)
    p.add_argument("--max-iter", type=_positive(int), default=master.MAX_ITER)

    p = sub.add_parser("density", help="radial CDF and density on a grid (CSV s,F,phi + JSON sidecar)")
    common(p)
    p.add_argument("--points", type=_positive(int), default=equivalent.GRID_POINTS)
    p.add_argument("--sidecar", help="JSON sidecar path (default: <out>.json)")

    p = sub.add_parser("sample", help="sample Y and dump eigenvalues and singular values")
    common(p)
    p.add_argument("--law", choices=sorted(LAWS), default="complex-gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=_positive(int), default=1, help="seeds seed, seed+1, ...")
    p.add_argument("--z", type=float, nargs=2, default=[0.0, 0.0], metavar=("RE", "IM"),
                   help="shift for the singular values of Y - z")
    p.add_argument("--sv-out", help="singular values CSV (default: <out>.sv.csv)")
    p.add_argument("--no-eigenvalues", action="store_true")

    p = sub.add_parser("compare", help="compare a density or SD result with sampled spectra")
    common(p, profile=False)
    p.add_argument("--measure", help="CSV from 'density' (its JSON sidecar is read too)")
    p.add_argument("--eigenvalues", help="eigenvalue CSV from 'sample'")
    p.add_argument("--sd", help="JSON from 'sd'")
    p.add_argument("--singular-values", help="singular-value CSV from 'sample'")

    p = sub.add_parser("check-profile", help="graph structure and admissibility scan")
    common(p)
    p.add_argument("--sigma0", type=_positive(float), default=None,
                   help="threshold (default: smallest positive sigma_ij)")
    p.add_argument("--delta", type=_unit_interval, default=0.1)
    p.add_argument("--kappa", type=_unit_interval, default=0.1)
    p.add_argument("--budget", type=_positive(int), default=2 ** 12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s", type=_positive(float), default=None, help="radius for the admissibility scan")
    p.add_argument("--t-grid", type=_float_list, default=[1.0, 0.1, 0.01, 1e-3, 1e-4])

    p = sub.add_parser("sd", help="Schwinger-Dyson solution at (|z|, eta)")
    common(p)
    p.add_argument("--z-abs", type=_nonneg_float, default=0.0)
    p.add_argument("--eta", type=float, nargs=2, default=[0.0, 1.0], metavar=("RE", "IM"))
    p.add_argument("--tol", type=_positive(float), default=schwinger.TOL)
    p.add_argument("--max-iter", type=_positive(int), default=schwinger.MAX_ITER)
    p.add_argument("--components", action="store_true", help="include p and ptilde")
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = ap.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    cfg = json.loads(Path(args.config).read_text())
    if not isinstance(cfg, dict):
        raise InvalidInput("config must be a JSON object")
    subparser = ap._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    actions = {a.dest: a for a in subparser._actions if a.option_strings}  # noqa: SLF001
    unknown = sorted(set(k.replace("-", "_") for k in cfg) - set(actions) - {"config", "help"})
    if unknown:
        raise InvalidInput(f"unknown config keys: {unknown}")
    # config entries become option tokens right after the command, so they go
    # through the same validation and explicit flags still take precedence
    tokens: list[str] = []
    for key, val in cfg.items():
        act = actions[key.replace("-", "_")]
        opt = act.option_strings[-1]
        if isinstance(act, argparse._StoreTrueAction):  # noqa: SLF001
            if val:
                tokens.append(opt)
        elif isinstance(val, dict):
            tokens += [opt, json.dumps(val)]
        elif isinstance(val, (list, tuple)):
            if act.nargs is None:
                tokens += [opt, ",".join(str(x) for x in val)]
            else:
                tokens += [opt, *(str(x) for x in val)]
        else:
            tokens += [opt, str(val)]
    argv = list(argv)
    at = argv.index(args.command) + 1
    return ap.parse_args(argv[:at] + tokens + argv[at:])


# ---------------------------------------------------------------------------
# commands

def _emit(path: Optional[str], text: str) -> None:
    if path:
        write_text(path, text)
    else:
        sys.stdout.write(text)


def _profile(args):
    return load_profile(args.profile, n=args.n)


def cmd_solve(args) -> int:
    if args.s is None:
        raise InvalidInput("solve needs --s")
    p = _profile(args)
    v = normalize(p)
    if args.t is not None:
        sol = solve_regularized(v, args.s, args.t, tol=args.tol, max_iter=args.max_iter)
        _emit(args.out, dumps(sol.to_dict()))
        return EXIT_OK
    sol = solve_master(v, args.s, tol=args.tol, max_iter=args.max_iter)
    rec = sol.to_dict()
    rec["F"] = equivalent.radial_cdf(v, sol)
    rec["rho"] = v.rho
    _emit(args.out, dumps({**rec, "ok": sol.converged}))
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def cmd_density(args) -> int:
    p = _profile(args)
    m = measure_for_profile(p, n_points=args.points, threads=args.threads)
    rows = zip(m.s_grid, m.F, m.phi)
    _emit(args.out, csv_text(["s", "F", "phi"], rows))
    side = m.to_dict()
    v = normalize(p)
    side["phi0"] = sinkhorn_limit(v).phi0 if np.all(v.v > 0) else None
    inner = (m.s_grid > 0.05 * m.rho_sqrt) & (m.s_grid < 0.95 * m.rho_sqrt)
    side["phi_fd_max_gap"] = (float(np.max(np.abs(m.phi - m.phi_fd)[inner]))
                              if m.phi_fd is not None and inner.any() else None)
    sidecar = args.sidecar or (args.out + ".json" if args.out else None)
    text = dumps({**side, "ok": m.converged})
    if sidecar:
        write_text(sidecar, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if m.converged else EXIT_NONCONVERGED


def cmd_sample(args) -> int:
    p = _profile(args)
    if not args.no_eigenvalues and p.n > EIGEN_CAP:
        raise InvalidInput(f"n={p.n} exceeds the eigenvalue cap {EIGEN_CAP}")
    if p.n > SVD_CAP:
        raise InvalidInput(f"n={p.n} exceeds the singular-value cap {SVD_CAP}")
    z = complex(*args.z)
    seeds = [args.seed + k for k in range(args.trials)]

    def run(seed):
        return sample_spectrum(p, args.law, seed, z, with_eigenvalues=not args.no_eigenvalues)

    if args.threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            samples = list(pool.map(run, seeds))
    else:
        samples = [run(s) for s in seeds]
    sv_rows = [[smp.seed, x] for smp in samples for x in smp.singular_values]
    sv_text = csv_text(["seed", "s"], sv_rows)
    if args.no_eigenvalues:
        _emit(args.sv_out or args.out, sv_text)
        return EXIT_OK
    rows = [[smp.seed, e.real, e.imag] for smp in samples for e in smp.eigenvalues]
    _emit(args.out, csv_text(["seed", "re", "im"], rows))
    sv_path = args.sv_out or (args.out + ".sv.csv" if args.out else None)
    if sv_path:
        write_text(sv_path, sv_text)
    return EXIT_OK


def _read_csv(path: str) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]], dtype=float)
    return header, data.reshape(len(lines) - 1, len(header))


def _read_measure(path: str) -> RadialMeasure:
    header, data = _read_csv(path)
    if header != ["s", "F", "phi"]:
        raise InvalidInput(f"{path} is not a density CSV")
    side_path = Path(path + ".json")
    side = json.loads(side_path.read_text()) if side_path.exists() else {}
    atom = side.get("atom0", float(data[0, 1]))
    rs = side.get("rho_sqrt", float(data[-1, 0]))
    return RadialMeasure(data[:, 0], data[:, 1], data[:, 2], float(atom), float(rs))


def cmd_compare(args) -> int:
    if args.measure and args.eigenvalues:
        meas = _read_measure(args.measure)
        header, data = _read_csv(args.eigenvalues)
        if header != ["seed", "re", "im"]:
            raise InvalidInput(f"{args.eigenvalues} is not an eigenvalue CSV")
        rep = compare(meas, data[:, 1] + 1j * data[:, 2])
    elif args.sd and args.singular_values:
        rec = json.loads(Path(args.sd).read_text())
        header, data = _read_csv(args.singular_values)
        if header != ["seed", "s"]:
            raise InvalidInput(f"{args.singular_values} is not a singular-value CSV")
        g = complex(*rec["g"])
        sd = schwinger.SDSolution(rec["z_abs"], complex(*rec["eta"]), np.array([g]), np.array([g]),
                                  g, rec.get("iterations", 0), rec.get("residual", 0.0))
        rep = compare(sd, data[:, 1])
    else:
        raise InvalidInput("compare needs --measure with --eigenvalues, or --sd with --singular-values")
    _emit(args.out, dumps(rep.to_dict()))
    return EXIT_OK


def cmd_check_profile(args) -> int:
    p = _profile(args)
    sigma = p.sigma
    sigma0 = args.sigma0
    if sigma0 is None:
        pos = sigma[sigma > 0]
        sigma0 = float(pos.min()) if pos.size else 1.0
    rep = analyze_graph(p, sigma0, args.delta, args.kappa, budget=args.budget, seed=args.seed)
    v = normalize(p)
    out = {"sigma0": sigma0, "delta": args.delta, "kappa": args.kappa, **rep.to_dict(),
           "rho": v.rho, "rho_converged": v.rho_converged}
    if args.s is not None:
        out["admissibility"] = {"s": args.s, "t_grid": list(args.t_grid),
                                "mean_r_sup": admissibility_scan(v, args.s, args.t_grid)}
    _emit(args.out, dumps(out))
    return EXIT_OK


def cmd_sd(args) -> int:
    p = _profile(args)
    v = normalize(p)
    eta = complex(*args.eta)
    if not eta.imag > 0:
        raise InvalidInput("eta must have positive imaginary part")
    sol = solve_sd(v, args.z_abs, eta, tol=args.tol, max_iter=args.max_iter)
    rec = sol.to_dict(components=args.components)
    rec["second_moment"] = schwinger.second_moment(v, args.z_abs)
    _emit(args.out, dumps(rec))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "density": cmd_density,
    "sample": cmd_sample,
    "compare": cmd_compare,
    "check-profile": cmd_check_profile,
    "sd": cmd_sd,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = _apply_config(ap, sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:  # argparse: usage errors exit with 2, --help/--version with 0
        return int(exc.code or 0)
    except (InvalidInput, OSError, json.JSONDecodeError) as exc:
        print(f"detequiv: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except (ConvergenceError, SDConvergenceError, kernels.KernelError) as exc:
        print(f"detequiv: not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (InvalidInput, ProfileError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"detequiv: error: {msg}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
