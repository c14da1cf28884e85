"""Command-line harness: ``qglauber verify|evolve|classify|fit|crossover``.

Exit codes: 0 success, 1 verification failure, 2 usage error.
The default output directory is taken from ``QGLAUBER_OUT`` (else ``./out``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import export
from .channels import (
    VARIANTS,
    XMatrix,
    build_classical_transition,
    build_kraus,
    build_x_matrix,
    verify_cptp,
    verify_extension,
)
from .configspace import MAX_EXACT_SITES, ChainGeometry
from .exactdyn import CapacityError, initial_density_matrix, iter_states, kraus_for
from .observables import OBSERVABLES, TimeSeries, half_time, hamming_classify

log = logging.getLogger("qglauber")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SNAPSHOT_MAX_SITES = 8


class UsageError(Exception):
    pass


def _out_dir(arg) -> Path:
    p = Path(arg or os.environ.get("QGLAUBER_OUT", "out"))
    p.mkdir(parents=True, exist_ok=True)
    return p


def _observables(spec: str) -> list[str]:
    names = [s.strip() for s in spec.split(",") if s.strip()]
    bad = [s for s in names if s not in OBSERVABLES]
    if bad or not names:
        raise UsageError(f"unknown observables {bad}; choose from {sorted(OBSERVABLES)}")
    return names


# verify


def cmd_verify(args) -> int:
    if args.x_file:
        try:
            x = XMatrix(export.read_matrix_csv(args.x_file, shape=(4, 4)), "custom")
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read X matrix: {exc}") from None
    else:
        x = build_x_matrix(args.variant)
    k = build_kraus(x)
    t = build_classical_transition()
    cptp_ok, cptp_dev = verify_cptp(k)
    print(f"variant            {x.variant}")
    print(f"CPTP deviation     {cptp_dev:.3e}  {'pass' if cptp_ok else 'FAIL'}")
    if cptp_ok:
        ext_ok, ext_dev = verify_extension(k, t)
        print(f"extension dev.     {ext_dev:.3e}  {'pass' if ext_ok else 'FAIL'}")
    else:
        ext_ok = False
        print("extension dev.     skipped (not CPTP)")
    res = x.extension_residuals()
    rel_ok = bool(np.all(np.abs(res) <= 1e-12))
    labels = [(f"|X1{c}|^2+|X3{c}|^2", f"|X2{c}|^2+|X4{c}|^2") for c in range(1, 5)]
    for c, (l1, l2) in enumerate(labels):
        print(f"  {l1} - 1/2 = {res[0, c]: .3e}    {l2} - 1/2 = {res[1, c]: .3e}")
    print(f"1/2 relations      {'pass' if rel_ok else 'FAIL'}")
    if args.export_dir:
        out = _out_dir(args.export_dir)
        export.write_matrix_csv(out / "X.csv", x.entries)
        export.write_matrix_csv(out / "K1.csv", k.k1)
        export.write_matrix_csv(out / "K2.csv", k.k2)
        export.write_matrix_csv(out / "T.csv", t)
    ok = cptp_ok and ext_ok and rel_ok
    print("RESULT             " + ("pass" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_FAIL


# evolve


def _exact_series(args, names, out):
    g = ChainGeometry(args.n)
    mode = "classical" if args.mode == "classical" else "quantum"
    k = kraus_for("classical" if mode == "classical" else args.variant)
    rows = {name: [] for name in names}
    times = []
    dump = args.dump_rho
    for t, state in iter_states(initial_density_matrix(g), k, args.mcs, mode):
        times.append(t)
        for name in names:
            rows[name].append(OBSERVABLES[name](state))
        if dump:
            rho = np.diag(state) if state.ndim == 1 else state
            export.write_matrix_csv(out / f"rho_t{int(t):04d}.csv", rho)
    return times, {name: (rows[name], None) for name in names}


def _traj_series(args, names):
    from .trajdyn import EnsembleConfig, EnsembleRun, estimate_all
    g = ChainGeometry(args.n)
    cfg = EnsembleConfig(n_traj=args.traj, seed=args.seed, n_mcs=args.mcs,
                         prune_epsilon=args.prune, backend=args.backend,
                         threads=args.threads)
    vals = {name: ([], []) for name in names}
    times = []
    budget = int(args.budget_gib * 2**30)
    run = EnsembleRun(cfg, args.variant, g)
    for snap in run:
        times.append(snap.t_mcs)
        est = estimate_all(snap, names, budget)
        for name in names:
            vals[name][0].append(est[name][0])
            vals[name][1].append(est[name][1])
    return times, vals, run.pruned


REPLAY_FIELDS = {"mode": "mode", "n_sites": "n", "n_mcs": "mcs", "n_traj": "traj", "seed": "seed",
                 "prune_epsilon": "prune", "backend": "backend"}


def _apply_manifest(args):
    """Overwrite run parameters with those recorded in an earlier manifest."""
    import json
    try:
        man = json.loads(Path(args.manifest).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read manifest: {exc}") from None
    if man.get("command") != "evolve":
        raise UsageError("manifest was not written by evolve")
    for key, attr in REPLAY_FIELDS.items():
        if man.get(key) is not None:
            setattr(args, attr, man[key])
    if man.get("mode") != "classical":
        args.variant = man["variant"]
    args.obs = ",".join(man["observables"])


def cmd_evolve(args) -> int:
    if args.manifest:
        _apply_manifest(args)
    names = _observables(args.obs)
    if args.n % 2 or args.n < 4:
        raise UsageError("--n must be even and at least 4")
    if args.mcs < 0:
        raise UsageError("--mcs must be non-negative")
    if args.mode in ("exact", "classical") and args.n > MAX_EXACT_SITES:
        raise UsageError(f"exact and classical modes refuse N > {MAX_EXACT_SITES}; use --mode traj")
    if args.dump_rho and (args.mode == "traj" or args.n > SNAPSHOT_MAX_SITES):
        raise UsageError(f"--dump-rho needs exact or classical mode with N <= {SNAPSHOT_MAX_SITES}")
    if args.mode == "traj" and (args.traj is None or args.seed is None):
        raise UsageError("trajectory mode needs --traj and --seed")
    out = _out_dir(args.out)
    variant = "classical" if args.mode == "classical" else args.variant
    pruned = None
    if args.mode == "traj":
        times, vals, pruned = _traj_series(args, names)
    else:
        times, vals = _exact_series(args, names, out)
    files = {}
    for name in names:
        v, e = vals[name]
        if e is not None:
            e = [np.nan if x is None else x for x in e]
            if np.all(np.isnan(e)):
                e = None
        ts = TimeSeries(times, v, e, {"variant": variant, "n_sites": args.n, "mode": args.mode})
        path = export.write_timeseries_csv(out / f"{name}.csv", ts)
        files[path.name] = export.file_digest(path)
    manifest = export.make_manifest(
        "evolve", variant=variant, n_sites=args.n, mode=args.mode, n_mcs=args.mcs,
        observables=names, n_traj=args.traj, seed=args.seed,
        prune_epsilon=args.prune if args.mode == "traj" else None,
        backend=args.backend if args.mode == "traj" else None,
        threads=args.threads, pruned_amplitudes=pruned,
        site_update="uniform mixture of all sites per elemental step"
        if args.mode != "traj" else "one uniformly drawn site per elemental step",
        boundary="periodic", outputs=files)
    export.write_json(out / "manifest.json", manifest)
    print(f"wrote {len(files)} series to {out}")
    return EXIT_OK


# classify


def cmd_classify(args) -> int:
    if args.n % 2 or args.n < 4 or args.n > MAX_EXACT_SITES:
        raise UsageError(f"--n must be even, 4 <= N <= {MAX_EXACT_SITES}")
    out = _out_dir(args.out)
    g = ChainGeometry(args.n)
    variants = args.variant or ["S0", "H0"]
    wanted = sorted(set(args.times))
    files, halves = {}, {}
    for variant in variants:
        grids, t_half = _classify_run(g, variant, wanted, args.c_max, args.max_mcs)
        halves[variant] = t_half
        if t_half is None:
            warnings.warn(f"{variant}: P_eq did not reach 1/2 within {args.max_mcs} MCS; "
                          "half-time grid omitted")
        for tag, grid in grids.items():
            path = export.write_grid_csv(out / f"grid_{variant}_{tag}.csv", grid)
            files[path.name] = export.file_digest(path)
        print(f"{variant}: t_half = {t_half if t_half is not None else 'not reached'}")
    export.write_json(out / "manifest.json", export.make_manifest(
        "classify", variants=variants, n_sites=args.n, c_max=args.c_max,
        times=wanted, max_mcs=args.max_mcs, t_half=halves, outputs=files))
    return EXIT_OK


def _classify_run(g, variant, times, c_max, max_mcs):
    """Grids at the requested MCS times and at the elemental step nearest t_half."""
    mode = "classical" if variant == "classical" else "quantum"
    k = kraus_for(variant)
    grids = {}
    prev_t = prev_v = prev_state = None
    t_half = None
    for t, state in iter_states(initial_density_matrix(g), k, max_mcs, mode, every=1):
        v = OBSERVABLES["peq"](state)
        if any(np.isclose(t, w) for w in times):
            grids[f"t{t:g}"] = hamming_classify(state, c_max)
        if t_half is None and v >= 0.5:
            t_half = half_time([prev_t, t], [prev_v, v]) if prev_t is not None else t
            near = state if prev_state is None or v - 0.5 <= 0.5 - prev_v else prev_state
            grids["thalf"] = hamming_classify(near, c_max)
        if t_half is not None and t >= max(times, default=0.0):
            break
        prev_t, prev_v, prev_state = t, v, state
    return grids, t_half


# fit / crossover


def _load_bundle(paths):
    series = {}
    for p in paths:
        try:
            ts = export.read_timeseries_csv(p)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read series {p}: {exc}") from None
        n = ts.metadata.get("n_sites")
        if n is None:
            raise UsageError(f"{p}: series has no n_sites column")
        series[int(n)] = (ts.times, ts.values)
    return series


def cmd_fit(args) -> int:
    from .scaling import fit_regime, scaled_coordinates
    series = _load_bundle(args.series)
    if len(series) < 3:
        raise UsageError(f"need at least 3 distinct sizes, got {sorted(series)}")
    if args.window:
        windows = tuple(args.window)
    elif args.t_half:
        th = dict(zip(sorted(series), args.t_half))
        if len(args.t_half) != len(series):
            raise UsageError("--t-half needs one value per size (sorted by N)")
        from .scaling import default_window
        windows = {n: default_window(args.regime, th[n], float(series[n][0][-1]))
                   for n in series}
    else:
        raise UsageError("give --window TMIN TMAX or --t-half per size")
    try:
        fit = fit_regime(series, args.regime, windows)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args.out)
    report = fit.to_dict()
    report["inputs"] = {str(p): export.file_digest(p) for p in args.series}
    export.write_json(out / f"fit_{args.regime}.json", report)
    coords = scaled_coordinates(series, fit.exponent, fit.rate_power)
    with (out / f"collapse_{args.regime}.csv").open("w") as fh:
        fh.write("n_sites,t_scaled,log_c_scaled\n")
        for n, (x, y) in coords.items():
            for xi, yi in zip(x, y):
                fh.write(f"{n},{export.fmt(float(xi))},{export.fmt(float(yi))}\n")
    print(f"{args.regime}: exponent = {fit.exponent:.4f} +- {fit.exponent_err:.4f}, "
          f"rate = {fit.rate:.4f} +- {fit.rate_err:.4f}, collapse = {fit.collapse_score:.3e}")
    return EXIT_OK


def _read_fit(path):
    import json
    from .scaling import ScalingFit
    d = json.loads(Path(path).read_text())
    return ScalingFit(d["regime"], d["exponent"], d["exponent_err"], d["rate"], d["rate_err"],
                      d["amplitude"], d["windows"], d["collapse_score"])


def cmd_crossover(args) -> int:
    from .scaling import crossover_time
    try:
        short, long = _read_fit(args.short), _read_fit(args.long)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read fit report: {exc}") from None
    res = crossover_time(short, long, args.n)
    out = _out_dir(args.out)
    with (out / "crossover.csv").open("w") as fh:
        fh.write("n_sites,t_c,t_c_asymptotic\n")
        for n, tc, ta in zip(res.n_sites, res.t_c, res.t_c_asymptotic):
            fh.write(f"{int(n)},{export.fmt(float(tc))},{export.fmt(float(ta))}\n")
            print(f"N={int(n):5d}  t_c={tc:.6g}  asymptotic={ta:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qglauber", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check CPTP and extension conditions of a channel")
    g = v.add_mutually_exclusive_group(required=True)
    g.add_argument("--variant", choices=VARIANTS)
    g.add_argument("--x-file", help="4x4 CSV with a custom X matrix")
    v.add_argument("--export-dir", help="write X, K1, K2 and T as CSV here")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("evolve", help="evolve the chain and write observable time series")
    e.add_argument("--mode", choices=("exact", "traj", "classical"), default="exact")
    e.add_argument("--variant", choices=VARIANTS, default="S0")
    e.add_argument("--n", type=int, default=10)
    e.add_argument("--mcs", type=int, default=60)
    e.add_argument("--obs", default="coherence,purity,domains,peq")
    e.add_argument("--out")
    e.add_argument("--traj", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--prune", type=float, default=1e-16)
    e.add_argument("--backend", choices=("sparse", "dense"), default="sparse")
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--budget-gib", type=float, default=2.0)
    e.add_argument("--manifest", help="replay the run parameters of an earlier manifest.json "
                   "(thread count and output directory still come from the command line)")
    e.add_argument("--dump-rho", action="store_true",
                   help=f"write rho at every MCS (exact, N <= {SNAPSHOT_MAX_SITES})")
    e.set_defaults(func=cmd_evolve)

    c = sub.add_parser("classify", help="Hamming-class grids at 1 MCS and at the half time")
    c.add_argument("--variant", action="append", choices=VARIANTS + ("classical",))
    c.add_argument("--n", type=int, default=10)
    c.add_argument("--c-max", type=int, default=3)
    c.add_argument("--times", type=float, nargs="*", default=[1.0])
    c.add_argument("--max-mcs", type=int, default=100)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    f = sub.add_parser("fit", help="finite-size scaling fit of coherence series")
    f.add_argument("series", nargs="+", help="time-series CSVs, one per chain length")
    f.add_argument("--regime", choices=("short", "long"), default="short")
    f.add_argument("--window", type=float, nargs=2, metavar=("TMIN", "TMAX"))
    f.add_argument("--t-half", type=float, nargs="+")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    x = sub.add_parser("crossover", help="crossover time table from two fit reports")
    x.add_argument("--short", required=True)
    x.add_argument("--long", required=True)
    x.add_argument("--n", type=int, nargs="+", default=[12, 14, 16, 18, 20])
    x.add_argument("--out")
    x.set_defaults(func=cmd_crossover)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
