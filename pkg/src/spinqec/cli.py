"""Command-line front end: run the transfer experiments and write CSV plus a JSON summary.

Every command writes ``<command>.csv`` (or several CSVs) and ``<command>.json``
into ``--out``.  Floats are written with 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import acceptance
from .disorder import (
    DEFAULT_SEED,
    DisorderModel,
    analytic_density,
    dyson_first_order_coeffs,
    perturbative_amplitude,
    sample_deltas,
    batch_amplitudes,
)
from .protocols import (
    DEFAULT_STEP,
    DEFAULT_T_MAX,
    DISORDER_T_MAX,
    SEGMENT_LENGTH,
    disorder_averaged_qec,
    fidelity_vs_length,
    find_optimal_time,
    localization_profile,
    repeated_qec_fidelity,
    single_shot_qec,
)
from .qec import worst_case_fidelity_noqec
from .spinchain import amplitudes, build_subspace_hamiltonian, ideal_xxx_spec

U64 = 1 << 64


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return None if math.isnan(x) else float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# ---------------------------------------------------------------- argument types


def seed_type(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < U64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def positive_float(text: str) -> float:
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def nonneg_float(text: str) -> float:
    value = float(text)
    if not value >= 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return value


def float_list(text: str) -> list[float]:
    try:
        values = [nonneg_float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated non-negative numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def code_type(text: str) -> str:
    if text not in ("four", "five"):
        raise argparse.ArgumentTypeError(f"code must be 'four' or 'five', got {text!r}")
    return text


# ---------------------------------------------------------------- commands


def _t_star(n: int, s: int, r: int, t_max: float, t: float | None) -> float:
    if t is not None:
        return t
    return find_optimal_time(build_subspace_hamiltonian(ideal_xxx_spec(n)), s, r, t_max)[0]


def _check_sites(args) -> tuple[int, int]:
    return args.s, args.n if args.r is None else args.r


def cmd_transfer(args, out: Path) -> dict:
    s, r = _check_sites(args)
    h = build_subspace_hamiltonian(ideal_xxx_spec(args.n))
    steps = int(round(args.t_max / args.step))
    times = np.linspace(0.0, steps * args.step, steps + 1)
    f = amplitudes(h, s, r, times)
    mag = np.abs(f)
    rows = [
        (t, z.real, z.imag, a, max(0.0, 1 - a * a), worst_case_fidelity_noqec(z))
        for t, z, a in zip(times, f, mag)
    ]
    write_csv(out / "transfer.csv", ["t", "re_f", "im_f", "abs_f", "p", "fmin_noqec"], rows)
    i = int(np.argmax(mag))
    return {"rows": len(rows), "best_t": times[i], "best_abs_f": mag[i]}


def cmd_fig2(args, out: Path) -> dict:
    records = fidelity_vs_length(range(args.n_min, args.n_max + 1), t_max=args.t_max, coarse_step=args.step)
    rows = [(r.n, r.t_star, r.f_sq, r.extra["fmin_four"], r.extra["fmin_five"]) for r in records]
    write_csv(out / "fig2.csv", ["N", "t_star", "f_sq", "fmin_4q", "fmin_5q"], rows)
    # where the bare damping is below 4/7 the four-qubit protocol should win
    bad = [r.n for r in records if 1 - r.f_sq < 4 / 7 and r.extra["fmin_four"] < r.f_sq - 1e-12]
    return {"rows": len(rows), "violations": bad, "checks_passed": not bad}


def cmd_fig3(args, out: Path) -> dict:
    rows = []
    for length in sorted(args.lengths):
        rec = repeated_qec_fidelity(length, args.segment, args.code, args.t_max, args.step)
        own = repeated_qec_fidelity(length, args.segment, args.code, args.t_max, args.step, rest_at_own_optimum=True)
        single = single_shot_qec(length, args.code, args.t_max, args.step)
        rows.append((
            length, rec.extra["rounds"], rec.t_star, rec.extra["p_segment"], rec.f_sq_min,
            rec.f_sq, single, 1 - rec.extra["p_new_closed_form"], own.f_sq_min,
        ))
    write_csv(out / "fig3.csv", ["L", "rounds", "t_segment", "p_segment", "fmin_repeated_qec", "fmin_repeated_noqec",
                                 "fmin_single_shot_qec", "fmin_closed_form", "fmin_repeated_qec_rest_own_t"], rows)
    bad = [row[0] for row in rows if row[4] < row[5]]
    return {"rows": len(rows), "qec_below_noqec": bad, "checks_passed": not bad}


def cmd_dist(args, out: Path) -> dict:
    s, r = _check_sites(args)
    base = ideal_xxx_spec(args.n)
    t = _t_star(args.n, s, r, args.t_max, args.t)
    coeffs = dyson_first_order_coeffs(base, s, r, t)
    model = DisorderModel(args.delta, n_samples=args.samples, seed=args.seed)
    deltas = sample_deltas(model, args.n - 1)
    exact = batch_amplitudes(deltas, 1.0, s, r, t)
    pert = perturbative_amplitude(coeffs, deltas)

    hist_rows, dens_rows, summary = [], [], {"t": t}
    for comp, ex, pe in (("re", exact.real, pert.real), ("im", exact.imag, pert.imag)):
        lo = min(ex.min(), pe.min())
        hi = max(ex.max(), pe.max())
        edges = np.linspace(lo, hi, args.bins + 1)
        h_ex, _ = np.histogram(ex, edges, density=True)
        h_pe, _ = np.histogram(pe, edges, density=True)
        for k in range(args.bins):
            hist_rows.append((comp, edges[k], edges[k + 1], h_ex[k], h_pe[k]))
        widths = np.diff(edges)
        entry = {"hist_integral": float(np.sum(h_ex * widths)), "mean_exact": float(ex.mean())}
        try:
            dist = analytic_density(coeffs, args.delta, comp)
        except ValueError as exc:
            entry["density"] = str(exc)
        else:
            lo_d, hi_d = dist.support
            xs = np.linspace(lo_d, hi_d, args.points)
            dens_rows.extend((comp, x, y) for x, y in zip(xs, dist.pdf(xs)))
            entry.update(ks_perturbative=acceptance.ks_distance(pe, dist.cdf), ks_exact=acceptance.ks_distance(ex, dist.cdf),
                         normalization=dist.normalization, center=dist.center)
        summary[comp] = entry
    write_csv(out / "dist_hist.csv", ["component", "bin_lo", "bin_hi", "density_exact", "density_perturbative"], hist_rows)
    write_csv(out / "dist_density.csv", ["component", "x", "density"], dens_rows)
    summary["checks_passed"] = all(abs(summary[c]["hist_integral"] - 1) < 1e-9 for c in ("re", "im"))
    return summary


def cmd_fig5(args, out: Path) -> dict:
    s, r = _check_sites(args)
    base = ideal_xxx_spec(args.n)
    t = _t_star(args.n, s, r, args.t_max, args.t)
    rows = []
    for delta in args.deltas:
        rec = disorder_averaged_qec(base, DisorderModel(delta, n_samples=args.samples, seed=args.seed),
                                    args.code, s, r, t, threads=args.threads)
        rows.append((delta, rec.f_sq_min, rec.stderr, rec.f_sq, rec.extra["f_avg_re"], rec.extra["f_avg_im"], args.samples))
    write_csv(out / "fig5.csv", ["delta", "fmin_mean", "fmin_stderr", "f_sq_mean", "f_avg_re", "f_avg_im", "n_samples"], rows)
    bad = [row[0] for row in rows if not (0 <= row[1] <= 1 + 1e-10 and row[2] >= 0)]
    return {"t": t, "rows": len(rows), "checks_passed": not bad}


def cmd_localization(args, out: Path) -> dict:
    base = ideal_xxx_spec(args.n)
    t = _t_star(args.n, args.s, args.n, args.t_max, args.t)
    rows, fits = [], {}
    for delta in args.deltas:
        prof = localization_profile(base, DisorderModel(delta, n_samples=args.samples, seed=args.seed), t, args.s)
        for site, (m, e) in enumerate(zip(prof.mean_prob, prof.stderr), start=1):
            fit = math.exp(-(prof.slope * site + prof.intercept)) if prof.slope is not None else math.nan
            rows.append((delta, site, m, e, fit, math.nan if prof.loc_length is None else prof.loc_length))
        fits[delta] = {"slope": prof.slope, "intercept": prof.intercept, "loc_length": prof.loc_length,
                       "total": float(prof.mean_prob.sum())}
    write_csv(out / "localization.csv", ["delta", "n", "mean_prob", "stderr", "fit_prob", "loc_length"], rows)
    ok = all(abs(v["total"] - 1) < 1e-8 for v in fits.values())
    return {"t": t, "fits": fits, "checks_passed": ok}


def write_artifacts(out: Path, seed: int) -> list[str]:
    """Small deterministic runs of every experiment, used by ``selftest``."""
    out.mkdir(parents=True, exist_ok=True)
    ns = argparse.Namespace
    cmd_transfer(ns(n=8, s=1, r=None, t_max=60.0, step=0.05), out)
    cmd_fig2(ns(n_min=2, n_max=8, t_max=200.0, step=DEFAULT_STEP), out)
    cmd_fig3(ns(lengths=[8, 16], segment=SEGMENT_LENGTH, code="four", t_max=200.0, step=DEFAULT_STEP), out)
    common = dict(n=8, s=1, r=None, t_max=DISORDER_T_MAX, t=None, seed=seed)
    cmd_dist(ns(**common, delta=0.001, samples=4000, bins=40, points=201), out)
    cmd_fig5(ns(**common, deltas=[0.0, 0.01, 0.06], samples=40, code="four", threads=1), out)
    cmd_localization(ns(**common, deltas=[0.0, 0.03, 0.06], samples=200), out)
    return sorted(p.name for p in out.glob("*.csv"))


def cmd_selftest(args, out: Path) -> dict:
    numbers = args.criteria if args.criteria else sorted(acceptance.CRITERIA)
    results = acceptance.run_all(numbers, args.seed, echo=lambda line: print(line, flush=True))
    files = write_artifacts(out, args.seed)
    write_csv(out / "acceptance.csv", ["criterion", "name", "passed"], [(r.number, r.name, int(r.passed)) for r in results])
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return {
        "criteria": {r.number: {"name": r.name, "passed": r.passed, "detail": r.detail, "measured": r.measured,
                                "seconds": r.seconds} for r in results},
        "artifacts": files,
        "checks_passed": passed == len(results),
    }


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinqec", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=seed_type, default=DEFAULT_SEED, help="64-bit Monte Carlo seed (default 0xC0FFEE)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--threads", type=positive_int, default=1, help="worker threads for realizations")
    parser.add_argument("--config", type=Path, help="key = value file; command-line flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)

    def chain_opts(p, n=8):
        p.add_argument("--n", type=positive_int, default=n, help="chain length")
        p.add_argument("--s", type=positive_int, default=1, help="sender site")
        p.add_argument("--r", type=positive_int, default=None, help="receiver site (default N)")

    p = sub.add_parser("transfer", help="time scan of the transition amplitude")
    chain_opts(p)
    p.add_argument("--t-max", type=positive_float, default=20.0)
    p.add_argument("--step", type=positive_float, default=DEFAULT_STEP)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("fig2", help="fidelity against chain length, with and without QEC")
    p.add_argument("--n-min", type=positive_int, default=2)
    p.add_argument("--n-max", type=positive_int, default=32)
    p.add_argument("--t-max", type=positive_float, default=DEFAULT_T_MAX)
    p.add_argument("--step", type=positive_float, default=DEFAULT_STEP)
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("fig3", help="repeated QEC every segment against stitched bare transfer")
    p.add_argument("--lengths", type=int_list, default=[8, 16, 24, 32])
    p.add_argument("--segment", type=positive_int, default=SEGMENT_LENGTH)
    p.add_argument("--code", type=code_type, default="four")
    p.add_argument("--t-max", type=positive_float, default=DEFAULT_T_MAX)
    p.add_argument("--step", type=positive_float, default=DEFAULT_STEP)
    p.set_defaults(func=cmd_fig3)

    def disorder_opts(p, samples):
        chain_opts(p)
        p.add_argument("--t", type=nonneg_float, default=None, help="fixed time (default: ideal optimum)")
        p.add_argument("--t-max", type=positive_float, default=DISORDER_T_MAX, help="window for the ideal optimum")
        p.add_argument("--samples", type=positive_int, default=samples, help="disorder realizations")

    p = sub.add_parser("dist", help="amplitude histograms and analytic density")
    disorder_opts(p, 10_000)
    p.add_argument("--delta", type=nonneg_float, default=0.001)
    p.add_argument("--bins", type=positive_int, default=60)
    p.add_argument("--points", type=positive_int, default=401)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("fig5", help="disorder-averaged worst-case fidelity against delta")
    disorder_opts(p, 1000)
    p.add_argument("--deltas", type=float_list, default=[0.0, 0.001, 0.01, 0.03, 0.06, 0.1])
    p.add_argument("--code", type=code_type, default="four")
    p.set_defaults(func=cmd_fig5)

    p = sub.add_parser("localization", help="disorder-averaged site profile and fitted localization length")
    disorder_opts(p, 1000)
    p.add_argument("--deltas", type=float_list, default=[0.0, 0.01, 0.03, 0.06, 0.1])
    p.set_defaults(func=cmd_localization)

    p = sub.add_parser("selftest", help="run the acceptance checks and write reference artifacts")
    p.add_argument("--criteria", type=int_list, default=None, help="subset, e.g. 1,2,5")
    p.set_defaults(func=cmd_selftest)
    return parser


def read_config(path: Path) -> dict[str, str]:
    entries = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        entries[key.replace("-", "_")] = value
    return entries


def validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> argparse.Namespace:
    """Cross-field checks that a single option type cannot express."""
    if hasattr(args, "s"):
        r = args.n if args.r is None else args.r
        if args.n < 2:
            parser.error(f"--n must be at least 2, got {args.n}")
        if not (args.s <= args.n and r <= args.n):
            parser.error(f"sites s={args.s}, r={r} must lie in 1..{args.n}")
    if args.command == "fig2" and not 2 <= args.n_min <= args.n_max:
        parser.error("need 2 <= --n-min <= --n-max")
    if args.command == "fig3" and min(args.lengths) < args.segment:
        parser.error(f"every length must be >= segment length {args.segment}")
    if args.command == "dist" and args.delta <= 0:
        parser.error("dist needs --delta > 0")
    if args.command in ("dist", "localization") and args.samples < 100:
        parser.error("--samples must be at least 100 for this command")
    if args.command == "selftest" and args.criteria:
        unknown = [k for k in args.criteria if k not in acceptance.CRITERIA]
        if unknown:
            parser.error(f"unknown criteria {unknown}")
    return args


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return validate(parser, args)
    try:
        config = read_config(args.config)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known_top = {a.dest for a in parser._actions}
    known_sub = {a.dest for a in sub._actions}
    unknown = sorted(set(config) - known_top - known_sub - {"config"})
    if unknown:
        parser.error(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    # string defaults are run through each option's type, so validation still applies
    parser.set_defaults(**{k: v for k, v in config.items() if k in known_top})
    sub.set_defaults(**{k: v for k, v in config.items() if k in known_sub})
    return validate(parser, parser.parse_args(argv))


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    out = Path(args.out)
    params = {k: v for k, v in vars(args).items() if k != "func"}
    start = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        results = args.func(args, out)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    summary = {
        "command": args.command,
        "parameters": {k: str(v) if isinstance(v, Path) else v for k, v in params.items()},
        "seed": args.seed,
        "wall_time": time.perf_counter() - start,
        "results": results,
    }
    with open(out / f"{args.command}.json", "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
    if not results.get("checks_passed", True):
        print(f"{args.command}: internal checks failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
