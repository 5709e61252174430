"""Command-line front end: decode, bounds, sweep, verify-tails, presets.

Exit codes: 0 success, 2 validation error, 1 runtime failure, 3 failed
verification cell in verify-tails.  Machine-readable data goes to files or
to stdout under --json; progress and timing go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .bounds import compute_bound_report, necessary_n, sufficient_n
from .decoders import DEFAULT_BUDGET, EnumerationBudgetError
from .ensemble import SIGN_MODES, SparseSignal, observe, residual_sq, sample_design, sample_signal
from .harness import (
    DECODER_NAMES,
    PRESET_NAMES,
    ExperimentConfig,
    ValidationError,
    load_config,
    preset,
    sweep,
    with_overrides,
)
from .tails import verify_binom_sandwich, verify_tail_bounds


def write_instance(path: str, X: np.ndarray, beta: SparseSignal, y: np.ndarray,
                   sigma: float, seed: int) -> None:
    """Plain-text instance format, exact round-trip at double precision.

    Line 1: `n p s sigma seed`; then n rows of p design entries; one line of
    s `index:value` pairs; one line of n observation values.
    """
    n, p = X.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {p} {beta.s} {sigma!r} {seed}\n")
        for i in range(n):
            fh.write(" ".join(f"{v:.17g}" for v in X[i]) + "\n")
        fh.write(" ".join(f"{j}:{v:.17g}" for j, v in zip(beta.support, beta.values)) + "\n")
        fh.write(" ".join(f"{v:.17g}" for v in y) + "\n")


def read_instance(path: str):
    """Inverse of write_instance; returns (X, beta, y, sigma, seed)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    n_s, p_s, s_s, sigma_s, seed_s = lines[0].split()
    n, p, s = int(n_s), int(p_s), int(s_s)
    X = np.array([[float(v) for v in lines[1 + i].split()] for i in range(n)])
    pairs = [item.split(":") for item in lines[1 + n].split()]
    support = np.array([int(a) for a, _ in pairs], dtype=np.int64)
    values = np.array([float(b) for _, b in pairs])
    y = np.array([float(v) for v in lines[2 + n].split()])
    beta = SparseSignal(p=p, support=support, values=values,
                        min_magnitude=float(np.min(np.abs(values))))
    return X, beta, y, float(sigma_s), int(seed_s)


def _add_decode(sub) -> None:
    cmd = sub.add_parser("decode", help="generate one instance and decode it")
    cmd.add_argument("--p", type=int, required=True)
    cmd.add_argument("--s", type=int, required=True)
    cmd.add_argument("--n", type=int, required=True)
    cmd.add_argument("--sigma", type=float, default=1.0)
    cmd.add_argument("--m2", type=float, default=1.0, help="squared minimum magnitude")
    cmd.add_argument("--decoder", choices=DECODER_NAMES, default="exhaustive")
    cmd.add_argument("--seed", type=int, default=0)
    cmd.add_argument("--sign-mode", choices=SIGN_MODES, default="all-positive")
    cmd.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    cmd.add_argument("--emit-instance", metavar="PATH", default=None)


def _cmd_decode(args) -> int:
    if not 1 <= args.s <= args.p:
        raise ValidationError(f"need 1 <= s <= p, got s={args.s}, p={args.p}")
    if args.n < 1 or args.m2 <= 0 or args.sigma < 0:
        raise ValidationError("need n >= 1, m2 > 0, sigma >= 0")
    M = math.sqrt(args.m2)
    X = sample_design(args.n, args.p, args.seed)
    beta = sample_signal(args.p, args.s, M, args.sign_mode, seed=args.seed)
    y = observe(X, beta, args.sigma, seed=args.seed)
    if args.emit_instance:
        write_instance(args.emit_instance, X, beta, y, args.sigma, args.seed)

    from .harness import DECODERS  # late import: tests may patch the registry

    try:
        result = DECODERS[args.decoder](args.decoder, X, y, args.s, args.budget)
    except EnumerationBudgetError as err:
        print(f"refused: {err}", file=sys.stderr)
        return 1
    # both residuals through the same direct projection path, so the
    # optimality gap is exactly zero on perfect recovery
    f_est = residual_sq(X[:, result.estimate], y)
    f_true = residual_sq(X[:, beta.support], y)
    delta = f_est - f_true
    recovered = bool(np.array_equal(result.estimate, beta.support))
    print(f"p={args.p} s={args.s} n={args.n} sigma={args.sigma!r} m2={args.m2!r} "
          f"decoder={args.decoder} seed={args.seed}")
    print("true support :", " ".join(map(str, beta.support)))
    print("estimate     :", " ".join(map(str, result.estimate)))
    print(f"f(estimate)  : {f_est!r}")
    print(f"f(true)      : {f_true!r}")
    print(f"delta        : {delta!r}")
    print(f"tie_count    : {result.tie_count}")
    print(f"subsets      : {result.subsets_evaluated}")
    print(f"recovered    : {'yes' if recovered else 'no'}")
    print(f"decode time: {result.elapsed * 1e3:.3f} ms", file=sys.stderr)
    return 0


def _add_bounds(sub) -> None:
    cmd = sub.add_parser("bounds", help="compute the bound report for one point")
    cmd.add_argument("--p", type=int, required=True)
    cmd.add_argument("--s", type=int, required=True)
    cmd.add_argument("--n", type=int, default=None)
    cmd.add_argument("--m2", type=float, required=True)
    cmd.add_argument("--C", type=float, default=24.0)
    cmd.add_argument("--Cprime", type=float, default=0.25)
    cmd.add_argument("--union-form", choices=("exact-lemma2", "simplified"),
                     default="exact-lemma2")
    cmd.add_argument("--json", action="store_true")


def _cmd_bounds(args) -> int:
    if not 1 <= args.s < args.p:
        raise ValidationError(f"need 1 <= s < p, got s={args.s}, p={args.p}")
    if args.m2 <= 0:
        raise ValidationError(f"need m2 > 0, got {args.m2}")
    if args.n is None:
        suff = sufficient_n(args.p, args.s, args.m2, args.C)
        nec = necessary_n(args.p, args.s, args.m2, args.Cprime)
        if args.json:
            print(json.dumps({"p": args.p, "s": args.s, "m2": args.m2,
                              "C": args.C, "Cprime": args.Cprime,
                              "sufficient_n": suff, "necessary_n": nec}, sort_keys=True))
        else:
            print(f"sufficient_n : {suff!r}   (C={args.C!r})")
            print(f"necessary_n  : {nec!r}   (Cprime={args.Cprime!r})")
        return 0
    if args.n < 1:
        raise ValidationError(f"need n >= 1, got n={args.n}")
    report = compute_bound_report(args.n, args.p, args.s, args.m2,
                                  C=args.C, Cprime=args.Cprime,
                                  union_form=args.union_form)
    if args.json:
        payload = {
            "n": report.n, "p": report.p, "s": report.s, "m2": report.m2,
            "union_bound": report.union_bound, "union_log": report.union_log,
            "union_regime_valid": report.union_regime_valid,
            "union_form": report.union_form,
            "per_k": [{"k": t.k, "count": t.count, "log_pairwise": t.log_pairwise,
                       "log_term": t.log_term} for t in report.per_k],
            "sufficient_n": report.sufficient_n, "necessary_n": report.necessary_n,
            "fano_ensemble": report.fano_ensemble, "fano_exact": report.fano_exact,
            "C": report.C, "Cprime": report.Cprime,
        }
        print(json.dumps(payload, sort_keys=True))
        return 0
    print(f"n={report.n} p={report.p} s={report.s} m2={report.m2!r} "
          f"form={report.union_form}")
    print(f"union_bound        : {report.union_bound!r} (log {report.union_log!r})")
    print(f"union_regime_valid : {report.union_regime_valid}")
    for t in report.per_k:
        print(f"  k={t.k}: N(k)={t.count} log_pairwise={t.log_pairwise!r} "
              f"log_term={t.log_term!r}")
    print(f"sufficient_n       : {report.sufficient_n!r}   (C={report.C!r})")
    print(f"necessary_n        : {report.necessary_n!r}   (Cprime={report.Cprime!r})")
    print(f"fano_ensemble      : {report.fano_ensemble!r}")
    print(f"fano_exact         : {report.fano_exact!r}")
    return 0


def _add_sweep(sub) -> None:
    cmd = sub.add_parser("sweep", help="run a Monte Carlo sweep over an n grid")
    cmd.add_argument("--config", metavar="PATH", default=None)
    cmd.add_argument("--preset", choices=PRESET_NAMES, default=None)
    cmd.add_argument("--p", type=int, default=None)
    cmd.add_argument("--s", type=int, default=None)
    cmd.add_argument("--n-grid", default=None, help="comma-separated sample sizes")
    cmd.add_argument("--m2", type=float, default=None)
    cmd.add_argument("--trials", type=int, default=None)
    cmd.add_argument("--sigma", type=float, default=None)
    cmd.add_argument("--sign-mode", choices=SIGN_MODES, default=None)
    cmd.add_argument("--decoder", choices=DECODER_NAMES, default=None)
    cmd.add_argument("--ensemble", choices=("generic", "restricted"), default=None)
    cmd.add_argument("--base-seed", type=int, default=None)
    cmd.add_argument("--out", metavar="PATH", required=True)
    cmd.add_argument("--json", metavar="PATH", default=None)
    cmd.add_argument("--plot", metavar="PATH", default=None,
                     help="figure path (default: CSV path with .png)")
    cmd.add_argument("--no-plot", action="store_true")
    cmd.add_argument("--timing", action="store_true",
                     help="write wall-clock mean_decode_ms into the CSV "
                          "(breaks byte-identical reruns)")


def _cmd_sweep(args) -> int:
    if args.config and args.preset:
        raise ValidationError("--config and --preset are mutually exclusive")
    if args.config:
        config = load_config(args.config)
    elif args.preset:
        config = preset(args.preset)
    else:
        missing = [k for k in ("p", "s", "n_grid", "m2", "trials")
                   if getattr(args, k) is None]
        if missing:
            raise ValidationError(f"inline sweep needs --{', --'.join(missing)}")
        config = ExperimentConfig(
            p=args.p, s=args.s,
            n_grid=tuple(int(v) for v in args.n_grid.split(",") if v.strip()),
            m2=args.m2, trials=args.trials,
        )
    n_grid = None
    if (args.config or args.preset) and args.n_grid:
        n_grid = tuple(int(v) for v in args.n_grid.split(",") if v.strip())
    config = with_overrides(
        config,
        n_grid=n_grid,
        sigma=args.sigma,
        sign_mode=args.sign_mode,
        decoder=args.decoder,
        ensemble=args.ensemble,
        trials=args.trials if (args.config or args.preset) else None,
        base_seed=args.base_seed,
        p=args.p if (args.config or args.preset) else None,
        s=args.s if (args.config or args.preset) else None,
        m2=args.m2 if (args.config or args.preset) else None,
    )

    def progress(batch):
        print(f"n={batch.n} decoder={batch.decoder} errors={batch.errors}/"
              f"{batch.trials - batch.aborted} aborted={batch.aborted} "
              f"perr={batch.perr_hat:.4f}", file=sys.stderr)

    curve = sweep(config, out_path=args.out, include_timing=args.timing,
                  progress=progress)
    print(f"wrote {args.out}", file=sys.stderr)
    if args.json:
        from .harness import curve_to_json

        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(curve_to_json(curve) + "\n")
        print(f"wrote {args.json}", file=sys.stderr)
    if not args.no_plot:
        from .plots import default_figure_path, render_phase_curve

        fig_path = args.plot or default_figure_path(args.out)
        render_phase_curve(curve, fig_path)
        print(f"wrote {fig_path}", file=sys.stderr)
    return 0


def _add_verify_tails(sub) -> None:
    cmd = sub.add_parser("verify-tails",
                         help="Monte Carlo check of the tail and binomial bounds")
    cmd.add_argument("--samples", type=int, default=10**6)
    cmd.add_argument("--seed", type=int, default=0)
    cmd.add_argument("--selftest-break", action="store_true",
                     help="negative control: corrupt one threshold, must FAIL")


def _cmd_verify_tails(args) -> int:
    if args.samples < 1:
        raise ValidationError(f"need samples >= 1, got {args.samples}")
    checks = verify_tail_bounds(samples=args.samples, seed=args.seed,
                                break_one=args.selftest_break)
    failures = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        wide = "  WIDE-CI" if c.stderr > 0.25 * max(c.prob_bound, 1e-12) else ""
        if not c.passed:
            failures += 1
        print(f"{status} {c.bound:<17s} d={c.d:<3d} nu={c.nu:<4g} x={c.x:<4g} "
              f"empirical={c.empirical:.6f} bound={c.prob_bound:.6f} "
              f"stderr={c.stderr:.2e}{wide}")
    sandwich_ok = verify_binom_sandwich(40)
    print(f"{'PASS' if sandwich_ok else 'FAIL'} binomial-sandwich m<=40")
    if not sandwich_ok:
        failures += 1
    print(f"{len(checks) + 1 - failures}/{len(checks) + 1} checks passed",
          file=sys.stderr)
    return 3 if failures else 0


def _cmd_presets(_args) -> int:
    for name in PRESET_NAMES:
        cfg = preset(name)
        grid = ",".join(map(str, cfg.n_grid))
        paired = f" + {cfg.paired_decoder}" if cfg.paired_decoder else ""
        print(f"{name}: p={cfg.p} s={cfg.s} m2={cfg.m2!r} decoder={cfg.decoder}{paired} "
              f"n_grid={grid} trials={cfg.trials} sign_mode={cfg.sign_mode} "
              f"base_seed={cfg.base_seed}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supportlab",
        description="Sparsity-pattern recovery: exhaustive decoding, bounds, "
                    "and Monte Carlo phase experiments.",
    )
    parser.add_argument("--version", action="version", version=f"supportlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_decode(sub)
    _add_bounds(sub)
    _add_sweep(sub)
    _add_verify_tails(sub)
    sub.add_parser("presets", help="list the built-in experiment presets")
    return parser


_HANDLERS = {
    "decode": _cmd_decode,
    "bounds": _cmd_bounds,
    "sweep": _cmd_sweep,
    "verify-tails": _cmd_verify_tails,
    "presets": _cmd_presets,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except EnumerationBudgetError as err:
        print(f"refused: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
