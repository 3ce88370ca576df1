"""Command-line entry point.

Subcommands: factorize, build, eval, approx, fit, rate, minimax, bounds.
Exit codes: 0 success, 1 usage error (bad flags or malformed files,
message names the offending field), 2 numerical failure.  Data goes to
stdout or the requested files; diagnostics go to stderr.  Output files
are written via temp-and-rename, so failures leave nothing partial.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bounds as bounds_mod
from . import minimax as minimax_mod
from .estimator import (
    DivergenceError,
    ExperimentConfig,
    SingularSystemError,
    fit_coefficients,
    l2_error,
    rate_csv_text,
    rate_experiment,
    sample_dataset,
)
from .filters import FilterSequence, RootFindingError, convolve_all, factorize_filter
from .network import forward, load_model, save_model
from .ridge import build_network, certified_bound, feature_offset, load_spec, sup_error
from .serialize import SchemaError, atomic_write_text, get_field, to_json_text


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(doc: dict, out_path: str | None) -> None:
    text = to_json_text(doc) + "\n"
    if out_path:
        atomic_write_text(out_path, text)
    else:
        sys.stdout.write(text)


def _load_json(path: str, context: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"{context}: cannot read '{path}' ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{context}: invalid JSON in '{path}' ({exc})") from exc


def _cmd_factorize(args) -> int:
    doc = _load_json(args.filter, "filter file")
    coeffs = get_field(doc, "coeffs", list, "filter file")
    filt = FilterSequence(np.asarray(coeffs, dtype=float))
    factors = factorize_filter(filt, args.S)
    recon = convolve_all(factors)
    err = float(np.max(np.abs(recon.padded(filt.degree + 1) - filt.coeffs)))
    _emit(
        {
            "S": args.S,
            "count": len(factors),
            "factors": [f.coeffs.tolist() for f in factors],
            "roundtrip_error": err,
        },
        args.out,
    )
    return 0


def _cmd_build(args) -> int:
    spec = load_spec(args.spec)
    model = build_network(spec, args.S, args.N, args.M)
    save_model(model, args.out)
    _emit(
        {
            "out": args.out,
            "layers": model.J,
            "certified_bound": certified_bound(spec, args.N),
            "feature_offset": feature_offset(model),
            "param_bound": bounds_mod.param_count(args.S, spec.d, spec.m, args.N),
        },
        None,
    )
    return 0


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    try:
        point = np.asarray([float(v) for v in args.x.split(",")], dtype=float)
    except ValueError as exc:
        raise UsageError(f"--x: expected comma-separated floats ({exc})") from exc
    pred = forward(model, point)
    _emit(
        {
            "prediction": pred,
            "clipped": float(np.clip(pred, -model.M, model.M)),
        },
        None,
    )
    return 0


def _cmd_approx(args) -> int:
    model = load_model(args.model)
    spec = load_spec(args.spec)
    measured = sup_error(model, spec, args.n_probe, args.seed)
    _emit(
        {
            "certified_bound": certified_bound(spec, model.N),
            "sup_error": measured,
            "n_probe": args.n_probe,
            "seed": args.seed,
        },
        None,
    )
    return 0


def _cmd_fit(args) -> int:
    spec = load_spec(args.spec)
    M = args.M if args.M is not None else spec.m * spec.sup_bound + args.noise
    N = args.N if args.N is not None else bounds_mod.choose_resolution(
        args.n, min(c.alpha for c in spec.components)
    )
    data = sample_dataset(spec, args.n, args.noise, args.seed, M)
    model = fit_coefficients(
        [c.direction for c in spec.components], args.S, N, M, data,
        ridge_eps=args.ridge_eps,
    )
    save_model(model, args.out)
    err = l2_error(model, spec, args.n_test, args.seed + 10**6)
    _emit(
        {"out": args.out, "n": args.n, "N": N, "M": M, "l2_error": err},
        None,
    )
    return 0


def _cmd_rate(args) -> int:
    doc = _load_json(args.config, "config file")
    ctx = "config file"
    spec_path = get_field(doc, "spec_path", str, ctx)
    config = ExperimentConfig(
        spec=load_spec(spec_path),
        sizes=tuple(get_field(doc, "sizes", list, ctx)),
        trials=get_field(doc, "trials", int, ctx),
        alpha=float(get_field(doc, "alpha", (int, float), ctx)),
        noise_level=float(get_field(doc, "noise_level", (int, float), ctx)),
        base_seed=get_field(doc, "base_seed", int, ctx),
        M=float(get_field(doc, "M", (int, float), ctx)),
        S=get_field(doc, "S", int, ctx),
        ridge_eps=float(doc.get("ridge_eps", 1e-2)),
        n_test=int(doc.get("n_test", 16384)),
        out_path=get_field(doc, "out_path", str, ctx),
        spec_path=spec_path,
    )
    result = rate_experiment(config)
    atomic_write_text(config.out_path, rate_csv_text(result))
    _emit(
        {
            "out": config.out_path,
            # JSON has no nan: absent values (skipped slope, too few sizes
            # for a standard error) are emitted as null
            "slope": _finite_or_none(result.fitted_slope),
            "stderr": _finite_or_none(result.slope_stderr),
            "slope_skipped": result.slope_skipped,
            "failures": len(result.failures),
        },
        None,
    )
    return 0


def _finite_or_none(value):
    return value if math.isfinite(value) else None


def _cmd_minimax(args) -> int:
    family = minimax_mod.make_family(args.N_hat, args.alpha, args.G, args.L, args.seed)
    atomic_write_text(args.out, minimax_mod.family_to_json(family))
    words = family.codewords
    pairs = [
        (minimax_mod.hamming(words[i], words[j]), i, j)
        for i in range(len(words))
        for j in range(i + 1, len(words))
    ]
    dists = [p[0] for p in pairs]
    norm_sq = minimax_mod.bump_l2_norm_sq(args.alpha, args.G, args.L)
    # the bumps have disjoint supports, so the squared distance is exactly
    # the Hamming distance times one bump norm; quadrature-check the
    # binding (minimum-Hamming) pair instead of all pairs
    _, bi, bj = min(pairs)
    min_sep = minimax_mod.lebesgue_l2_sq(
        lambda u: minimax_mod.pattern_values(words[bi], family, u)
        - minimax_mod.pattern_values(words[bj], family, u),
        args.quadrature_n,
    )
    required_sep = 0.25 * args.N_hat ** (-2.0 * args.alpha) * norm_sq
    _emit(
        {
            "out": args.out,
            "codewords": len(family.codewords),
            "required_codewords": minimax_mod.required_count(args.N_hat),
            "min_hamming": min(dists),
            "required_hamming": minimax_mod.required_distance(args.N_hat),
            "min_separation_sq": min_sep,
            "required_separation_sq": required_sep,
            "separation_ok": bool(min_sep >= required_sep * (1.0 - 1e-3)),
        },
        None,
    )
    return 0


def _cmd_bounds(args) -> int:
    report = bounds_mod.bound_report(args.S, args.d, args.m, args.N, args.B)
    text = report.to_json()
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="ridgekit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factorize", help="split a filter file into short factors")
    p.add_argument("--filter", required=True, help="JSON file with field 'coeffs'")
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_factorize)

    p = sub.add_parser("build", help="construct a network from a spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("eval", help="evaluate a model at one point")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True, help="comma-separated coordinates")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("approx", help="certified bound and measured sup error")
    p.add_argument("--model", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--n-probe", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_approx)

    p = sub.add_parser("fit", help="sample data from a spec and fit coefficients")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--S", type=int, default=2)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--M", type=float, default=None)
    p.add_argument("--ridge-eps", type=float, default=0.0)
    p.add_argument("--n-test", type=int, default=4096)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("rate", help="learning-rate sweep from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_rate)

    p = sub.add_parser("minimax", help="generate a packing family with verification")
    p.add_argument("--N-hat", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--G", type=float, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quadrature-n", type=int, default=20000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_minimax)

    p = sub.add_parser("bounds", help="evaluate the standard bound set")
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bounds)

    return parser


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        RootFindingError,
        SingularSystemError,
        DivergenceError,
        minimax_mod.PackingSearchError,
        OverflowError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
