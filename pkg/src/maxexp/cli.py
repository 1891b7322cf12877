"""Command-line interface.

Every command prints a JSON summary on stdout and writes tables to files.
Exit codes: 0 success, 1 usage error, 2 data error, 3 limit exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .baselines import METHOD_KINDS, BinarizationMethod, apply_method_matrix, calibrate
from .data_io import (
    PredictionFile,
    align,
    load_method,
    read_matrix,
    read_predictions,
    save_method,
    write_csv,
    write_predictions,
)
from .evaluation import DEFAULT_PERMUTATIONS, calibration_curve, permutation_test, prevalence_table, score_predictions
from .exceptions import InputError, MaxExpError, UsageError
from .metrics import parse_score
from .optimizer import MaxExpConfig, maxexp_matrix, maxexp_select
from .oracle import OracleLimits, enumerated_pmf, exact_expected_score, exhaustive_best_set

SUPERVISED = ("threshold", "species-threshold", "topk", "conformal")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(summary):
    json.dump(summary, sys.stdout, indent=2, default=_json_default)
    sys.stdout.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _n_jobs(threads):
    return threads if threads else -1


def _maxexp_config(args, score=None):
    return MaxExpConfig(
        score=parse_score(score or args.score),
        search_mode="first-max" if args.first_max else "full-scan",
        orientation=args.orientation,
        fbeta_shortcut=args.fbeta_shortcut,
    )


def _parse_method_token(token):
    """``"threshold:0.5"`` -> ("threshold", {"t": 0.5}); bare supervised names have no params."""
    name, _, value = token.partition(":")
    if name != "maxexp" and name not in METHOD_KINDS:
        raise UsageError(f"unknown method {name!r}; expected maxexp or one of {', '.join(METHOD_KINDS)}")
    if not value:
        return name, {}
    try:
        if name in ("threshold",):
            return name, {"t": float(value)}
        if name == "topk":
            return name, {"k": int(value)}
        if name == "conformal":
            return name, {"alpha": float(value)}
        if name == "sse":
            return name, {"rounding": value}
    except ValueError:
        raise UsageError(f"bad parameter in method token {token!r}") from None
    raise UsageError(f"method {name!r} takes no inline parameter")


def _calibration_split(args):
    if not (args.calibration_probs and args.calibration_truth):
        return None
    probs = read_matrix(args.calibration_probs, "probability")
    truth = align(probs, read_matrix(args.calibration_truth, "occurrence"))
    return probs, truth


def _resolve_method(name, params, score, args, split, orientation):
    """Return a fitted BinarizationMethod (calibrating on ``split`` when needed)."""
    method = BinarizationMethod(name, params)
    if method.is_fitted:
        return method
    if split is None:
        raise UsageError(
            f"method {name!r} needs fitted parameters: run `calibrate` and pass --params, "
            "or give --calibration-probs and --calibration-truth"
        )
    kw = {"alpha": params["alpha"]} if "alpha" in params else {}
    return calibrate(name, split[0].values, split[1].values, score, orientation, **kw).method


# -- commands -----------------------------------------------------------------


def cmd_binarize(args):
    probs = read_matrix(args.probs, "probability")
    summary = {"command": "binarize", "method": args.method, "n_sites": len(probs.site_ids), "output": args.out}
    if args.method == "maxexp":
        cfg = _maxexp_config(args)
        results = maxexp_matrix(probs.values, cfg, n_jobs=_n_jobs(args.threads))
        indicator = np.zeros(probs.shape, dtype=bool)
        unit_ids = probs.site_ids if cfg.orientation == "sample" else probs.species_ids
        for row, res in enumerate(results):
            if cfg.orientation == "sample":
                indicator[row, list(res.selected)] = True
            else:
                indicator[list(res.selected), row] = True
        summary.update(
            score=cfg.score.token,
            orientation=cfg.orientation,
            search_mode=cfg.search_mode,
            units=[{"id": uid, "k": r.k_star, "expected_score": r.expected_score} for uid, r in zip(unit_ids, results)],
        )
        descriptor = {"method": "maxexp", "search_mode": cfg.search_mode, "orientation": cfg.orientation}
    else:
        if args.params:
            method = load_method(args.params)
            if method.kind != args.method:
                raise UsageError(f"--params holds a {method.kind!r} method, not {args.method!r}")
        else:
            params = {}
            if args.t is not None:
                params["t"] = args.t
            if args.k is not None:
                params["k"] = args.k
            if args.method == "conformal":
                params["alpha"] = args.alpha
            if args.method == "sse":
                params["rounding"] = args.rounding
            method = _resolve_method(args.method, params, args.score, args, _calibration_split(args), args.orientation)
        indicator = apply_method_matrix(method, probs.values, args.orientation)
        summary.update(score=parse_score(args.score).token, orientation=args.orientation, params=method.params)
        descriptor = method.to_dict()
    summary["set_sizes"] = np.count_nonzero(indicator, axis=1).tolist()
    preds = PredictionFile.from_indicator(indicator, probs.site_ids, probs.species_ids, {"descriptor": descriptor})
    write_predictions(preds, args.out, method=args.method, score=parse_score(args.score).token)
    _emit(summary)


def cmd_calibrate(args):
    if args.method not in SUPERVISED:
        raise UsageError(f"calibrate supports {', '.join(SUPERVISED)}, not {args.method!r}")
    probs = read_matrix(args.probs, "probability")
    truth = align(probs, read_matrix(args.truth, "occurrence"))
    kw = {"alpha": args.alpha} if args.method == "conformal" else {}
    report = calibrate(args.method, probs.values, truth.values, args.objective, args.orientation, **kw)
    save_method(report, args.out, fitted_on=args.probs)
    _emit({"command": "calibrate", "output": args.out, **report.to_dict(fitted_on=args.probs)})


def cmd_evaluate(args):
    preds = read_predictions(args.predictions)
    truth_m = read_matrix(args.truth, "occurrence")
    if set(preds.species_ids) != set(truth_m.species_ids) or set(preds.site_ids) != set(truth_m.site_ids):
        raise InputError("prediction and occurrence files cover different sites or species")
    site_pos = {s: i for i, s in enumerate(truth_m.site_ids)}
    species_pos = {s: i for i, s in enumerate(truth_m.species_ids)}
    rows = [site_pos[s] for s in preds.site_ids]
    cols = [species_pos[s] for s in preds.species_ids]
    truth = truth_m.values[np.ix_(rows, cols)]
    indicator = preds.to_indicator()
    scores = [parse_score(s) for s in args.scores.split(",")]
    unit_ids = preds.site_ids if args.orientation == "sample" else preds.species_ids
    vectors = [score_predictions(indicator, truth, s, args.orientation) for s in scores]
    if args.out:
        header = ["unit_id", *[s.token for s in scores]]
        write_csv(args.out, header, [[uid, *[repr(float(v.per_unit[i])) for v in vectors]] for i, uid in enumerate(unit_ids)])
    if args.prevalence:
        table = prevalence_table(indicator, truth)
        log_pred, log_true = table.log1p()
        write_csv(
            args.prevalence,
            ["species_id", "predicted_prevalence", "true_prevalence", "log1p_predicted", "log1p_true"],
            [[sp, int(p), int(t), repr(float(lp)), repr(float(lt))] for sp, p, t, lp, lt in zip(preds.species_ids, table.predicted, table.true, log_pred, log_true)],
        )
    _emit({"command": "evaluate", "orientation": args.orientation, "means": {s.token: v.mean for s, v in zip(scores, vectors)}})


def cmd_compare(args):
    tokens = [t for t in (args.methods or "").split(",") if t]
    if not tokens:
        raise UsageError("--methods must list at least one method")
    scores = [parse_score(s) for s in args.scores.split(",") if s]
    if not scores:
        raise UsageError("--scores must list at least one score")
    probs = read_matrix(args.probs, "probability")
    truth = align(probs, read_matrix(args.truth, "occurrence")).values
    split = _calibration_split(args)
    parsed = [_parse_method_token(t) for t in tokens]
    n_jobs = _n_jobs(args.threads)

    per_unit = {}
    for token, (name, params) in zip(tokens, parsed):
        for spec in scores:
            if (token, spec.token) in per_unit:
                continue
            if name == "maxexp":
                results = maxexp_matrix(probs.values, _maxexp_config(args, spec), n_jobs=n_jobs)
                units = np.zeros(probs.shape if args.orientation == "sample" else probs.shape[::-1], dtype=bool)
                for row, res in enumerate(results):
                    units[row, list(res.selected)] = True
                indicator = units if args.orientation == "sample" else units.T
            else:
                method = _resolve_method(name, params, spec, args, split, args.orientation)
                indicator = apply_method_matrix(method, probs.values, args.orientation)
            per_unit[token, spec.token] = score_predictions(indicator, truth, spec, args.orientation).per_unit

    reference = next((t for t, (name, _) in zip(tokens, parsed) if name == "maxexp"), None)
    header = ["method"]
    for spec in scores:
        header += [spec.token, f"{spec.token}_p"]
    rows, table = [], []
    for i, token in enumerate(tokens):
        row, entry = [token], {"method": token}
        for spec in scores:
            vec = per_unit[token, spec.token]
            mean = float(np.mean(vec))
            p = None
            if reference is not None and i != tokens.index(reference):
                p = permutation_test(per_unit[reference, spec.token], vec, args.n_permutations, args.seed).p_value
            row += [repr(mean), "" if p is None else repr(p)]
            entry[spec.token] = {"mean": mean, "p_value": p}
        rows.append(row)
        table.append(entry)
    if args.out:
        write_csv(args.out, header, rows)
    _emit({
        "command": "compare",
        "orientation": args.orientation,
        "reference": reference,
        "n_permutations": args.n_permutations,
        "seed": args.seed,
        "output": args.out,
        "table": table,
    })


def cmd_curve(args):
    probs = read_matrix(args.probs, "probability")
    truth = align(probs, read_matrix(args.truth, "occurrence"))
    curve = calibration_curve(probs.values, truth.values, args.bins)
    rows = list(curve.rows())
    if args.out:
        header = list(rows[0])
        write_csv(args.out, header, [[_csv_cell(r[h]) for h in header] for r in rows])
    _emit({"command": "curve", "bins": args.bins, "output": args.out, "curve": rows})


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_oracle(args):
    probs = read_matrix(args.probs, "probability")
    spec = parse_score(args.score)
    limits = OracleLimits(args.max_species)
    out = []
    for site, eta in zip(probs.site_ids, probs.values):
        if args.query == "best-set":
            chosen, value = exhaustive_best_set(eta, spec, limits)
            out.append({"site_id": site, "set": [probs.species_ids[i] for i in chosen], "expected_score": value})
        elif args.query == "expected":
            wanted = [s for s in (args.set or "").split(",") if s]
            unknown = [s for s in wanted if s not in probs.species_ids]
            if unknown:
                raise UsageError(f"unknown species in --set: {', '.join(unknown)}")
            idx = [probs.species_ids.index(s) for s in wanted]
            out.append({"site_id": site, "expected_score": exact_expected_score(idx, eta, spec, limits)})
        else:
            out.append({"site_id": site, "pmf": enumerated_pmf(eta, limits).tolist()})
    _emit({"command": "oracle", "query": args.query, "score": spec.token, "sites": out})


def cmd_bench(args):
    rng = np.random.default_rng(args.seed)
    eta = rng.uniform(size=args.n)
    cfg = MaxExpConfig(
        score=parse_score(args.score),
        search_mode="first-max" if args.first_max else "full-scan",
        fbeta_shortcut=args.fbeta_shortcut,
    )
    start = time.perf_counter()
    res = maxexp_select(eta, cfg)
    elapsed = time.perf_counter() - start
    _emit({"command": "bench", "n": args.n, "score": cfg.score.token, "fbeta_shortcut": cfg.fbeta_shortcut,
           "search_mode": cfg.search_mode, "k_star": res.k_star, "expected_score": res.expected_score, "seconds": elapsed})


# -- parser -------------------------------------------------------------------


def _add_maxexp_flags(p):
    p.add_argument("--score", default="f1", help="f1, f2, fbeta:<beta>, jaccard or tss")
    p.add_argument("--orientation", choices=("sample", "macro"), default="sample")
    p.add_argument("--first-max", action="store_true", help="stop the scan at the first expected-score maximum")
    p.add_argument("--full-scan", dest="first_max", action="store_false", help="evaluate every set size (default)")
    p.add_argument("--fbeta-shortcut", action="store_true", help="quadratic-time evaluation for F-beta scores")
    p.add_argument("--threads", type=int, default=0, help="worker processes (default: all cores)")


def _add_calibration_split(p):
    p.add_argument("--calibration-probs", help="probabilities of the calibration split")
    p.add_argument("--calibration-truth", help="occurrences of the calibration split")


def build_parser():
    parser = _Parser(prog="maxexp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file supplying default values for any flag")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("binarize", help="turn probabilities into predicted species sets")
    p.add_argument("probs")
    p.add_argument("--method", default="maxexp", choices=("maxexp", *METHOD_KINDS))
    p.add_argument("-o", "--out", required=True)
    _add_maxexp_flags(p)
    p.add_argument("--t", type=float, help="global threshold")
    p.add_argument("--k", type=int, help="top-k size")
    p.add_argument("--alpha", type=float, default=0.1, help="conformal miscoverage level")
    p.add_argument("--rounding", default="half-even", choices=("half-even", "floor", "ceil"))
    p.add_argument("--params", help="fitted-method JSON written by `calibrate`")
    _add_calibration_split(p)
    p.set_defaults(func=cmd_binarize)

    p = sub.add_parser("calibrate", help="fit a supervised method on a labelled split")
    p.add_argument("probs")
    p.add_argument("truth")
    p.add_argument("--method", required=True, choices=SUPERVISED)
    p.add_argument("--objective", default="f1")
    p.add_argument("--orientation", choices=("sample", "macro"), default="sample")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="score a prediction file against occurrences")
    p.add_argument("predictions")
    p.add_argument("truth")
    p.add_argument("--scores", default="f1")
    p.add_argument("--orientation", choices=("sample", "macro"), default="sample")
    p.add_argument("-o", "--out", help="per-unit score CSV")
    p.add_argument("--prevalence", help="per-species prevalence CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="compare methods with one-sided permutation tests")
    p.add_argument("probs")
    p.add_argument("truth")
    p.add_argument("--methods", default="", help="comma list, e.g. maxexp,sse,threshold:0.5,topk")
    p.add_argument("--scores", default="f1")
    p.add_argument("--n-permutations", type=int, default=DEFAULT_PERMUTATIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out")
    _add_maxexp_flags(p)
    _add_calibration_split(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("curve", help="calibration curve of probabilities against occurrences")
    p.add_argument("probs")
    p.add_argument("truth")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("oracle", help="brute-force enumeration for small species counts")
    p.add_argument("query", choices=("best-set", "expected", "pmf"))
    p.add_argument("probs")
    p.add_argument("--score", default="f1")
    p.add_argument("--set", help="comma list of species ids (query 'expected')")
    p.add_argument("--max-species", type=int, default=OracleLimits.max_species)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="time one optimisation on random probabilities")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--score", default="tss")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--first-max", action="store_true")
    p.add_argument("--fbeta-shortcut", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def _load_config(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        with open(known.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"{known.config}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{known.config}: invalid JSON ({exc.msg})") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"{known.config}: config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        config = _load_config(argv)
        if config:
            for sp in parser._subparsers._group_actions[0].choices.values():
                sp.set_defaults(**config)
        args = parser.parse_args(argv)
        args.func(args)
    except MaxExpError as exc:
        print(f"maxexp: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
