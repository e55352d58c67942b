"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 numerical error (singularity, estimation, tuning).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import errors
from .core import MaskedMatrix, apply_standardizer
from .evaluation import METHODS, run_benchmark
from .imputer import (
    ConditionalGaussian,
    ImputationConfig,
    coefficients,
    conditional_gaussian,
    confidence_region,
    fit_model,
    impute_with_model,
)
from .io import CsvConvention, ModelFile, read_csv, read_model, write_csv, write_mask_csv, write_model
from .missing import MaskSpec, mcar_mask, monotone_corner_mask
from .tuner import DEFAULT_ALPHAS, AlphaGrid, tune_alpha

log = logging.getLogger("dimv")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3

_NUMERIC = (errors.EstimationError, errors.SingularityError, errors.DomainError,
            errors.TuningError, np.linalg.LinAlgError)
_DATA = (errors.DimensionError, errors.ValidationError, errors.ScoringError,
         errors.ModelVersionError, errors.GenerationError, errors.SelectionError,
         OSError, ValueError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "y", "t"):
        return True
    if v in ("0", "false", "no", "n", "f"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {s!r}")


def _floats(s: str) -> list[float]:
    return [float(t) for t in s.split(",") if t.strip()]


def _ints(s: str) -> list[int]:
    return [int(t) for t in s.split(",") if t.strip()]


def parse_rates(s: str) -> list[float]:
    """"0.1..0.8" (step 0.1), "0.1..0.8:0.2" or a comma list."""
    if ".." not in s:
        return _floats(s)
    span, _, step = s.partition(":")
    lo, hi = (float(t) for t in span.split(".."))
    step = float(step) if step else 0.1
    count = int(round((hi - lo) / step)) + 1
    return [round(lo + i * step, 10) for i in range(count)]


def _conv(args) -> CsvConvention:
    return CsvConvention(na_token=args.na, has_header=not args.no_header)


def _cfg(args, alpha: float = 0.0) -> ImputationConfig:
    return ImputationConfig(tau=args.tau, k=args.k, alpha=alpha,
                            init_with_zero=getattr(args, "init_zero", False))


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def cmd_estimate(args):
    train = read_csv(args.train, _conv(args))
    model = fit_model(train)
    write_model(ModelFile.from_model(model, {"standardize": True, "estimator": "dper"}), args.out)
    log.info("wrote model with p=%d to %s", model.p, args.out)


def cmd_impute(args):
    conv = _conv(args)
    test = read_csv(args.test, conv)
    train = read_csv(args.train, conv) if args.train else None
    if args.model:
        model = read_model(args.model).to_model()
    elif train is not None:
        model = fit_model(train)
    else:
        raise errors.ValidationError("impute needs --train or --model")
    alpha = args.alpha
    if args.tune:
        if train is None:
            raise errors.ValidationError("--tune needs --train")
        grid = AlphaGrid(tuple(args.grid), args.subsample, args.seed)
        alpha = tune_alpha(train, _cfg(args), grid).alpha
        log.info("tuned alpha = %g", alpha)
    cfg = _cfg(args, alpha)
    result = impute_with_model(model, test, cfg)
    write_csv(result.imputed, args.out, conv)
    if args.coeffs:
        _dump({"space": "standardized", "alpha": alpha,
               "reports": [c.to_dict() for c in result.coefficients]}, args.coeffs)


def cmd_tune(args):
    train = read_csv(args.train, _conv(args))
    grid = AlphaGrid(tuple(args.grid), args.subsample, args.seed)
    res = tune_alpha(train, _cfg(args), grid)
    _dump({"alpha": res.alpha,
           "scores": [{"alpha": a, "rmse": (s if np.isfinite(s) else None)}
                      for a, s in res.scores.items()]})


def cmd_simulate(args):
    conv = _conv(args)
    data = read_csv(getattr(args, "in"), conv)
    if data.has_missing:
        raise errors.ValidationError("simulate expects a complete input dataset")
    n, p = data.shape
    if args.mcar is not None:
        missing = mcar_mask(n, p, args.mcar, args.seed)
    else:
        if args.height is None or args.width is None:
            raise errors.ValidationError("--corner needs --height and --width")
        missing = monotone_corner_mask(n, args.height, args.width, args.corner,
                                       args.share, args.seed, p=p)
    write_csv(data.with_mask(~missing), args.out, conv)
    write_mask_csv(missing, args.mask_out)


def cmd_benchmark(args):
    conv = _conv(args)
    data = read_csv(args.data, conv)
    if data.has_missing:
        raise errors.ValidationError("benchmark needs a complete dataset (ground truth)")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.corner:
        specs = [MaskSpec("monotone_corner", fraction=r, image_height=args.height,
                          image_width=args.width, affected_share=args.share)
                 for r in parse_rates(args.corner)]
    else:
        specs = [MaskSpec("mcar", rate=r) for r in parse_rates(args.rates)]
    grid = AlphaGrid(tuple(args.grid), args.subsample, args.seed) if args.tune else None
    report = run_benchmark(
        data.values, specs, methods, _cfg(args, args.alpha), args.report,
        dataset_id=args.dataset_id or Path(args.data).stem, tune_grid=grid,
        test_fraction=args.test_fraction, corrupt=args.corrupt, seed=args.seed,
        workers=args.workers,
    )
    for r in report.rows:
        mask = r.mask.get("rate", r.mask.get("fraction"))
        score = "failed" if r.rmse is None else f"{r.rmse:.6g}"
        print(f"{r.method:24s} {r.mask['kind']:16s} {mask:<6} rmse={score} "
              f"time={r.wall_time_seconds:.3f}s")


def cmd_explain(args):
    model = read_model(args.model).to_model()
    rep = coefficients(model.sigma, args.feature, args.observed, args.alpha)
    _dump({"space": "standardized", **rep.to_dict()})


def cmd_confidence(args):
    model = read_model(args.model).to_model()
    row = read_csv(args.row, _conv(args))
    if row.n != 1:
        raise errors.DimensionError(f"--row must hold exactly one sample, got {row.n}")
    std = model.standardizer
    x = apply_standardizer(std, row)
    obs = np.flatnonzero(x.mask[0])
    mis = np.flatnonzero(~x.mask[0])
    if mis.size == 0:
        raise errors.ValidationError("the row has no missing entries")
    cond = conditional_gaussian(model.sigma, obs, mis, x.values[0, obs], alpha=0.0)
    s = std.scales[mis]
    orig = ConditionalGaussian(cond.mean * s + std.means[mis], cond.cov * np.outer(s, s), 0.0)
    spec = confidence_region(orig, args.level)
    _dump({"missing_features": mis.tolist(), **spec.to_dict()})


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dimv", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, tuning=False, selection=False):
        p.add_argument("--na", default="NA", help="missing-value token")
        p.add_argument("--no-header", action="store_true")
        p.add_argument("--seed", type=int, default=0)
        if selection:
            p.add_argument("--tau", type=float, default=0.0)
            p.add_argument("--k", type=int, default=1)
        if tuning:
            p.add_argument("--grid", type=_floats, default=list(DEFAULT_ALPHAS))
            p.add_argument("--subsample", type=int, default=None)

    p = sub.add_parser("estimate", help="fit standardizer + DPER covariance")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("impute", help="impute a test CSV")
    p.add_argument("--train")
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float, default=0.0)
    g.add_argument("--tune", action="store_true")
    p.add_argument("--init-zero", type=_bool, default=False)
    p.add_argument("--coeffs")
    common(p, tuning=True, selection=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("tune", help="grid-search the ridge alpha")
    p.add_argument("--train", required=True)
    common(p, tuning=True, selection=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="corrupt a complete CSV")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mcar", type=float)
    g.add_argument("--corner", type=float)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--share", type=float, default=0.5)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="RMSE sweep over missing rates")
    p.add_argument("--data", required=True)
    p.add_argument("--rates", default="0.1..0.8")
    p.add_argument("--corner", help="corner fractions instead of MCAR rates")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--share", type=float, default=0.5)
    p.add_argument("--methods", default="dimv,mean",
                   help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--report")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--tune", action="store_true")
    p.add_argument("--init-zero", type=_bool, default=False)
    p.add_argument("--test-fraction", type=float, default=0.0)
    p.add_argument("--corrupt", choices=("both", "test"), default="both")
    p.add_argument("--dataset-id")
    common(p, tuning=True, selection=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("explain", help="ridge coefficients for one feature")
    p.add_argument("--model", required=True)
    p.add_argument("--feature", type=int, required=True)
    p.add_argument("--observed", type=_ints, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("confidence", help="confidence ellipsoid for a row's missing block")
    p.add_argument("--model", required=True)
    p.add_argument("--row", required=True)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--na", default="NA")
    p.add_argument("--no-header", action="store_true")
    p.set_defaults(func=cmd_confidence)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except _NUMERIC as exc:
        print(f"dimv: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _DATA as exc:
        print(f"dimv: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
