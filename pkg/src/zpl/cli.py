"""Command-line entry point: ``zpl <subcommand> [flags]``.

Each run writes one report (CSV or JSON) to ``--out`` or stdout.  Exit codes:
0 success, 1 validation error, 2 precision exhaustion, 3 probe-audit violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import gmpy2
from gmpy2 import mpfr

from . import digits as dg
from . import probe as pb
from . import report as rp
from . import sums
from .errors import (
    DigitUncertain,
    PrecisionExhausted,
    QuadratureNonConvergent,
    ValidationError,
    ZetaPointError,
    ZPLError,
)
from .exact import as_exact, parse_alpha
from .grid import GridCache, zeta_grid
from .hp import PrecisionContext, workprec
from .quad import Window

SUBCOMMANDS = (
    "compare", "zeta-sum", "bernoulli-sum", "sine-sum", "special-value", "normality",
    "digits", "ergodic", "discrepancy", "gap-profile", "probe-step1", "probe-em",
    "probe-stationary", "probe-derivative", "sweep", "cache",
)

# Flag defaults; applied after the optional --config file so that explicit
# flags override the file and the file overrides these.
DEFAULTS = {
    "k": 1,
    "N": "1000",
    "bits": 128,
    "workers": 1,
    "format": None,
    "gamma": "1/10",
    "seed": 0,
    "sigma": "0",
    "U": "1/4",
    "kind": "second",
    "m": 9,
    "h": -4,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        sys.stderr.write(f"\nerror: {message}\n")
        raise SystemExit(1)


@dataclass
class RunConfig:
    subcommand: str
    args: argparse.Namespace
    precision: PrecisionContext
    output_path: str | None
    output_format: str
    cache_dir: str | None
    workers: int = 1
    seed: int = 0
    timing: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.workers < 1:
            raise ValidationError("--workers must be >= 1")
        if self.output_format not in ("csv", "json"):
            raise ValidationError("--format must be csv or json")


def _n_list(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    try:
        values = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"--N expects integers separated by commas, got {text!r}") from None
    if not values:
        raise ValidationError("--N is empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("progression")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--base", type=int, help="integer base b (d = 1/log b)")
    src.add_argument("--d", help="step d as a decimal or p/q")
    src.add_argument("--ratio", help="co-prime u/v with u > v >= 2 (d = 1/log(u/v), theta = 0)")
    shift = g.add_mutually_exclusive_group()
    shift.add_argument("--alpha", help="alpha: integer, p/q, sqrtD, root:c0,..,ck:lo,hi or decimal")
    shift.add_argument("--theta", help="shift theta as a decimal or p/q")
    g.add_argument("--k", type=int)
    g.add_argument("--N", help="N, or a comma-separated list (digit count L / horizon H where relevant)")
    r = common.add_argument_group("run")
    r.add_argument("--bits", type=int, help="target precision in bits (default 128)")
    r.add_argument("--workers", type=int)
    r.add_argument("--format", choices=("csv", "json"))
    r.add_argument("--out", help="output path (default stdout)")
    r.add_argument("--cache", help="grid cache directory (default $ZPL_CACHE_DIR)")
    r.add_argument("--gamma", help="exponent for the gap profile (default 1/10)")
    r.add_argument("--seed", type=int)
    r.add_argument("--config", help="JSON file with flag values; explicit flags win")
    r.add_argument("--timing", action="store_true", default=None, help="record runtime_ms (breaks byte-identity)")
    p = common.add_argument_group("probes")
    p.add_argument("--sigma", help="real part for probe-step1 (<= 0)")
    p.add_argument("--M", type=int, help="outer length for probe-step1 (default 4N)")
    p.add_argument("--m", type=int, help="phase index m")
    p.add_argument("--h", type=int, help="frequency h")
    p.add_argument("--U", help="relative half-width of the stationary window")
    p.add_argument("--H-cut", dest="H_cut", type=int, help="h cut-off for probe-em")
    p.add_argument("--kind", choices=("first", "second"))
    p.add_argument("--window", help="a,b for probe-derivative")
    p.add_argument("--dump", help="also write the plain-text digit dump here")

    parser = _Parser(prog="zpl", description="Zeta sums on vertical progressions and their Bernoulli duals.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        if name == "cache":
            c = sub.add_parser(name, parents=[common], help="grid cache maintenance")
            c.add_argument("action", choices=("stats", "vacuum"))
            c.add_argument("--keep-bits", dest="keep_bits", type=int)
        else:
            sub.add_parser(name, parents=[common])
    return parser


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    values = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(values, dict):
            raise ValidationError("config file must hold a JSON object")
    for key, value in values.items():
        key = key.replace("-", "_")
        if key in ("subcommand", "config"):
            continue
        if not hasattr(args, key):
            raise ValidationError(f"unknown config key {key!r}")
        if getattr(args, key) is None:
            setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    args.timing = bool(args.timing)
    return args


def make_config(argv) -> RunConfig:
    args = _merge_config(build_parser().parse_args(argv))
    fmt = args.format or ("csv" if args.subcommand in ("sweep", "gap-profile") else "json")
    cache = args.cache or (str(GridCache.default_root()) if GridCache.default_root() else None)
    return RunConfig(
        subcommand=args.subcommand,
        args=args,
        precision=PrecisionContext(target_bits=int(args.bits)),
        output_path=args.out,
        output_format=fmt,
        cache_dir=cache,
        workers=int(args.workers),
        seed=int(args.seed),
        timing=args.timing,
    )


# -- parameter assembly ---------------------------------------------------

def _exact_decimal(text, flag: str):
    try:
        return parse_alpha(str(text))
    except ValidationError as exc:
        raise ValidationError(f"{flag}: {exc}") from None


def sum_params(a: argparse.Namespace, N: int, k: int | None = None) -> sums.SumParams:
    k = a.k if k is None else k
    if a.ratio is not None:
        try:
            u, v = (int(t) for t in str(a.ratio).split("/"))
        except ValueError:
            raise ValidationError("--ratio expects u/v") from None
        return sums.rational_ratio_params(u, v, k, N)
    if a.base is not None:
        if a.theta is not None:
            return sums.SumParams.raw(k, sums._inv_log(Fraction(a.base)), _exact_decimal(a.theta, "--theta"), N)
        return sums.SumParams.base(k, int(a.base), a.alpha if a.alpha is not None else "1", N)
    if a.d is not None:
        if a.alpha is not None:
            raise ValidationError("--alpha needs --base; use --theta with --d")
        theta = _exact_decimal(a.theta, "--theta") if a.theta is not None else as_exact(0)
        return sums.SumParams.raw(k, _exact_decimal(a.d, "--d"), theta, N)
    raise ValidationError("one of --base, --d or --ratio is required")


def _alpha_and_base(a) -> tuple:
    if a.base is None:
        raise ValidationError("--base is required")
    return parse_alpha(str(a.alpha if a.alpha is not None else "1")), int(a.base)


class Run:
    """Records produced by one subcommand plus the cache keys they consumed."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.records: list[dict] = []
        self.columns: list[str] | None = None
        self.violation = False
        self.started = time.perf_counter()

    @property
    def ctx(self) -> PrecisionContext:
        return self.cfg.precision

    def runtime(self):
        return round((time.perf_counter() - self.started) * 1000) if self.cfg.timing else None

    def add(self, params: dict, body: dict, cache_keys=(), body_key="report") -> None:
        params = dict(params, bits=self.ctx.target_bits, seed=self.cfg.seed)
        self.records.append(
            rp.record(params, body, self.ctx.target_bits, cache_keys, self.runtime(), body_key=body_key)
        )

    def cache(self):
        return GridCache(self.cfg.cache_dir) if self.cfg.cache_dir else None

    def grid_for(self, p: sums.SumParams, N: int):
        return zeta_grid(p.k, p.d_value(self.ctx), N, self.ctx, workers=self.cfg.workers, cache=self.cache())


# -- subcommands ----------------------------------------------------------

def _report_body(r: sums.SumReport) -> dict:
    body = {
        "zeta_side": r.zeta_side,
        "bernoulli_side": r.bernoulli_side,
        "difference": r.difference,
        "normalized": r.normalized,
        "h_count": r.h_count,
        "statistic": r.statistic,
        "boundary_hit": r.boundary_hit,
    }
    if r.params.k == 0:
        body.update(sine_side=r.sine_side, gn_envelope=r.gn_envelope, sine_defect=r.sine_defect)
    return body


def _limit(p: sums.SumParams, ctx) -> object:
    """Known limit of the statistic for integer alpha in base presentation, else None."""
    if p.presentation == "base" and p.alpha.rational is not None and p.alpha.rational.denominator == 1:
        return sums.special_value_reference(p.k, p.b, ctx)
    return None


def cmd_compare(run: Run) -> None:
    a = run.cfg.args
    Ns = _n_list(a.N)
    grid = run.grid_for(sum_params(a, max(Ns)), max(Ns))
    for N in Ns:
        p = sum_params(a, N)
        r = sums.compare(p, run.ctx, grid=grid)
        run.add(p.describe(), _report_body(r), grid.cache_keys)


def cmd_sweep(run: Run) -> None:
    a = run.cfg.args
    Ns = _n_list(a.N)
    grid = run.grid_for(sum_params(a, max(Ns)), max(Ns))
    run.columns = ["N", "statistic", "limit", "gap_to_limit", "normalized", "difference"]
    for N in Ns:
        p = sum_params(a, N)
        r = sums.compare(p, run.ctx, grid=grid)
        limit = _limit(p, run.ctx)
        body = {"statistic": r.statistic, "normalized": r.normalized, "difference": r.difference, "limit": limit}
        if limit is not None:
            with workprec(r.statistic.precision):
                body["gap_to_limit"] = abs(r.statistic - limit)
        else:
            body["gap_to_limit"] = None
        run.add(p.describe(), body, grid.cache_keys)


def cmd_zeta_sum(run: Run) -> None:
    a = run.cfg.args
    Ns = _n_list(a.N)
    grid = run.grid_for(sum_params(a, max(Ns)), max(Ns))
    for N in Ns:
        p = sum_params(a, N)
        run.add(p.describe(), {"zeta_side": sums.zeta_side_sum(p, grid, run.ctx)}, grid.cache_keys)


def cmd_bernoulli_sum(run: Run) -> None:
    for N in _n_list(run.cfg.args.N):
        p = sum_params(run.cfg.args, N)
        rng = sums.h_range(p, run.ctx)
        body = {"bernoulli_side": sums.bernoulli_side_sum(p, run.ctx), "h_count": rng.count, "boundary_hit": rng.boundary_hit}
        run.add(p.describe(), body)


def cmd_sine_sum(run: Run) -> None:
    for N in _n_list(run.cfg.args.N):
        p = sum_params(run.cfg.args, N, k=0)
        rows = sums.sine_terms(p, run.ctx)
        bits = run.ctx.working_bits()
        # per-h terms may exceed their envelope share; the inequality is for the total
        exceed = 0
        with workprec(bits):
            side = sum((r[3] for r in rows), mpfr(0))
            env = sum((r[5] for r in rows), mpfr(0))
            psi = sum((sums._real(r[4], bits) for r in rows), mpfr(0))
            for r in rows:
                if abs(r[3] + sums._real(r[4], bits)) > r[5]:
                    exceed += 1
            defect = abs(side + psi)
        body = {
            "sine_side": side,
            "gn_envelope": env,
            "sine_defect": defect,
            "within_envelope": bool(defect <= env),
            "h_count": len(rows),
            "h_exceedances": exceed,
        }
        run.add(p.describe(), body)


def cmd_special_value(run: Run) -> None:
    a = run.cfg.args
    if a.base is None:
        raise ValidationError("--base is required")
    run.add({"k": a.k, "b": a.base}, {"value": sums.special_value_reference(a.k, a.base, run.ctx)})


def cmd_normality(run: Run) -> None:
    a = run.cfg.args
    Ns = _n_list(a.N)
    grid = run.grid_for(sum_params(a, max(Ns)), max(Ns))
    for N in Ns:
        p = sum_params(a, N)
        body = {"statistic": sums.normality_statistic(p, grid, run.ctx), "limit": _limit(p, run.ctx)}
        run.add(p.describe(), body, grid.cache_keys)


def cmd_digits(run: Run) -> None:
    a = run.cfg.args
    x, b = _alpha_and_base(a)
    L = max(_n_list(a.N))
    prof = dg.expand_digits(x, b, L)
    params = {"alpha": str(x), "b": b, "L": L}
    if a.dump:
        Path(a.dump).write_text(dg.dump_digits(prof))
    devs = dg.frequency_deviation(prof) if L >= 1 else [None] * b
    if run.cfg.output_format == "csv":
        run.columns = ["a", "count", "frequency", "deviation"]
        for digit, count in enumerate(prof.counts):
            freq = Fraction(count, prof.l) if prof.l else None
            run.add(params, {"a": digit, "count": count, "frequency": freq, "deviation": devs[digit]})
        return
    body = {
        "start_index": prof.start_index,
        "integer_digits": "".join(map(str, prof.integer_digits)) if b <= 10 else list(prof.integer_digits),
        "digits": "".join(map(str, prof.digits)) if b <= 10 else list(prof.digits),
        "l": prof.l,
        "counts": list(prof.counts),
        "deviation": devs,
    }
    run.add(params, body)


def cmd_ergodic(run: Run) -> None:
    a = run.cfg.args
    x, b = _alpha_and_base(a)
    for H in _n_list(a.N):
        avg = dg.ergodic_bernoulli_average(x, b, a.k, H, run.ctx)
        run.add({"alpha": str(x), "b": b, "k": a.k, "H": H}, {"average": avg})


def cmd_discrepancy(run: Run) -> None:
    a = run.cfg.args
    x, b = _alpha_and_base(a)
    Hs = _n_list(a.N)
    points = dg.progression_fractions(x, b, max(Hs), run.ctx)
    for H in Hs:
        run.add({"alpha": str(x), "b": b, "H": H}, {"star_discrepancy": dg.star_discrepancy(points[:H])})


def cmd_gap_profile(run: Run) -> None:
    a = run.cfg.args
    x, b = _alpha_and_base(a)
    H = max(_n_list(a.N))
    gamma = _exact_decimal(a.gamma, "--gamma").rational
    if gamma is None or gamma <= 0:
        raise ValidationError("--gamma must be a positive decimal")
    prof = dg.power_gap_profile(x, b, H, gamma, run.ctx)
    run.columns = ["h", "gap", "running_min"]
    params = {"alpha": str(x), "b": b, "H": H, "gamma": gamma}
    for (h, gap), (_, low) in zip(prof.gaps, prof.running_min):
        run.add(params, {"h": h, "gap": gap, "running_min": low})


def _phase_d_theta(a) -> tuple:
    p = sum_params(a, 2, k=0)
    return p.d, p.theta


def _probe(run: Run, name: str, params: dict, lhs, rhs, residual, bound, passed: bool) -> None:
    body = {"probe": name, "lhs": lhs, "rhs": rhs, "residual": residual, "bound": bound, "pass": passed}
    run.add(params, body, body_key=None)
    if not passed:
        run.violation = True


def cmd_probe_step1(run: Run) -> None:
    a = run.cfg.args
    d, theta = _phase_d_theta(a)
    sigma = _exact_decimal(a.sigma, "--sigma")
    for N in _n_list(a.N):
        M = a.M or pb.M_FACTOR * N
        lhs, rhs = pb.step1_sides(sigma, d, theta, N, M, run.ctx)
        res = abs(lhs - rhs)
        params = {"sigma": str(sigma), "d": str(d), "theta": str(theta), "N": N, "M": M, **pb.window_defaults(N)}
        _probe(run, "step1", params, lhs, rhs, res, None, math.isfinite(res))


def cmd_probe_em(run: Run) -> None:
    a = run.cfg.args
    d, theta = _phase_d_theta(a)
    for N in _n_list(a.N):
        H_cut = a.H_cut or math.ceil(pb.window_defaults(N)["H"])
        r = pb.em_step_residual(a.m, N, d, theta, H_cut, run.ctx)
        params = {"m": a.m, "d": str(d), "theta": str(theta), "N": N, "H_cut": H_cut, **pb.window_defaults(N)}
        rhs = r.integral + r.h_sum + r.remainder
        _probe(run, "em_step", params, r.lhs, rhs, r.residual, r.tail_estimate, r.residual <= r.tail_estimate)


def cmd_probe_stationary(run: Run) -> None:
    a = run.cfg.args
    d, theta = _phase_d_theta(a)
    U = _exact_decimal(a.U, "--U")
    spec = pb.PhaseSpec(a.m, d, theta, a.h)
    r = pb.stationary_phase_check(spec, U, run.ctx)
    bits = run.ctx.working_bits()
    with workprec(bits):
        magnitude_gap = abs(abs(r.main_term) - 1 / gmpy2.sqrt(d.at(bits)))
        rhs = r.main_term + r.boundary_terms
        ok = magnitude_gap <= run.ctx.budget(8)
    params = {"m": a.m, "h": a.h, "d": str(d), "theta": str(theta), "U": str(U), "xi": r.xi}
    _probe(run, "stationary_phase", params, r.integral, rhs, r.residual, r.error, bool(ok))
    run.records[-1]["main_term"] = rp.plain(r.main_term, rp.decimal_digits(run.ctx.target_bits))
    run.records[-1]["boundary_terms"] = rp.plain(r.boundary_terms, rp.decimal_digits(run.ctx.target_bits))


def cmd_probe_derivative(run: Run) -> None:
    a = run.cfg.args
    d, theta = _phase_d_theta(a)
    spec = pb.PhaseSpec(a.m, d, theta, a.h)
    if a.window:
        try:
            lo, hi = (Fraction(t) for t in str(a.window).split(","))
        except ValueError:
            raise ValidationError("--window expects a,b") from None
    else:
        with workprec(run.ctx.working_bits()):
            xi = spec.xi()
            lo, hi = (Fraction(*map(int, (xi * f).as_integer_ratio())).limit_denominator(1 << 20) for f in (0.75, 1.25))
    window = Window(lo, hi)
    audit = pb.derivative_test_audit(a.kind, "inv_sqrt", spec, window, run.ctx)
    params = {"kind": a.kind, "m": a.m, "h": a.h, "d": str(d), "theta": str(theta), "window": [lo, hi], "C_audit": pb.C_AUDIT}
    with workprec(audit.bound.precision):
        scaled = pb.C_AUDIT * audit.bound
    _probe(run, "derivative_test", params, audit.integral_abs, None, None, scaled, not audit.violation)


def cmd_cache(run: Run) -> None:
    a = run.cfg.args
    if not run.cfg.cache_dir:
        raise ValidationError("no cache directory: pass --cache or set ZPL_CACHE_DIR")
    cache = GridCache(run.cfg.cache_dir)
    if a.action == "stats":
        rows = cache.stats()
        run.columns = ["file", "k", "precision_bits", "records", "bytes"]
        for row in rows:
            run.records.append(row)
        if not rows:
            run.records.append({"file": None, "k": None, "precision_bits": None, "records": 0, "bytes": 0})
        return
    if a.keep_bits is None:
        raise ValidationError("cache vacuum needs --keep-bits")
    removed = cache.vacuum(a.keep_bits)
    run.records.append({"removed": removed, "keep_bits": a.keep_bits})


HANDLERS = {
    "compare": cmd_compare,
    "zeta-sum": cmd_zeta_sum,
    "bernoulli-sum": cmd_bernoulli_sum,
    "sine-sum": cmd_sine_sum,
    "special-value": cmd_special_value,
    "normality": cmd_normality,
    "digits": cmd_digits,
    "ergodic": cmd_ergodic,
    "discrepancy": cmd_discrepancy,
    "gap-profile": cmd_gap_profile,
    "probe-step1": cmd_probe_step1,
    "probe-em": cmd_probe_em,
    "probe-stationary": cmd_probe_stationary,
    "probe-derivative": cmd_probe_derivative,
    "sweep": cmd_sweep,
    "cache": cmd_cache,
}


def execute(cfg: RunConfig) -> tuple[str, bool]:
    """Run the subcommand and return (rendered report, audit violation flag)."""
    run = Run(cfg)
    HANDLERS[cfg.subcommand](run)
    return rp.render(run.records, cfg.output_format, run.columns), run.violation


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, ZetaPointError):
        exc = exc.cause
    if isinstance(exc, (PrecisionExhausted, DigitUncertain, QuadratureNonConvergent)):
        return 2
    return 1


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
        text, violation = execute(cfg)
    except SystemExit as exc:  # argparse: usage errors and --help
        return exc.code if isinstance(exc.code, int) else 1
    except ZPLError as exc:
        sys.stderr.write(f"zpl: {exc}\n")
        return _exit_code(exc)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 3 if violation else 0


if __name__ == "__main__":
    raise SystemExit(main())
