"""Command-line entry point: ``randrank {simulate,exact,tau,scores,diagnose}``.

Exit codes: 0 success, 1 usage error, 2 validation or capacity error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

from randrank.errors import ValidationError
from randrank.exact import exact_statistic_distribution
from randrank.montecarlo import RANK_MODES, SimConfig, normality_report, run_simulation
from randrank.rankstats import StatisticKind
from randrank.rules import RuleSpec, check_n
from randrank.scores import (
    RankVector,
    ScoreFamily,
    condition_diagnostics,
    family_scores,
    normalize,
    spike_scores,
)
from randrank.tau import tau_limit_distance, tau_mean, tau_pmf

SCHEMA = "randrank/1"
EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fraction(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json(payload: dict) -> str:
    return json.dumps({"schema": SCHEMA, **payload}, indent=2) + "\n"


def _emit(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _rule(args) -> RuleSpec:
    return RuleSpec.from_name(args.rule, args.alpha, args.beta)


def _sample_csv(sample) -> str:
    return _csv(["value"], ([repr(float(x))] for x in sample))


def cmd_simulate(args) -> int:
    config = SimConfig(
        rule=_rule(args),
        n=check_n(args.n),
        replications=args.m,
        seed=args.seed,
        statistic=StatisticKind.parse(args.stat),
        score_family=ScoreFamily.parse(args.scores),
        rank_mode=args.rank_mode,
    )
    sample = run_simulation(config)
    if args.sample_out:
        _emit(_sample_csv(sample), args.sample_out)
    if args.format == "csv":
        _emit(_sample_csv(sample), args.out)
    else:
        report = normality_report(sample)
        _emit(_json({**report.to_dict(), "config": config.echo()}), args.out)
    return EXIT_OK


def cmd_exact(args) -> int:
    rule = _rule(args)
    kind = StatisticKind.parse(args.stat)
    s = normalize(family_scores(args.scores, RankVector.identity(check_n(args.n))))
    dist = exact_statistic_distribution(rule, kind, s)
    if args.format == "csv":
        rows = ([repr(float(v)), _fraction(p)] for v, p in zip(dist.support, dist.probs))
        _emit(_csv(["value", "prob"], rows), args.out)
    else:
        _emit(_json({
            "rule": rule.kind.value,
            "alpha": rule.alpha,
            "beta": rule.beta,
            "n": args.n,
            "scores": ScoreFamily.parse(args.scores).value,
            "statistic": kind.value,
            "support": [float(v) for v in dist.support],
            "probs": [_fraction(p) for p in dist.probs],
        }), args.out)
    return EXIT_OK


def cmd_tau(args) -> int:
    pmf = tau_pmf(args.n)
    if args.format == "csv":
        _emit(_csv(["k", "p_k"], ([k, repr(float(p))] for k, p in zip(pmf.support, pmf.p))), args.out)
    else:
        payload = {
            "n": pmf.n,
            "k": pmf.support.tolist(),
            "p_k": pmf.p.tolist(),
            "mean": tau_mean(pmf.n),
            "limit_distance": tau_limit_distance(pmf.n),
        }
        if pmf.exact is not None:
            payload["p_k_exact"] = [_fraction(p) for p in pmf.exact]
        _emit(_json(payload), args.out)
    return EXIT_OK


def cmd_scores(args) -> int:
    if args.ranks:
        ranks = RankVector(tuple(int(r) for r in args.ranks.split(",")))
    elif args.n:
        ranks = RankVector.identity(args.n)
    else:
        raise UsageError("scores: give --n or --ranks")
    raw = family_scores(args.family, ranks)
    s = normalize(raw).s
    rows = [[j, r, repr(float(a)), repr(float(x))] for j, (r, a, x) in
            enumerate(zip(ranks.ranks, raw.a, s), start=1)]
    if args.format == "csv":
        _emit(_csv(["j", "rank", "a", "s"], rows), args.out)
    else:
        _emit(_json({
            "family": ScoreFamily.parse(args.family).value,
            "n": ranks.n,
            "ranks": list(ranks.ranks),
            "a": raw.a.tolist(),
            "s": s.tolist(),
        }), args.out)
    return EXIT_OK


def _parse_ns(args) -> list[int]:
    if args.ns:
        return [int(x) for x in args.ns.split(",")]
    if args.log2_min > args.log2_max:
        raise UsageError("diagnose: --log2-min exceeds --log2-max")
    return [2**k for k in range(args.log2_min, args.log2_max + 1)]


def cmd_diagnose(args) -> int:
    family = spike_scores if args.family == "spike" else ScoreFamily.parse(args.family)
    report = condition_diagnostics(family, _parse_ns(args))
    cols = report.COLUMNS
    if args.format == "csv":
        rows = ([*(repr(getattr(r, c)) if c != "n" else r.n for c in cols), report.verdict]
                for r in report.rows)
        _emit(_csv([*cols, "verdict"], rows), args.out)
    else:
        _emit(_json({
            "family": report.family,
            "rows": [{c: getattr(r, c) for c in cols} for r in report.rows],
            "band_ratio": report.band_ratio(),
            "verdict": report.verdict,
        }), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="randrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def output_flags(p, default="json"):
        p.add_argument("--format", choices=("csv", "json"), default=default)
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    def rule_flags(p):
        p.add_argument("--rule", required=True,
                       help="complete | random-allocation (ra) | tbd | wei")
        p.add_argument("--alpha", type=int, default=0, help="Wei urn alpha")
        p.add_argument("--beta", type=int, default=0, help="Wei urn beta")

    p = sub.add_parser("simulate", help="Monte Carlo sample and normality report")
    rule_flags(p)
    p.add_argument("--scores", default="wilcoxon")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True, help="replications")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stat", default="plain", help="plain | centered | tbd")
    p.add_argument("--rank-mode", choices=RANK_MODES, default="random")
    p.add_argument("--sample-out", default=None, help="also write the sample as CSV here")
    output_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exact", help="exact statistic distribution by enumeration")
    rule_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--scores", default="wilcoxon")
    p.add_argument("--stat", default="plain")
    output_flags(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("tau", help="tail-length distribution of the truncated binomial design")
    p.add_argument("--n", type=int, required=True)
    output_flags(p, default="csv")
    p.set_defaults(func=cmd_tau)

    p = sub.add_parser("scores", help="raw and normalized scores")
    p.add_argument("--family", default="wilcoxon")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--ranks", default=None, help="comma-separated rank permutation")
    output_flags(p, default="csv")
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser("diagnose", help="score regularity diagnostics over a range of n")
    p.add_argument("--family", default="wilcoxon",
                   help="median | wilcoxon | vdw | savage | spike (constructed violation)")
    p.add_argument("--ns", default=None, help="comma-separated list of even n")
    p.add_argument("--log2-min", type=int, default=6)
    p.add_argument("--log2-max", type=int, default=14)
    output_flags(p, default="csv")
    p.set_defaults(func=cmd_diagnose)
    return parser


def parse_and_dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"randrank: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
