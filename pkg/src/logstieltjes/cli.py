"""Command line: classify, build and verify Stieltjes classes for ``Y = a^X``.

Exit codes: 0 success, 1 usage or input error, 2 a certificate failed,
3 an ``Unknown``/``Boundary`` verdict under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from . import classifier, distributions, qseries, stieltjes
from .errors import (
    DomainError,
    HypothesisError,
    ModeError,
    RangeError,
    StieltjesError,
    SupportError,
)
from .numeric import Scalar, format_rational, parse_rational

COMMANDS = ("classify", "perturb", "verify", "moments", "emit", "selftest")
USAGE_ERRORS = (DomainError, ModeError, RangeError, SupportError, HypothesisError)

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_UNDECIDED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    dist_spec: Optional[dict] = None
    base_a: Optional[Fraction] = None
    epsilons: List[Fraction] = field(default_factory=list)
    max_k: int = 10
    target: Fraction = Fraction(1, 10**12)
    horizon: Optional[int] = None
    output: Optional[Path] = None
    format: str = "json"
    route: str = "auto"
    strict: bool = False
    digits: int = 20

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        if any(abs(e) > 1 for e in self.epsilons):
            raise RangeError("every epsilon must lie in [-1, 1]")
        if self.target <= 0:
            raise DomainError("target must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise DomainError("horizon must be at least 1")
        if self.max_k < 0:
            raise DomainError("max-k must be nonnegative")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="logstieltjes", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON file with defaults for any option below")
    parser.add_argument("--dist", help="heine | poisson | table, inline JSON, or a JSON file path")
    parser.add_argument("--q")
    parser.add_argument("--lambda", dest="lam")
    parser.add_argument("--values", help="comma-separated table weights")
    parser.add_argument("--a", help="base a, as p/q or decimal")
    parser.add_argument("--eps", action="append", default=None,
                        help="epsilon in [-1, 1]; repeat or comma-separate")
    parser.add_argument("--max-k", type=int)
    parser.add_argument("--target", help="tolerance, e.g. 1e-12")
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--output", type=Path)
    parser.add_argument("--format", choices=("json", "csv"))
    parser.add_argument("--route", choices=("auto", "family", "w", "beta", "all"))
    parser.add_argument("--strict", action="store_true", default=None)
    parser.add_argument("--digits", type=int)
    return parser


def _dist_spec(args, cfg: dict) -> Optional[dict]:
    raw = args.dist if args.dist is not None else cfg.get("dist")
    if raw is None:
        return None
    if isinstance(raw, dict):
        spec = dict(raw)
    elif raw.lstrip().startswith("{"):
        spec = json.loads(raw)
    elif raw in ("heine", "poisson", "table"):
        spec = {"kind": raw}
    else:
        path = Path(raw)
        if not path.exists():
            raise DomainError(f"no such distribution kind or file: {raw}")
        spec = json.loads(path.read_text())
    for key, value in (("q", args.q), ("lambda", args.lam)):
        if value is not None:
            spec[key] = value
        elif key in cfg:
            spec.setdefault(key, cfg[key])
    values = args.values or cfg.get("values")
    if values is not None:
        spec["values"] = values.split(",") if isinstance(values, str) else list(values)
    return spec


def parse_config(argv: Sequence[str]) -> RunConfig:
    args = build_parser().parse_args(argv)
    cfg = json.loads(args.config.read_text()) if args.config else {}

    def pick(name, default=None):
        value = getattr(args, name)
        if value is None:
            value = cfg.get(name.replace("_", "-"), cfg.get(name, default))
        return value

    eps_raw = args.eps if args.eps is not None else cfg.get("eps", [])
    if isinstance(eps_raw, str):
        eps_raw = [eps_raw]
    epsilons = [parse_rational(e) for chunk in eps_raw for e in str(chunk).split(",") if e.strip()]
    a = pick("a")
    target = pick("target", "1e-12")
    output = pick("output")
    return RunConfig(
        command=args.command,
        dist_spec=_dist_spec(args, cfg),
        base_a=parse_rational(str(a)) if a is not None else None,
        epsilons=epsilons,
        max_k=int(pick("max_k", 10)),
        target=parse_rational(str(target)),
        horizon=pick("horizon"),
        output=Path(output) if output else None,
        format=pick("format", "json"),
        route=pick("route", "auto"),
        strict=bool(pick("strict", False)),
        digits=int(pick("digits", 20)),
    )


# -- command implementations ------------------------------------------------


def _need_dist(config: RunConfig) -> distributions.DiscretePMF:
    if config.dist_spec is None:
        raise DomainError("this command needs --dist")
    return distributions.from_json(config.dist_spec)


def _need_a(config: RunConfig) -> Scalar:
    if config.base_a is None:
        raise DomainError("this command needs --a")
    return Scalar(config.base_a)


def _out(x: Scalar, digits: int) -> str:
    return format_rational(x.value) if x.is_exact else x.to_decimal(digits)


def cmd_classify(config: RunConfig):
    d = _need_dist(config)
    a = _need_a(config)
    route = config.route
    if route == "auto":
        route = "family" if isinstance(d, (distributions.Poisson, distributions.Heine)) else "w"
    results = {}
    if route in ("family", "all"):
        results["family"] = classifier.classify_family(d, a)
    if a.compare(1) == 1:
        if route in ("w", "all"):
            results["w"] = classifier.test_condition_W(d, a, config.horizon or classifier.DEFAULT_HORIZON)
        if route in ("beta", "all"):
            results["beta"] = classifier.classify_by_beta(d, a, min(config.horizon or 200, 200))
    elif route in ("w", "beta"):
        results[route] = classifier.classify_family(d, a)
    if not results:
        raise DomainError(f"route {route!r} does not apply")
    primary = next(iter(results.values()))
    payload = primary.to_json()
    if len(results) > 1:
        payload["routes"] = {k: v.to_json() for k, v in results.items()}
    undecided = any(r.verdict in (classifier.Verdict.UNKNOWN, classifier.Verdict.BOUNDARY)
                    for r in results.values())
    status = EXIT_UNDECIDED if (config.strict and undecided) else EXIT_OK
    return payload, None, status


def _perturbation(config: RunConfig, d) -> stieltjes.Perturbation:
    t = distributions.LogTransformSpec(qseries.BaseParam(_need_a(config)))
    return stieltjes.build_perturbation(d, t, scan_horizon=max(config.horizon or 0, stieltjes.DEFAULT_SCAN_HORIZON))


def cmd_perturb(config: RunConfig):
    d = _need_dist(config)
    p = _perturbation(config, d)
    horizon = config.horizon or 30
    rows = []
    for j in range(horizon + 1):
        pj = distributions.pmf(d, j).value
        rows.append({"j": j, "p_j": _out(pj, config.digits), "h_j": _out(p.normalized(j), config.digits)})
    payload = {
        "a": format_rational(config.base_a),
        "distribution": d.to_json(),
        "argmax_index": p.argmax_index,
        "normalizer": _out(p.normalizer(), config.digits),
        "decay_certificate": p.decay.value,
        "warnings": p.warnings,
        "rows": rows,
    }
    table = [["j", "p_j", "h_j"]] + [[r["j"], r["p_j"], r["h_j"]] for r in rows]
    return payload, table, EXIT_OK


def cmd_verify(config: RunConfig):
    a = _need_a(config)
    certs = [stieltjes.base_moment_sum(a, k, config.target) for k in range(config.max_k + 1)]
    failed = any(c.verdict is stieltjes.MomentVerdict.VIOLATED for c in certs)
    payload = {
        "a": format_rational(config.base_a),
        "target": float(config.target),
        "certificates": [c.to_json() for c in certs],
    }
    if config.dist_spec is not None:
        d = _need_dist(config)
        p = _perturbation(config, d)
        members = []
        for eps in config.epsilons or [Fraction(0)]:
            report = stieltjes.verify_member(stieltjes.class_member(p, eps), config.max_k, config.target,
                                             horizon=config.horizon or stieltjes.DEFAULT_SCAN_HORIZON)
            failed = failed or not report.passed
            members.append(report.to_json())
        payload["distribution"] = d.to_json()
        payload["members"] = members
    table = [["k", "truncation_index", "partial_sum_abs_upper", "tail_bound", "verdict"]] + [
        [c.k, c.truncation_index, repr(float(c.partial_sum.abs_upper())), repr(float(c.tail_bound)), c.verdict.value]
        for c in certs
    ]
    return payload, table, EXIT_FAILED if failed else EXIT_OK


def cmd_moments(config: RunConfig):
    d = _need_dist(config)
    t = distributions.LogTransformSpec(qseries.BaseParam(_need_a(config)))
    rows = []
    for k in range(config.max_k + 1):
        m = distributions.moment_of_Y(d, t, k, config.target)
        rows.append({"k": k, "moment": _out(m.value, config.digits), "bound": float(m.bound)})
    payload = {"a": format_rational(config.base_a), "distribution": d.to_json(), "moments": rows}
    table = [["k", "E[Y^k]", "bound"]] + [[r["k"], r["moment"], repr(r["bound"])] for r in rows]
    return payload, table, EXIT_OK


def cmd_emit(config: RunConfig):
    d = _need_dist(config)
    p = _perturbation(config, d)
    epsilons = config.epsilons or [Fraction(-1), Fraction(0), Fraction(1)]
    members = [stieltjes.class_member(p, e) for e in epsilons]
    horizon = config.horizon or 30
    header = ["j", "p_j", "h_j"] + [f"g_j({format_rational(e)})" for e in epsilons] + ["bound"]
    table, rows = [header], []
    for j in range(horizon + 1):
        pj = distributions.pmf(d, j).value
        gs = [m.mass(j) for m in members]
        bound = max([pj.radius] + [g.radius for g in gs])
        table.append([j, pj.to_decimal(config.digits), p.normalized(j).to_decimal(config.digits)]
                     + [g.to_decimal(config.digits) for g in gs] + [repr(float(bound))])
        rows.append({
            "j": j,
            "p_j": _out(pj, config.digits),
            "h_j": _out(p.normalized(j), config.digits),
            "g_j": {format_rational(e): _out(g, config.digits) for e, g in zip(epsilons, gs)},
            "bound": float(bound),
        })
    payload = {
        "a": format_rational(config.base_a),
        "distribution": d.to_json(),
        "epsilons": [format_rational(e) for e in epsilons],
        "rows": rows,
    }
    return payload, table, EXIT_OK


def run_selftest(seed: int = 20261018) -> List[dict]:
    """A fast pass over the library's invariants."""
    rng = random.Random(seed)
    checks = []

    def record(name, ok, detail=""):
        checks.append({"check": name, "passed": bool(ok), "detail": detail})

    ok = True
    for _ in range(40):
        q = Fraction(rng.randint(1, 9), 10)
        t = Fraction(rng.randint(-9, 9), rng.randint(1, 5))
        n = rng.randint(1, 15)
        ok = ok and qseries.verify_euler_identity(q, t, n).equal
    record("finite Euler identity, 40 random cases", ok)

    prefix = [s.value for s in stieltjes.moment_partial_sums(2, 0, 4)]
    record("S_0 partial sums for a = 2", prefix == [1, -1, Fraction(1, 3), Fraction(-1, 21), Fraction(1, 315)],
           ", ".join(map(format_rational, prefix)))

    certs = [stieltjes.base_moment_sum(Fraction(5, 2), k, Fraction(1, 10**30)) for k in range(11)]
    record("S_k vanish for a = 5/2, k <= 10",
           all(c.verdict is stieltjes.MomentVerdict.VANISHES for c in certs))

    for a in (2, 3, Fraction(5, 2)):
        record(f"Euler product vanishes at a^k for a = {a}",
               all(qseries.euler_product(a, Scalar(a) ** k, k + 3) == 0 for k in range(6)))

    heine = distributions.Heine(2, Fraction(1, 2))
    p = stieltjes.build_perturbation(heine, distributions.LogTransformSpec(qseries.BaseParam(2)))
    for eps in (-1, 1):
        report = stieltjes.verify_member(stieltjes.class_member(p, eps), 5, Fraction(1, 10**10), horizon=60)
        record(f"Heine(q=1/2, lambda=2), a=2, eps={eps} member", report.passed)

    m1, m2 = stieltjes.class_member(p, Fraction(1, 2)), stieltjes.class_member(p, Fraction(-1, 2))
    record("members at +eps and -eps average to the base pmf",
           all((m1.factor(j) + m2.factor(j)) / 2 == 1 for j in range(40)))

    cases = [(3, 2, classifier.Verdict.EXISTS), (2, 2, classifier.Verdict.EXISTS),
             (2, 1, classifier.Verdict.NOT_EXISTS), (Fraction(3, 2), 2, classifier.Verdict.NOT_EXISTS)]
    record("log-Heine family criterion",
           all(classifier.classify_family(distributions.Heine(lam, Fraction(1, 2)), a).verdict is v
               for a, lam, v in cases))

    table = distributions.Table([Fraction(1, 2), Fraction(1, 8), Fraction(1, 4), Fraction(1, 8)])
    lc = distributions.check_log_concavity(table, 5)
    record("log-concavity counterexample fails at j = 1", lc.first_violation == 1)
    return checks


def cmd_selftest(config: RunConfig):
    checks = run_selftest()
    table = [["check", "passed", "detail"]] + [[c["check"], c["passed"], c["detail"]] for c in checks]
    ok = all(c["passed"] for c in checks)
    return {"checks": checks, "passed": ok}, table, EXIT_OK if ok else EXIT_FAILED


HANDLERS = {
    "classify": cmd_classify,
    "perturb": cmd_perturb,
    "verify": cmd_verify,
    "moments": cmd_moments,
    "emit": cmd_emit,
    "selftest": cmd_selftest,
}


def _render(payload, table, fmt: str) -> str:
    if fmt == "csv":
        if table is None:
            table = [["key", "value"]] + [[k, json.dumps(v)] for k, v in payload.items()]
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(table)
        return buf.getvalue()
    return json.dumps(payload, indent=2) + "\n"


def run(config: RunConfig) -> int:
    payload, table, status = HANDLERS[config.command](config)
    text = _render(payload, table, config.format)
    if config.output:
        config.output.write_text(text)
    else:
        sys.stdout.write(text)
    return status


def _error(exc: Exception, code: str) -> None:
    sys.stdout.write(json.dumps({"error": {"code": code, "message": str(exc)}}, indent=2) + "\n")


def _attach_values(argv: List[str]) -> List[str]:
    # let "--eps -1" or "--target -..." through instead of reading them as flags
    out, i = [], 0
    while i < len(argv):
        if argv[i].startswith("--") and "=" not in argv[i] and i + 1 < len(argv) \
                and argv[i + 1][:1] == "-" and argv[i + 1][1:2].isdigit():
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = _attach_values(list(sys.argv[1:] if argv is None else argv))
    try:
        config = parse_config(argv)
        return run(config)
    except UsageError as exc:
        _error(exc, "UsageError")
        return EXIT_USAGE
    except json.JSONDecodeError as exc:
        _error(exc, "UsageError")
        return EXIT_USAGE
    except USAGE_ERRORS as exc:
        _error(exc, exc.code)
        return EXIT_USAGE
    except StieltjesError as exc:
        _error(exc, exc.code)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
