import argparse
import asyncio
import logging
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

from app.analysis.decompose import GnWitness, sd_decompose, sd_test, usc_sd_approx
from app.analysis.dnorm import bounds, check_certificate, to_simple_dcs
from app.analysis.func import PatternFn, is_continuous, is_lsc, is_usc
from app.analysis.oscillation import Flavor, derivation, envelopes, full_index
from app.analysis.witness import prop15_demo, verify_witness
from app.config import Settings, get_settings
from app.errors import (
    EngineError,
    PreconditionError,
    SchemaError,
    SoundnessFault,
    UsageError,
    WitnessFailure,
)
from app.models import Command, CorpusSpec, Report
from app.rationals import format_rat, parse_rat
from app.services.corpus import corpus_digest, default_spec, generate_corpus
from app.services.oracle import compare_envelopes, compare_trail, oracle_summary
from app.services.serialization import (
    digest,
    load_json,
    parse_certificate,
    parse_function,
    parse_mark,
    parse_space,
    serialize_approx,
    serialize_bounds,
    serialize_index_report,
    serialize_osc_report,
    serialize_prop15,
    serialize_sd_verdict,
    serialize_simple,
    serialize_trail,
    serialize_verdict,
    serialize_witness,
    validate_doc,
)
from app.services.suites import SUITE_NAMES, run_suites
from app.topology.expansion import expand, oracle_envelopes, oracle_trail

logger = logging.getLogger(__name__)

ORACLE_VERBS = (Command.INDEX.value, Command.ENVELOPE.value, Command.ANALYZE.value)


@dataclass
class Outcome:
    results: dict[str, Any] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)


@dataclass
class Inputs:
    """Documents read by a command, in reading order; they feed the report digest."""

    documents: list[Any] = field(default_factory=list)

    def read(self, path: str) -> Any:
        data = load_json(path)
        self.documents.append(data)
        return data

    def function(self, path: str) -> PatternFn:
        return parse_function(self.read(path))


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _rational(text: str) -> Fraction:
    try:
        return parse_rat(text)
    except SchemaError as e:
        raise argparse.ArgumentTypeError(e.message)


def _rational_list(text: str) -> list[Fraction]:
    return [_rational(item.strip()) for item in text.split(",") if item.strip()]


def _positive(eps: Optional[Fraction], flag: str = "--eps") -> Optional[Fraction]:
    if eps is not None and eps <= 0:
        raise UsageError(f"{flag} must be positive, got {eps}")
    return eps


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="baire", description="Oscillation indices, D-norm certificates and SD-decompositions")
    verbs = parser.add_subparsers(dest="verb", required=True)

    analyze = verbs.add_parser(Command.ANALYZE.value, help="rank, index report, D-norm bounds and SD verdict")
    analyze.add_argument("function")
    analyze.add_argument("--eps", type=_rational, default=None, help="tolerance for the SD verdict")

    index = verbs.add_parser(Command.INDEX.value, help="oscillation-set derivation and index")
    index.add_argument("function")
    index.add_argument("--eps", type=_rational, default=None)
    index.add_argument("--flavor", choices=[f.value for f in Flavor], default=Flavor.OSC.value)

    envelope = verbs.add_parser(Command.ENVELOPE.value, help="semicontinuous envelopes and oscillations")
    envelope.add_argument("function")
    envelope.add_argument("--domain", default=None, help="mark document for the domain")

    decompose = verbs.add_parser(Command.DECOMPOSE.value, help="approximate by a simple D-function")
    decompose.add_argument("function")
    decompose.add_argument("--eps", type=_rational, default=None)
    decompose.add_argument("--support", default=None, help="mark document for an open support")
    decompose.add_argument("--n", type=int, default=None, help="index bound on the support")
    decompose.add_argument("--semicontinuous", action="store_true", help="piecewise path for usc/lsc functions")

    cert = verbs.add_parser(Command.CHECK_CERT.value, help="check a D-norm certificate")
    cert.add_argument("function")
    cert.add_argument("certificate")

    simple = verbs.add_parser(Command.SIMPLE_DCS.value, help="simple D-function representation")
    simple.add_argument("function")

    witness = verbs.add_parser(Command.WITNESS.value, help="verify the index-n indicator witness")
    witness.add_argument("--rank", type=int, required=True)
    witness.add_argument("--eps-grid", type=_rational_list, default=None)
    witness.add_argument("--space", default=None, help="space document of rank >= n")

    demo = verbs.add_parser(Command.DEMO_PROP15.value, help="DBSC-but-not-SD rows rank by rank")
    demo.add_argument("--max-rank", type=int, required=True)

    check = verbs.add_parser(Command.CHECK.value, help="run a property suite over the corpus")
    check.add_argument("suite", choices=SUITE_NAMES)
    check.add_argument("--corpus", default="default", help="'default' or a corpus spec document")

    oracle = verbs.add_parser(Command.ORACLE.value, help="recompute a command on the finite expansion")
    oracle.add_argument("--copies", type=int, required=True)
    oracle.add_argument("target", nargs=argparse.REMAINDER)
    return parser


def _index_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    f = inputs.function(args.function)
    if args.eps is None:
        return Outcome({"index": serialize_index_report(full_index(f))})
    trail = derivation(f, _positive(args.eps), Flavor(args.flavor))
    return Outcome({"trail": serialize_trail(trail), "index": trail.index})


def _envelope_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    f = inputs.function(args.function)
    domain = None if args.domain is None else parse_mark(inputs.read(args.domain), f.space)
    return Outcome({"envelopes": serialize_osc_report(envelopes(f, domain))})


def _analyze_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    f = inputs.function(args.function)
    report = full_index(f)
    verdict = sd_test(f, _positive(args.eps))
    return Outcome({
        "rank": f.space.rank,
        "sup_norm": format_rat(f.sup_norm),
        "semicontinuity": {"usc": is_usc(f), "lsc": is_lsc(f), "continuous": is_continuous(f)},
        "index": serialize_index_report(report),
        "bounds": serialize_bounds(bounds(f)),
        "sd": serialize_sd_verdict(verdict),
    })


def _decompose_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    f = inputs.function(args.function)
    eps = _positive(args.eps) or settings.rationals(settings.decompose_tolerance)[0]
    if args.semicontinuous:
        return Outcome({"approximation": serialize_approx(usc_sd_approx(f, eps))})
    if args.support is None:
        witness = GnWitness.whole_space(f)
    else:
        support = parse_mark(inputs.read(args.support), f.space)
        n = args.n if args.n is not None else full_index(f, within=support).i_f if not support.is_empty() else 0
        witness = GnWitness(f=f, support=support, n=n)
    return Outcome({"approximation": serialize_approx(sd_decompose(witness, eps))})


def _check_cert_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    f = inputs.function(args.function)
    cert = parse_certificate(inputs.read(args.certificate), f.space)
    verdict = check_certificate(f, cert)
    outcome = Outcome({"verdict": serialize_verdict(verdict)})
    if not verdict.accepted:
        outcome.violations.append(f"{verdict.path} [{verdict.kind.value}]: {verdict.condition}")
    return outcome


def _simple_dcs_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    f = inputs.function(args.function)
    s = to_simple_dcs(f)
    outcome = Outcome({"simple": serialize_simple(s)})
    if s.evaluate().values != f.values:
        outcome.violations.append("simple representation does not evaluate back to f")
    return outcome


def _witness_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    grid = args.eps_grid or settings.rationals(settings.witness_eps_grid)
    space = None if args.space is None else parse_space(inputs.read(args.space))
    return Outcome({"witness": serialize_witness(verify_witness(args.rank, grid, space))})


def _demo_prop15_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    report = prop15_demo(args.max_rank)
    outcome = Outcome({"prop15": serialize_prop15(report)})
    if not report.conclusion:
        outcome.violations.append("conclusion flag is not set")
    return outcome


def _corpus_spec(source: str, inputs: Inputs, settings: Settings) -> CorpusSpec:
    if source == "default":
        spec = default_spec(settings)
        inputs.documents.append(spec.model_dump())
        return spec
    return validate_doc(CorpusSpec, inputs.read(source))


def _check_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    corpus = generate_corpus(_corpus_spec(args.corpus, inputs, settings))
    results = asyncio.run(run_suites([args.suite], corpus, settings))
    outcome = Outcome({
        "corpus": {"size": len(corpus), "digest": corpus_digest(corpus)},
        "suites": [{"name": r.name, "checked": r.checked, "violations": len(r.violations)} for r in results],
    })
    for r in results:
        outcome.violations += [f"{r.name}: {v}" for v in r.violations]
    return outcome


def _oracle_command(args, inputs: Inputs, settings: Settings) -> Outcome:
    if args.copies < 2:
        raise UsageError(f"--copies must be at least 2, got {args.copies}")
    target = list(args.target)
    if target[:1] == ["--"]:
        target = target[1:]
    if not target or target[0] not in ORACLE_VERBS:
        raise UsageError(f"oracle supports {', '.join(ORACLE_VERBS)}")
    inner = build_parser().parse_args(target)
    f = inputs.function(inner.function)
    copies = args.copies
    outcome = Outcome({"verb": inner.verb, "copies": copies})

    if inner.verb == Command.ENVELOPE.value:
        if inner.domain is None:
            symbolic = envelopes(f)
            outcome.violations += compare_envelopes(f, copies)
        else:
            domain = parse_mark(inputs.read(inner.domain), f.space)
            symbolic = envelopes(f, domain)
            found = oracle_envelopes(expand(f.space, copies), f.values, domain.bits)
            for name in ("upper", "lower", "uosc", "osc", "oosc"):
                if getattr(symbolic, name).values != getattr(found, name):
                    outcome.violations.append(f"{name} differs from the expansion at {copies} copies")
        outcome.results["envelopes"] = serialize_osc_report(symbolic)
    elif inner.verb == Command.INDEX.value and inner.eps is not None:
        eps = _positive(inner.eps)
        flavor = Flavor(inner.flavor)
        trail = oracle_trail(expand(f.space, copies), f.values, eps, upper_flavor=flavor is Flavor.OOSC)
        outcome.results["symbolic_index"] = derivation(f, eps, flavor).index
        outcome.results["oracle_index"] = len(trail) - 2
        outcome.violations += compare_trail(f, eps, flavor, copies)
    else:
        summary = oracle_summary(f, copies)
        outcome.results.update(summary)
        if summary["indices"] != summary["symbolic_indices"]:
            outcome.violations.append(f"indices differ from the expansion at {copies} copies")
    return outcome


COMMANDS = {
    Command.ANALYZE.value: _analyze_command,
    Command.INDEX.value: _index_command,
    Command.ENVELOPE.value: _envelope_command,
    Command.DECOMPOSE.value: _decompose_command,
    Command.CHECK_CERT.value: _check_cert_command,
    Command.SIMPLE_DCS.value: _simple_dcs_command,
    Command.WITNESS.value: _witness_command,
    Command.DEMO_PROP15.value: _demo_prop15_command,
    Command.CHECK.value: _check_command,
    Command.ORACLE.value: _oracle_command,
}

FILE_ARGS = ("function", "certificate", "domain", "support", "space", "corpus", "target")


def _flags(args: argparse.Namespace) -> dict[str, Any]:
    flags = {}
    for key, value in sorted(vars(args).items()):
        if key in FILE_ARGS:
            continue
        if isinstance(value, Fraction):
            value = format_rat(value)
        elif isinstance(value, list):
            value = [format_rat(v) if isinstance(v, Fraction) else v for v in value]
        flags[key] = value
    return flags


def _target_flags(args: argparse.Namespace) -> dict[str, Any]:
    if args.verb != Command.ORACLE.value:
        return {}
    target = [t for t in args.target if t != "--"]
    try:
        return _flags(build_parser().parse_args(target))
    except UsageError:
        return {}


def run_command(argv: list[str], settings: Optional[Settings] = None) -> Report:
    settings = settings or get_settings()
    inputs = Inputs()
    args: Optional[argparse.Namespace] = None
    try:
        args = build_parser().parse_args(argv)
        logger.info(f"{args.verb}: starting")
        outcome = COMMANDS[args.verb](args, inputs, settings)
        exit_code = 1 if outcome.violations else 0
    except (SchemaError, UsageError, PreconditionError, ValueError) as e:
        logger.error(f"rejected input: {e}")
        outcome = Outcome({"error": type(e).__name__}, [str(e)])
        exit_code = 2
    except (SoundnessFault, WitnessFailure) as e:
        logger.error(f"property violation: {e}")
        outcome = Outcome({"error": type(e).__name__}, [str(e)])
        exit_code = 1
    except EngineError as e:
        logger.error(f"rejected input: {type(e).__name__}: {e}")
        outcome = Outcome({"error": type(e).__name__}, [str(e)])
        exit_code = 2

    flags = {} if args is None else {**_flags(args), "target": _target_flags(args)}
    report = Report(
        command=list(argv),
        inputs_digest=digest({"flags": flags, "documents": inputs.documents, "argv": list(argv) if args is None else []}),
        results=outcome.results,
        violations=outcome.violations,
        ok=not outcome.violations,
        exit_code=exit_code,
    )
    logger.info(f"{argv[0] if argv else '<none>'}: exit {exit_code}, {len(report.violations)} violations")
    return report


def main() -> None:
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    report = run_command(sys.argv[1:], settings)
    print(report.model_dump_json(indent=2))
    sys.exit(report.exit_code)


if __name__ == "__main__":
    main()
