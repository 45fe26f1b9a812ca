"""
Command Line Interface for geoclt.
"""

import argparse
import os
import sys
import warnings
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .coding_graph import (
    CodingGraph, ConjugacyClass, GraphPath, build_free_group_graph, count_primitive_cycles,
    cycle_to_conjugacy_class, dump_graph, enumerate_cycles, evaluate_path, graph_hash,
    is_primitive, load_graph, trace_power
)
from .errors import GeoCLTError
from .experiments import (
    SAMPLERS, STATISTICS, displacement_defect, estimate_L_sigma, gromov_decay, holder_decay,
    path_cycle_ratios, rn_convergence, run_clt, tau_residual, tv_convergence
)
from .hyperbolic import (
    FuchsianRep, HPoint, dump_representation, load_representation, pair_of_pants_rep
)
from .parry_markov import SeededRng, UniformCycleSampler, build_parry_chain, sample_path
from .reporter import Reporter
from .utils import (
    Defaults, parse_float_list, parse_int_list, parse_pairs, resolve_output_path
)


def _add_graph_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("Graph Source")
    source = group.add_mutually_exclusive_group()
    source.add_argument(
        "--free",
        type=int,
        metavar="N",
        help="Built-in coding graph of the free group of rank N (default: 2)"
    )
    source.add_argument(
        "--graph",
        type=str,
        metavar="FILE",
        help="Graph file (vertices/edge lines)"
    )


def _add_rep_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("Representation")
    source = group.add_mutually_exclusive_group()
    source.add_argument(
        "--pants",
        type=str,
        metavar="L1,L2,L3",
        help="Pair of pants with these boundary lengths (default: 2,2,2)"
    )
    source.add_argument(
        "--matrices",
        type=str,
        metavar="FILE",
        help="Representation file (generators/matrix/basepoint lines)"
    )
    group.add_argument(
        "--basepoint",
        type=str,
        metavar="X,Y",
        help="Basepoint x + iy in the upper half-plane (default: 0,1)"
    )


def _add_output_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("Output Options")
    group.add_argument(
        "--seed",
        type=int,
        default=Defaults.SEED,
        help=f"Random seed (default: {Defaults.SEED})"
    )
    group.add_argument(
        "--out",
        type=str,
        help=f"Report file; relative paths go under ${Defaults.OUTPUT_DIR_ENV} when it is set"
    )
    group.add_argument(
        "--format",
        choices=["json", "csv"],
        default="json",
        help="Report file format (default: json)"
    )
    group.add_argument(
        "--threads",
        type=int,
        default=Defaults.THREADS,
        help="Worker threads; never changes results (default: 1)"
    )


def _add_sampling_options(parser: argparse.ArgumentParser, samples: int,
                          sampler: Optional[str] = "uniform") -> None:
    group = parser.add_argument_group("Sampling")
    group.add_argument(
        "--samples",
        type=int,
        default=samples,
        help=f"Samples per length (default: {samples})"
    )
    if sampler is not None:
        group.add_argument(
            "--sampler",
            choices=SAMPLERS,
            default=sampler,
            help=f"uniform closed paths or Parry-chain paths (default: {sampler})"
        )


def create_parser() -> argparse.ArgumentParser:
    """
    Create and configure the argument parser.

    Returns:
        Configured ArgumentParser object
    """
    parser = argparse.ArgumentParser(
        prog="geoclt",
        description="Counting, sampling and limit-law experiments for free groups acting on the hyperbolic plane",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Vertices, edges and Perron eigenvalue of the F2 coding graph
  geoclt graph info --free 2

  # Exact number of closed paths of length 6
  geoclt count --trace -n 6 --free 2

  # CLT for translation lengths on a pair of pants
  geoclt clt --pants 2,2,2 -n 400 --samples 100000 --seed 7 --out clt.json

  # Exact total variation of the pushforward
  geoclt tv --free 2 --ns 4,6,8,10,12
        """
    )
    parser.add_argument("--version", action="version", version=f"geoclt {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    graph = commands.add_parser("graph", help="Inspect or write a coding graph")
    graph.add_argument("action", choices=["info", "dump"])
    _add_graph_options(graph)
    _add_output_options(graph)
    graph.set_defaults(handler=command_graph)

    rep = commands.add_parser("rep", help="Write a representation file")
    rep.add_argument("action", choices=["dump"])
    _add_rep_options(rep)
    _add_output_options(rep)
    rep.set_defaults(handler=command_rep)

    count = commands.add_parser("count", help="Exact cycle counts")
    kind = count.add_mutually_exclusive_group(required=True)
    kind.add_argument("--trace", action="store_true", help="Based closed paths, Tr M^n")
    kind.add_argument("--primitive", action="store_true", help="Primitive cycles, basepoint forgotten")
    count.add_argument("-n", type=int, required=True, help="Cycle length")
    _add_graph_options(count)
    _add_output_options(count)
    count.set_defaults(handler=command_count)

    enum = commands.add_parser("enumerate", help="List all closed paths of length n")
    enum.add_argument("-n", type=int, required=True, help="Cycle length")
    enum.add_argument("--budget", type=int, default=Defaults.ENUMERATION_BUDGET,
                      help="Largest number of paths to list")
    _add_graph_options(enum)
    _add_output_options(enum)
    enum.set_defaults(handler=command_enumerate)

    sample = commands.add_parser("sample", help="Draw paths")
    law = sample.add_mutually_exclusive_group(required=True)
    law.add_argument("--uniform-cycle", action="store_true", help="Uniform closed paths")
    law.add_argument("--markov", action="store_true", help="Parry-chain paths")
    sample.add_argument("-n", type=int, required=True, help="Path length")
    _add_sampling_options(sample, samples=10, sampler=None)
    _add_graph_options(sample)
    _add_output_options(sample)
    sample.set_defaults(handler=command_sample)

    clt = commands.add_parser("clt", help="Central limit experiment at one length")
    clt.add_argument("-n", type=int, required=True, help="Path length")
    clt.add_argument("--statistic", choices=STATISTICS, default="translation_length",
                     help="Statistic (default: translation_length)")
    clt.add_argument("--primitive-only", action="store_true", help="Reject non-primitive cycles")
    clt.add_argument("--samples-csv", type=str, metavar="FILE",
                     help="Also write the normalized sample as CSV")
    _add_sampling_options(clt, samples=10000)
    _add_graph_options(clt)
    _add_rep_options(clt)
    _add_output_options(clt)
    clt.set_defaults(handler=command_clt)

    decay = commands.add_parser("gromov-decay", help="Self Gromov product exceedances")
    decay.add_argument("--epsilons", type=str, default="0.5", help="Comma separated epsilons")
    decay.add_argument("--ns", type=str, default="50,100,200,400", help="Comma separated lengths")
    _add_sampling_options(decay, samples=10000)
    _add_graph_options(decay)
    _add_rep_options(decay)
    _add_output_options(decay)
    decay.set_defaults(handler=command_gromov_decay)

    tv = commands.add_parser("tv", help="Exact total variation of the class pushforward")
    tv.add_argument("--ns", type=str, default="4,6,8,10,12", help="Comma separated lengths")
    tv.add_argument("--budget", type=int, default=Defaults.ENUMERATION_BUDGET,
                    help="Enumeration budget per length")
    _add_graph_options(tv)
    _add_output_options(tv)
    tv.set_defaults(handler=command_tv)

    rn = commands.add_parser("rn", help="Radon-Nikodym sup deviation")
    rn.add_argument("--pairs", type=str, default="10:5,20:10,30:15,40:20,50:25,60:30",
                    help="Comma separated n:m pairs")
    rn.add_argument("--float", dest="exact", action="store_false",
                    help="Use the floating point Parry chain instead of rational arithmetic")
    _add_graph_options(rn)
    _add_output_options(rn)
    rn.set_defaults(handler=command_rn)

    estimate = commands.add_parser("estimate", help="Estimate L and sigma across lengths")
    estimate.add_argument("--ns", type=str, default="100,200,400", help="Comma separated lengths")
    estimate.add_argument("--statistic", choices=STATISTICS, default="displacement",
                          help="Statistic (default: displacement)")
    _add_sampling_options(estimate, samples=10000, sampler="markov")
    _add_graph_options(estimate)
    _add_rep_options(estimate)
    _add_output_options(estimate)
    estimate.set_defaults(handler=command_estimate)

    ratio = commands.add_parser("ratio", help="Exact paths per closed path")
    ratio.add_argument("--ns", type=str, default="1,2,4,8,16,32", help="Comma separated lengths")
    _add_graph_options(ratio)
    _add_output_options(ratio)
    ratio.set_defaults(handler=command_ratio)

    residual = commands.add_parser("residual", help="Translation length versus displacement residual")
    residual.add_argument("--ns", type=str, default="50,200", help="Comma separated lengths")
    _add_sampling_options(residual, samples=10000, sampler=None)
    _add_graph_options(residual)
    _add_rep_options(residual)
    _add_output_options(residual)
    residual.set_defaults(handler=command_residual)

    holder = commands.add_parser("holder", help="Decay of DF differences with the common prefix")
    holder.add_argument("--ks", type=str, default=",".join(str(k) for k in range(1, 21)),
                        help="Comma separated prefix lengths")
    holder.add_argument("--pairs", type=int, default=500, help="Pairs per prefix length")
    holder.add_argument("--tail", type=int, default=40, help="Continuation length")
    _add_graph_options(holder)
    _add_rep_options(holder)
    _add_output_options(holder)
    holder.set_defaults(handler=command_holder)

    defect = commands.add_parser("defect", help="Gromov products along Parry-chain paths")
    defect.add_argument("--length", type=int, default=200, help="Path length")
    defect.add_argument("--ns", type=str, default="25,50,100,150", help="Comma separated split points")
    _add_sampling_options(defect, samples=2000, sampler=None)
    _add_graph_options(defect)
    _add_rep_options(defect)
    _add_output_options(defect)
    defect.set_defaults(handler=command_defect)

    return parser


def validate_arguments(args: argparse.Namespace) -> None:
    """
    Validate command line arguments.

    Args:
        args: Parsed arguments

    Raises:
        ValueError: If arguments are invalid
    """
    if getattr(args, "free", None) is not None and args.free < 2:
        raise ValueError(f"--free needs a rank >= 2, got {args.free}")
    for name in ("graph", "matrices"):
        path = getattr(args, name, None)
        if path and not os.path.exists(path):
            raise ValueError(f"Path does not exist: {path}")
    if args.threads < 1:
        raise ValueError(f"--threads must be >= 1, got {args.threads}")
    if not 0 <= args.seed < 2**64:
        raise ValueError(f"--seed must be in [0, 2^64), got {args.seed}")
    if getattr(args, "samples", 1) < 1:
        raise ValueError(f"--samples must be >= 1, got {args.samples}")
    if args.format == "csv" and args.command in ("graph", "rep", "count", "enumerate", "sample"):
        raise ValueError(f"--format csv is not available for {args.command}")
    samples_csv = getattr(args, "samples_csv", None)
    if samples_csv:
        parent = os.path.dirname(samples_csv)
        if parent and not os.path.exists(parent):
            raise ValueError(f"Output directory does not exist: {parent}")


def load_graph_source(args: argparse.Namespace) -> CodingGraph:
    if args.graph:
        with open(args.graph, "rb") as f:
            return load_graph(f.read())
    return build_free_group_graph(args.free if args.free is not None else 2)


def load_rep_source(args: argparse.Namespace) -> FuchsianRep:
    basepoint = None
    if args.basepoint:
        values = parse_float_list(args.basepoint)
        if len(values) != 2:
            raise ValueError(f"--basepoint needs two numbers, got {args.basepoint!r}")
        basepoint = HPoint(*values)
    if args.matrices:
        with open(args.matrices, "rb") as f:
            rep = load_representation(f.read())
        if basepoint is not None:
            rep = FuchsianRep(rep.generator_images, basepoint)
        return rep
    lengths = parse_float_list(args.pants) if args.pants else list(Defaults.PANTS_LENGTHS)
    if len(lengths) != 3:
        raise ValueError(f"--pants needs three lengths, got {args.pants!r}")
    return pair_of_pants_rep(*lengths, basepoint=basepoint)


def _with_warnings(action: Callable[[], Any]) -> Tuple[Any, List[str]]:
    """Run action and return its result with the messages of any warnings it raised."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = action()
    return result, [str(w.message) for w in caught]


def _base_config(graph: CodingGraph, **extra: Any) -> Dict[str, Any]:
    config = {"graph_hash": graph_hash(graph), "version": __version__}
    config.update(extra)
    return config


def emit(args: argparse.Namespace, report: Any, notes: Sequence[str] = ()) -> int:
    """
    Print the human summary and write the report file, if any.

    Args:
        args: Parsed arguments
        report: Report dataclass or plain document
        notes: Warning messages raised while building the report

    Returns:
        Exit code 0
    """
    reporter = Reporter()
    document = reporter.to_document(report)
    for message in notes:
        if message not in document["warnings"]:
            document["warnings"].append(message)
    if not isinstance(report, dict):
        report.warnings = document["warnings"]
    print(reporter.format_console_report(document))

    extension = "csv" if args.format == "csv" else "json"
    output_file = resolve_output_path(args.out, f"{args.command}.{extension}")
    if output_file:
        if args.format == "csv":
            reporter.export_csv(report, output_file)
        else:
            reporter.validate(document)
            reporter.export_json(document, output_file)
        print(f"Report exported to: {output_file}")
    return 0


def _write_text(args: argparse.Namespace, text: str, default_name: str) -> int:
    output_file = resolve_output_path(args.out, default_name)
    if output_file:
        with open(output_file, "w", encoding="utf-8") as f:
            f.write(text)
        print(f"Written to: {output_file}")
    else:
        sys.stdout.write(text)
    return 0


def command_graph(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    if args.action == "dump":
        return _write_text(args, dump_graph(graph), "graph.txt")
    chain = build_parry_chain(graph)
    document = {
        "kind": "graph_info",
        "vertices": graph.vertex_count,
        "edges": graph.edge_count,
        "rank": graph.rank,
        "lambda": chain.perron.eigenvalue,
        "aperiodic": True,
        "aperiodicity_exponent": graph.aperiodicity_exponent,
        "max_out_degree": graph.max_out_degree(),
        "config": _base_config(graph),
    }
    return emit(args, document)


def command_rep(args: argparse.Namespace) -> int:
    rep, notes = _with_warnings(lambda: load_rep_source(args))
    for message in notes:
        print(f"Warning: {message}", file=sys.stderr)
    return _write_text(args, dump_representation(rep), "rep.txt")


def command_count(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    if args.trace:
        value, what = trace_power(graph, args.n), "trace"
    else:
        value, what = count_primitive_cycles(graph, args.n), "primitive"
    print(value)
    document = {"kind": "count", "count": what, "n": args.n, "value": value,
                "config": _base_config(graph, n=args.n)}
    output_file = resolve_output_path(args.out, "count.json")
    if output_file:
        reporter = Reporter()
        document = reporter.to_document(document)
        reporter.validate(document)
        reporter.export_json(document, output_file)
        print(f"Report exported to: {output_file}")
    return 0


def _path_row(path: GraphPath) -> Dict[str, Any]:
    return {"start": path.start, "edges": list(path.edges), "word": str(evaluate_path(path))}


def command_enumerate(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    cycles = enumerate_cycles(graph, args.n, budget=args.budget)
    rows = []
    for cycle in cycles:
        row = _path_row(cycle)
        row["class"] = str(cycle_to_conjugacy_class(cycle))
        row["primitive"] = is_primitive(cycle)
        rows.append(row)
    classes = {row["class"] for row in rows}
    document = {"kind": "enumerate", "n": args.n, "total": len(rows), "classes": len(classes),
                "cycles": rows, "config": _base_config(graph, n=args.n, budget=args.budget)}
    return emit(args, document)


def command_sample(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    if args.uniform_cycle:
        sampler = UniformCycleSampler(graph, args.n)
        paths = [sampler.sample(SeededRng(args.seed, i)) for i in range(args.samples)]
        law = "uniform"
    else:
        chain = build_parry_chain(graph)
        paths = [sample_path(chain, args.n, SeededRng(args.seed, i)) for i in range(args.samples)]
        law = "markov"
    rows = [_path_row(path) for path in paths]
    if args.uniform_cycle:
        for row, path in zip(rows, paths):
            row["class"] = str(ConjugacyClass.from_word(evaluate_path(path)))
    document = {"kind": "sample", "n": args.n, "sampler": law, "paths": rows,
                "config": _base_config(graph, n=args.n, samples=args.samples, seed=args.seed,
                                       sampler=law)}
    return emit(args, document)


def command_clt(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    rep, notes = _with_warnings(lambda: load_rep_source(args))
    print(f"Sampling {args.samples:,} paths of length {args.n} ({args.sampler}, {args.statistic})")
    report, more = _with_warnings(lambda: run_clt(
        rep, graph, None, args.n, args.samples, args.seed, args.statistic,
        sampler=args.sampler, primitive_only=args.primitive_only, threads=args.threads,
    ))
    if args.samples_csv:
        Reporter().export_csv(report, args.samples_csv)
        report.normalized_sample_path = args.samples_csv
    return emit(args, report, notes + more)


def command_gromov_decay(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    rep, notes = _with_warnings(lambda: load_rep_source(args))
    report = gromov_decay(rep, graph, None, parse_float_list(args.epsilons), parse_int_list(args.ns),
                          args.samples, args.seed, sampler=args.sampler, threads=args.threads)
    return emit(args, report, notes)


def command_tv(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    return emit(args, tv_convergence(graph, parse_int_list(args.ns), budget=args.budget))


def command_rn(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    return emit(args, rn_convergence(graph, None, parse_pairs(args.pairs), exact=args.exact))


def command_estimate(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    rep, notes = _with_warnings(lambda: load_rep_source(args))
    report = estimate_L_sigma(rep, graph, None, parse_int_list(args.ns), args.samples, args.seed,
                              statistic_kind=args.statistic, sampler=args.sampler,
                              threads=args.threads)
    return emit(args, report, notes)


def command_ratio(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    return emit(args, path_cycle_ratios(graph, parse_int_list(args.ns)))


def command_residual(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    rep, notes = _with_warnings(lambda: load_rep_source(args))
    report = tau_residual(rep, graph, parse_int_list(args.ns), args.samples, args.seed,
                          threads=args.threads)
    return emit(args, report, notes)


def command_holder(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    rep, notes = _with_warnings(lambda: load_rep_source(args))
    report = holder_decay(rep, graph, None, parse_int_list(args.ks), args.pairs, args.tail, args.seed)
    return emit(args, report, notes)


def command_defect(args: argparse.Namespace) -> int:
    graph = load_graph_source(args)
    rep, notes = _with_warnings(lambda: load_rep_source(args))
    report = displacement_defect(rep, graph, None, args.length, parse_int_list(args.ns),
                                 args.samples, args.seed, threads=args.threads)
    return emit(args, report, notes)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main entry point for the geoclt tool.

    Returns:
        0 on success, 1 on runtime errors; usage errors exit with 2
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    try:
        validate_arguments(args)
    except ValueError as e:
        parser.error(str(e))

    try:
        return args.handler(args)
    except (GeoCLTError, ValueError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"Unexpected error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
