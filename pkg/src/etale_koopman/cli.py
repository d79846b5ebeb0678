"""Batch command line: ``etale-koopman <group> <command> [options]``.

Every command writes one JSON report (stdout, or ``--out`` atomically).
Exit codes: 0 all checks pass, 1 a check failed, 2 inconclusive, 3 input
error or usage problem.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import random
import sys
import tempfile
from fractions import Fraction

from . import __version__
from ._rational import fmt, to_fraction
from .errors import KoopmanError
from .graph import (
    CONVENTION_NOTE,
    DirectedGraph,
    FiniteGroup,
    satisfies_condition_K,
    saturated_hereditary_lattice,
    skew_product,
    validate_graph,
)
from .groupoid import AlgebraElement, adjoint, ball_degrees, cayley_ball, edge_symbol
from .pathspace import Path, paths_of_length

SCHEMA_VERSION = 1
EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _load_json(arg):
    """Inline JSON, or a path to a JSON file."""
    if arg is None:
        return None
    text = arg
    if not arg.lstrip().startswith(("{", "[")):
        if not os.path.exists(arg):
            raise UsageError(f"file not found: {arg}")
        with open(arg) as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in {arg[:40]!r}: {exc}") from None


def _graph(args):
    g = DirectedGraph.from_json(_load_json(args.graph))
    return g


def _weights(args, g):
    from .measures import MarkovWeights

    if args.weights in (None, "uniform"):
        return MarkovWeights.uniform(g)
    return MarkovWeights.from_json(g, _load_json(args.weights))


def _element(args, g):
    if args.element is None:
        raise UsageError("--element is required")
    return AlgebraElement.from_json(g, _load_json(args.element))


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


# -- commands -----------------------------------------------------------------


def cmd_graph_validate(args):
    rep = validate_graph(_graph(args))
    return ("pass" if rep["ok"] else "fail"), {"violations": rep["violations"]}


def cmd_graph_lattice(args):
    g = _graph(args)
    lat = saturated_hereditary_lattice(g, orientation=args.orientation)
    return "pass", {"orientation": args.orientation, "count": len(lat), "sets": [sorted(H) for H in lat]}


def cmd_graph_condition_k(args):
    ok, bad = satisfies_condition_K(_graph(args))
    return ("pass" if ok else "fail"), {"condition_K": ok, "offending_vertices": bad}


def cmd_graph_skew(args):
    g = _graph(args)
    group = FiniteGroup.cyclic(args.order)
    c = {str(k): str(v) for k, v in _load_json(args.cocycle).items()}
    return "pass", {"group": f"Z/{args.order}", "skew_product": skew_product(g, group, c).to_json()}


def cmd_measure_markov(args):
    from .measures import cylinder_measure

    g = _graph(args)
    w = _weights(args, g)
    totals = []
    for k in range(args.depth + 1):
        totals.append({"depth": k, "total": fmt(sum((cylinder_measure(w, a) for a in paths_of_length(g, k)), Fraction(0)))})
    ok = all(t["total"] == "1/1" for t in totals)
    return ("pass" if ok else "fail"), {"weights": w.to_json(), "cylinder_totals": totals}


def cmd_measure_hausdorff(args):
    from .measures import SelfSimilarWeights

    ratios = [x.strip() for x in args.ratios.split(",")]
    sw = SelfSimilarWeights.solve(ratios, tol=args.tol)
    res = sw.residual()
    return ("pass" if abs(res) <= args.tol else "fail"), {"ratios": ratios, "dimension": repr(sw.hdim), "residual": repr(res), "tol": args.tol}


def cmd_measure_transfer(args):
    from .measures import TransferSpec, is_transfer_fixed, markov_potential

    g = _graph(args)
    w = _weights(args, g)
    if args.potential == "markov":
        psi = markov_potential(w)
    elif args.potential == "edge":
        psi = TransferSpec.from_edge_weights(w)
    elif args.potential.startswith("const:"):
        psi = TransferSpec.constant(g, to_fraction(args.potential[6:]))
    else:
        raise UsageError("--potential must be markov, edge or const:<c>")
    ok, bad = is_transfer_fixed(w, psi, args.depth)
    return ("pass" if ok else "fail"), {"potential": args.potential, "depth": args.depth, "fixed": ok, "first_violation": None if bad is None else bad.to_json()}


def cmd_measure_kms(args):
    from .measures import edge_cocycle, kms_inverse_temperature

    g = _graph(args)
    w = _weights(args, g)
    beta = kms_inverse_temperature(w)
    cocycle = {e: fmt(edge_cocycle(w, e)) for e in g.sorted_edge_ids()}
    return ("pass" if beta is not None else "fail"), {"edge_cocycle": cocycle, "beta": None if beta is None else repr(beta)}


def cmd_koopman_matrix(args):
    from .koopman import koopman_matrix

    g = _graph(args)
    w = _weights(args, g)
    f = _element(args, g)
    m = koopman_matrix(f, w, args.depth, headroom=args.headroom)
    if args.format == "csv":
        return "pass", {"csv": m.to_csv()}
    return "pass", {"blocks": m.to_json(), "domain_depth": m.domain_depth, "codomain_depth": m.codomain_depth}


def cmd_koopman_verify_ck(args):
    from .koopman import verify_cuntz_krieger

    g = _graph(args)
    rep = verify_cuntz_krieger(g, _weights(args, g), args.depth)
    return rep["status"], rep


def cmd_koopman_kernel(args):
    from .koopman import kernel_ideal

    g = _graph(args)
    H = [x for x in args.H.split(",") if x] if args.H else []
    rep = kernel_ideal(g, H, args.depth)
    return rep["status"], rep


def cmd_koopman_norms(args):
    from .koopman import compare_norms

    g = _graph(args)
    w = _weights(args, g)
    rep = compare_norms(_element(args, g), w, _ints(args.schedule), samples=args.samples, seed=args.seed)
    rep["rows"] = [{k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rep["rows"]]
    return rep["status"], rep


def _ifs(args):
    from .fractafold import IFSSpec

    if args.ifs:
        return IFSSpec.from_json(_load_json(args.ifs))
    weights = tuple(args.weights.split(",")) if args.weights else ()
    return IFSSpec(args.N, weights)


def cmd_fractafold_verify(args):
    from .fractafold import verify_on_fractafold

    rep = verify_on_fractafold(_ifs(args), args.level)
    return rep["status"], rep


def cmd_fractafold_measure(args):
    from .fractafold import FractafoldCell, mu_infinity

    spec = _ifs(args)
    cell = FractafoldCell.from_json(_load_json(args.cell))
    return "pass", {"cell": cell.to_json(), "normal": cell.normal().to_json(), "mu_infinity": fmt(mu_infinity(spec, cell))}


def cmd_cayley_ball(args):
    g = _graph(args)
    # standard generators Z(s(e), e): right multiplication prepends e to the source
    S = [adjoint(edge_symbol(g, e)) for e in g.sorted_edge_ids()]
    if args.base:
        base = Path.from_json(g, _load_json(args.base))
    else:
        rng = random.Random(args.seed)
        v = g.sorted_vertices()[0]
        edges = []
        for _ in range(2 * args.radius + 2):
            e = rng.choice(g.edges_into(v))
            edges.append(e.id)
            v = e.src
        base = g.path(edges)
    ball, dist = cayley_ball(g, S, base, args.radius)
    deg = ball_degrees(ball, dist, args.radius)
    hist = {}
    for d in deg.values():
        hist[str(d)] = hist.get(str(d), 0) + 1
    # one vertex with d loops: the ball is a piece of the (d+1)-regular tree
    want = len(S) + 1 if len(g.vertices) == 1 else None
    bad = sorted(v for v, d in deg.items() if want is not None and d != want)
    return ("pass" if not bad else "fail"), {
        "base": base.to_json(),
        "radius": args.radius,
        "vertices": len(ball.vertices),
        "edges": len(ball.edges),
        "interior_degree_expected": want,
        "interior_vertices": len(deg),
        "interior_degree_histogram": dict(sorted(hist.items())),
        "irregular_interior_vertices": bad[:20],
    }


# -- parser -------------------------------------------------------------------


def build_parser():
    p = Parser(prog="etale-koopman", description=__doc__.splitlines()[0])
    p.add_argument("--out", help="write the report here (atomically) instead of stdout")
    p.add_argument("--seed", type=int, default=0)
    groups = p.add_subparsers(dest="group", parser_class=Parser)

    def add(group, name, fn, *opts):
        sp = group.add_parser(name)
        sp.set_defaults(fn=fn)
        for flags, kw in opts:
            sp.add_argument(*flags, **kw)
        return sp

    graph_opt = (["--graph"], {"required": True, "help": "graph JSON (file or inline)"})
    weights_opt = (["--weights"], {"default": "uniform", "help": "'uniform' or weights JSON"})
    depth = lambda d: (["--depth"], {"type": int, "default": d})  # noqa: E731

    gg = groups.add_parser("graph").add_subparsers(dest="cmd", parser_class=Parser)
    add(gg, "validate", cmd_graph_validate, graph_opt)
    add(gg, "lattice", cmd_graph_lattice, graph_opt, (["--orientation"], {"choices": ["edges", "paths"], "default": "edges"}))
    add(gg, "condition-k", cmd_graph_condition_k, graph_opt)
    add(gg, "skew", cmd_graph_skew, graph_opt, (["--order"], {"type": int, "required": True}), (["--cocycle"], {"required": True, "help": "JSON {edge: int}"}))

    mg = groups.add_parser("measure").add_subparsers(dest="cmd", parser_class=Parser)
    add(mg, "markov", cmd_measure_markov, graph_opt, weights_opt, depth(3))
    add(mg, "hausdorff", cmd_measure_hausdorff, (["--ratios"], {"required": True}), (["--tol"], {"type": float, "default": 1e-12}))
    add(mg, "transfer-check", cmd_measure_transfer, graph_opt, weights_opt, depth(4), (["--potential"], {"default": "markov"}))
    add(mg, "kms", cmd_measure_kms, graph_opt, weights_opt)

    kg = groups.add_parser("koopman").add_subparsers(dest="cmd", parser_class=Parser)
    add(kg, "matrix", cmd_koopman_matrix, graph_opt, weights_opt, depth(3), (["--element"], {}), (["--headroom"], {"type": int, "default": 0}), (["--format"], {"choices": ["json", "csv"], "default": "json"}))
    add(kg, "verify-ck", cmd_koopman_verify_ck, graph_opt, weights_opt, depth(3))
    add(kg, "kernel", cmd_koopman_kernel, graph_opt, depth(3), (["--H"], {"default": "", "help": "comma-separated vertex set"}))
    add(kg, "norms", cmd_koopman_norms, graph_opt, weights_opt, (["--element"], {}), (["--schedule"], {"default": "2,3,4,5,6,7"}), (["--samples"], {"type": int, "default": 3}))

    fg = groups.add_parser("fractafold").add_subparsers(dest="cmd", parser_class=Parser)
    ifs_opts = ((["--ifs"], {"help": "IFS JSON"}), (["--N"], {"type": int, "default": 2}), (["--weights"], {"help": "comma-separated rationals"}))
    add(fg, "verify", cmd_fractafold_verify, *ifs_opts, (["--level"], {"type": int, "default": 4}))
    add(fg, "measure", cmd_fractafold_measure, *ifs_opts, (["--cell"], {"required": True}))

    cg = groups.add_parser("cayley").add_subparsers(dest="cmd", parser_class=Parser)
    add(cg, "ball", cmd_cayley_ball, graph_opt, (["--radius"], {"type": int, "default": 3}), (["--base"], {"help": "base path JSON"}))
    return p


def _versions():
    import numpy
    import scipy

    return {"etale_koopman": __version__, "python": platform.python_version(), "numpy": numpy.__version__, "scipy": scipy.__version__}


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".report-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


STATUS_CODES = {"pass": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}


def run(argv):
    """Run one job; returns ``(exit_code, report_dict)``."""
    code, report, _ = _run(argv)
    return code, report


def _run(argv):
    parser = build_parser()
    out = None
    report = {"schema_version": SCHEMA_VERSION, "command": list(argv), "convention": CONVENTION_NOTE}
    try:
        args = parser.parse_args(argv)
        out = args.out
        if getattr(args, "fn", None) is None:
            raise UsageError(parser.format_help())
        report["seed"] = args.seed
        report["versions"] = _versions()
        status, result = args.fn(args)
    except UsageError as exc:
        report.update(status="input-error", error=str(exc))
        return EXIT_INPUT, report, out
    except (KoopmanError, ValueError, KeyError) as exc:
        report.update(status="input-error", error=f"{type(exc).__name__}: {exc}")
        return EXIT_INPUT, report, out
    report["status"] = status
    report["result"] = result
    return STATUS_CODES[status], report, out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    code, report, out = _run(argv)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if code == EXIT_INPUT:
        sys.stderr.write(report.get("error", "") + "\n")
    _write(text, out)
    return code


if __name__ == "__main__":
    sys.exit(main())
