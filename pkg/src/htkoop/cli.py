"""Command line front end.

    htkoop ht {validate|compose|gm|gma|transporter|koopman-matrix|converge|contract} ...
    htkoop tree {activity|rn|koopman|transitivity|subexp} ...

Every leaf command takes ``--seed``, ``--out`` and ``--format {csv,json}``.
Exit codes: 0 success / check passed, 1 check failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

from . import nadic, tree
from .constructions import (
    AdmissibleSet,
    LambdaSegment,
    make_gm,
    make_gmA,
    transporter,
)
from .koopman import (
    CONVERGENCE_COLUMNS,
    StepFunction,
    check_measure_contracting,
    convergence_table,
    koopman_matrix,
)
from .nadic import GroupParams, PLMapError
from .scalars import format_rational, parse_rational

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class CLIError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    fmt: str | None
    out: str | None
    options: dict[str, Any] = field(default_factory=dict)

    def header(self) -> str:
        opts = " ".join(f"{k}={v}" for k, v in sorted(self.options.items()))
        return f"# htkoop {self.command} seed={self.seed} {opts}".rstrip()

    def meta(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("fmt")
        return d


def _fmt_float(x: float) -> str:
    return f"{x:.12g}"


# output ---------------------------------------------------------------------


def _write(cfg: ExperimentConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_table(cfg: ExperimentConfig, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    if (cfg.fmt or "csv") == "json":
        payload = {"meta": cfg.meta(), "columns": list(columns),
                   "rows": [dict(zip(columns, map(str, r))) for r in rows]}
        _write(cfg, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return
    buf = io.StringIO()
    buf.write(cfg.header() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(r)
    _write(cfg, buf.getvalue())


def emit_object(cfg: ExperimentConfig, obj: dict) -> None:
    if (cfg.fmt or "json") == "csv":
        buf = io.StringIO()
        buf.write(cfg.header() + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in obj.items():
            w.writerow([k, json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v])
        _write(cfg, buf.getvalue())
        return
    payload = dict(obj)
    payload["meta"] = cfg.meta()
    _write(cfg, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# argument helpers --------------------------------------------------------------


def _params(args) -> GroupParams:
    try:
        return GroupParams(args.n, args.r)
    except ValueError as exc:
        raise CLIError(str(exc)) from exc


def _admissible(params: GroupParams, text: str) -> AdmissibleSet:
    try:
        return AdmissibleSet.parse(params, text)
    except ValueError as exc:
        raise CLIError(f"invalid admissible set {text!r}: {exc}") from exc


def _read_element(path: str) -> nadic.PLMap:
    text = sys.stdin.read() if path == "-" else open(path).read()
    return nadic.from_json(text)


def _vector(params: GroupParams, text: str, rng: random.Random, level: int) -> StepFunction:
    """``random`` (integer coefficients in [-3, 3] at ``level``) or an admissible-set indicator."""
    if text == "random":
        return StepFunction(params, level, tuple(rng.randint(-3, 3) for _ in range(params.r * params.n**level)))
    return StepFunction.indicator(_admissible(params, text))


def _segment(params: GroupParams, text: str) -> LambdaSegment:
    try:
        m, p = (int(t) for t in text.split(":"))
        return LambdaSegment(params, m, p)
    except ValueError as exc:
        raise CLIError(f"invalid Lambda-segment {text!r} (expected m:p): {exc}") from exc


# ht commands ---------------------------------------------------------------------


def cmd_validate(args, cfg) -> int:
    try:
        g = _read_element(args.element)
    except PLMapError as exc:
        emit_object(cfg, {"valid": False, "error": str(exc)})
        return EXIT_ERROR
    report = nadic.membership(g)
    emit_object(cfg, {"valid": True, **report.to_dict()})
    return EXIT_OK if report.in_G else EXIT_FAIL


def _emit_element(cfg, g: nadic.PLMap) -> None:
    emit_object(cfg, nadic.to_dict(g))


def cmd_compose(args, cfg) -> int:
    g, h = _read_element(args.g), _read_element(args.h)
    _emit_element(cfg, nadic.compose(g, h))
    return EXIT_OK


def cmd_gm(args, cfg) -> int:
    _emit_element(cfg, make_gm(_params(args), args.m))
    return EXIT_OK


def cmd_gma(args, cfg) -> int:
    params = _params(args)
    _emit_element(cfg, make_gmA(_admissible(params, args.A), args.m))
    return EXIT_OK


def cmd_transporter(args, cfg) -> int:
    params = _params(args)
    _emit_element(cfg, transporter(_segment(params, args.I1), _segment(params, args.I2)))
    return EXIT_OK


def cmd_koopman_matrix(args, cfg) -> int:
    g = _read_element(args.element)
    M = koopman_matrix(g, args.k)
    rows = []
    for j, col in enumerate(M.columns):
        for i in sorted(col):
            v = col[i]
            rows.append([i, j, str(v), _fmt_float(v.to_float())])
    cfg.options.update(domain_level=M.domain_level, range_level=M.range_level, unitary=M.is_unitary())
    emit_table(cfg, ["row", "col", "value_exact", "value_float"], rows)
    return EXIT_OK


def cmd_converge(args, cfg) -> int:
    params = _params(args)
    rng = random.Random(args.seed)
    A = _admissible(params, args.A)
    xi1 = _vector(params, args.xi1, rng, args.xi_level)
    xi2 = _vector(params, args.xi2, rng, args.xi_level)
    rows = convergence_table(A, xi1, xi2, range(1, args.m_max + 1))
    emit_table(cfg, CONVERGENCE_COLUMNS, [r.csv_fields() for r in rows])
    return EXIT_OK if all(r.within_bound for r in rows) else EXIT_FAIL


def cmd_contract(args, cfg) -> int:
    params = _params(args)
    A = _admissible(params, args.A)
    if not A:
        raise CLIError("contract needs a nonempty admissible set")
    M, eps = parse_rational(args.M), parse_rational(args.eps)
    report = check_measure_contracting(make_gmA(A, args.m), A, M, eps)
    emit_object(cfg, report.to_dict())
    return EXIT_OK if report.passed else EXIT_FAIL


# tree commands -------------------------------------------------------------------


def _tree_element(spec: str):
    try:
        return tree.load_element(spec)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        raise CLIError(f"cannot load tree element {spec!r}: {exc}") from exc


def cmd_tree_activity(args, cfg) -> int:
    g = _tree_element(args.element)
    ks = tree.activity_profile(g, args.n_max)
    emit_table(cfg, ["n", "k_n"], [[n, ks[n]] for n in range(args.n_min, args.n_max + 1)])
    return EXIT_OK


def cmd_tree_rn(args, cfg) -> int:
    g = _tree_element(args.element)
    p = tree.BernoulliWeights.parse(args.p)
    word = tree.parse_word(args.word, g.d)
    image, section = tree.act_word(g, word)
    ratio = tree.rn_on_cylinder(g, word, p)
    emit_object(cfg, {
        "word": tree.format_word(word),
        "image": tree.format_word(image),
        "section_trivial": section.is_trivial(),
        "ratio_exact": format_rational(ratio),
        "ratio_float": _fmt_float(float(ratio)),
    })
    return EXIT_OK


def cmd_tree_koopman(args, cfg) -> int:
    g = _tree_element(args.element)
    p = tree.BernoulliWeights.parse(args.p)
    xi = tree.CylinderFunction.parse(args.xi, g.d)
    eta = tree.CylinderFunction.parse(args.eta, g.d)
    try:
        est = tree.koopman_inner_cylinders(g, p, xi, eta, args.depth_cap)
    except ValueError as exc:
        raise CLIError(str(exc)) from exc
    emit_object(cfg, {
        "value": _fmt_float(est.value),
        "unresolved_bound": _fmt_float(est.unresolved_bound),
        "unresolved_mass": format_rational(est.unresolved_mass),
        "exact_terms": [
            {"ratio": format_rational(r), "weight": format_rational(w)}
            for r, w in sorted(est.exact_terms.items())
        ],
    })
    return EXIT_OK


def cmd_tree_transitivity(args, cfg) -> int:
    gens = [_tree_element(s) for s in args.generators]
    rows = []
    for n in range(1, args.n_max + 1):
        try:
            rows.append([n, tree.level_transitive_check(gens, n, cap=args.cap)])
        except ValueError as exc:
            raise CLIError(str(exc)) from exc
    emit_table(cfg, ["n", "transitive"], rows)
    return EXIT_OK if all(ok for _, ok in rows) else EXIT_FAIL


def cmd_tree_subexp(args, cfg) -> int:
    g = _tree_element(args.element)
    rep = tree.subexp_report(g, args.n_max, parse_rational(args.gamma))
    cfg.options.update(max_activity=rep.max_activity, bounded_on_range=rep.bounded_on_range)
    emit_table(cfg, ["n", "k_n", "weighted_exact", "weighted_float"],
               [[n, k, format_rational(w), _fmt_float(float(w))] for n, k, w in rep.rows])
    return EXIT_OK


# parser --------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="random seed (recorded in output)")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", dest="fmt", choices=["csv", "json"], default=None)
    return p


def _nr(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--r", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="htkoop", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)

    ht = groups.add_parser("ht", help="Higman-Thompson interval actions").add_subparsers(dest="cmd", required=True)
    tr = groups.add_parser("tree", help="rooted-tree automorphisms").add_subparsers(dest="cmd", required=True)

    def leaf(sub, name: str, fn: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=fn)
        return p

    p = leaf(ht, "validate", cmd_validate, "membership report for an element JSON")
    p.add_argument("element", help="element JSON file, '-' for stdin")

    p = leaf(ht, "compose", cmd_compose, "x -> g(h(x))")
    p.add_argument("g")
    p.add_argument("h")

    p = leaf(ht, "gm", cmd_gm, "the contracting element g_m")
    _nr(p)
    p.add_argument("--m", type=int, required=True)

    p = leaf(ht, "gma", cmd_gma, "g_m^A for an admissible set A")
    _nr(p)
    p.add_argument("--A", required=True, help="'all', 'empty' or comma list of level:index")
    p.add_argument("--m", type=int, required=True)

    p = leaf(ht, "transporter", cmd_transporter, "element mapping one Lambda-segment onto another")
    _nr(p)
    p.add_argument("--I1", required=True, help="m:p")
    p.add_argument("--I2", required=True, help="m:p")

    p = leaf(ht, "koopman-matrix", cmd_koopman_matrix, "sparse Koopman matrix on level-k step functions")
    p.add_argument("element")
    p.add_argument("--k", type=int, default=1)

    p = leaf(ht, "converge", cmd_converge, "weak-convergence table <kappa(g_m^A) xi1, xi2>")
    _nr(p)
    p.add_argument("--A", default="all")
    p.add_argument("--m-max", type=int, default=6)
    p.add_argument("--xi1", default="all", help="admissible set (indicator) or 'random'")
    p.add_argument("--xi2", default="all")
    p.add_argument("--xi-level", type=int, default=2, help="level of random test vectors")

    p = leaf(ht, "contract", cmd_contract, "measure-contraction check for g_m^A")
    _nr(p)
    p.add_argument("--A", required=True)
    p.add_argument("--M", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--m", type=int, required=True)

    p = leaf(tr, "activity", cmd_tree_activity, "activity k_n(g)")
    p.add_argument("element", help="grigorchuk:a|b|c|d, JSON file or inline JSON")
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=20)

    p = leaf(tr, "rn", cmd_tree_rn, "mu_p(g C_w) / mu_p(C_w)")
    p.add_argument("element")
    p.add_argument("--p", required=True, help="comma list of weights, e.g. 1/3,2/3")
    p.add_argument("--word", default="")

    p = leaf(tr, "koopman", cmd_tree_koopman, "<kappa_p(g) xi, eta> with truncation bound")
    p.add_argument("element")
    p.add_argument("--p", required=True)
    p.add_argument("--xi", default="root", help="comma list of word[:coef]")
    p.add_argument("--eta", default="root")
    p.add_argument("--depth-cap", type=int, default=8)

    p = leaf(tr, "transitivity", cmd_tree_transitivity, "level transitivity for n = 1..n_max")
    p.add_argument("generators", nargs="+")
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--cap", type=int, default=tree.DEFAULT_VERTEX_CAP)

    p = leaf(tr, "subexp", cmd_tree_subexp, "k_n(g) * gamma^n table")
    p.add_argument("element")
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--gamma", default="1/2")

    return parser


_SKIP = {"group", "cmd", "func", "seed", "out", "fmt"}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    options = {k: v for k, v in vars(args).items() if k not in _SKIP}
    cfg = ExperimentConfig(f"{args.group} {args.cmd}", args.seed, args.fmt, args.out, options)
    try:
        return args.func(args, cfg)
    except (CLIError, PLMapError, ValueError, OSError) as exc:
        print(f"htkoop: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
