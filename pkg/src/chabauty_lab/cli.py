"""Command-line front end: root tables, verification suites and experiment drivers.

Every report is JSON carrying ``"schema": "chabauty-lab/1"``, the model, a hash
of the configuration, the tool version and a citation tag naming the result
the command exercises.  Tables can be emitted as CSV instead.

Exit codes: 0 success, 1 a verification suite failed, 2 invalid input.
"""
from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chabauty import BallSpec, SequenceError, convergence_experiment
from .decompose import FactorizationError, cartan_kak, iwasawa, polar
from .lie import GroupModel, ModelError, Tolerances, bracket, group_exp
from .limits import (
    ClassificationError,
    LimitGroupDescriptor,
    LimitGroupError,
    build_limit_group,
    classify_sequence,
    verify_nilpotency_criterion,
)
from .polyhedral import (
    CompactifiedPoint,
    PolyhedralPoint,
    certify_facet,
    continuity_experiment_f,
    corner_coords,
    facet_of_vector,
    phi,
    polyhedral_limit,
)
from .roots import RootSystem, build_root_system

SCHEMA = "chabauty-lab/1"
SEED_ENV = "CHABAUTY_LAB_SEED"
DEFAULT_VERIFY_MODELS = ("sl:2", "sl:3", "sl:4", "sopp:2")

# citation tags: short names of the statements each command exercises
CITATIONS = {
    "roots": "root-system-tables",
    "verify": "artifact-invariants",
    "decompose": "iwasawa-cartan-polar",
    "limit-group": "limit-group-structure",
    "classify": "limits-of-conjugated-K",
    "converge": "aKa-converges-to-DI",
    "polyhedral": "polyhedral-to-chabauty",
}


class UsageError(ValueError):
    """Invalid command-line input."""


# -- parsing helpers -------------------------------------------------------------


def parse_subset(text: str | None, rs: RootSystem) -> tuple:
    """Parse a comma list of simple roots.

    Tokens are base indices (``0``), or names ``aij`` for ``beta_i - beta_j``
    and ``bij`` for ``beta_i + beta_j`` with 1-based ``i, j``.  ``none`` or an
    empty string give the empty set, ``all`` the whole base.
    """
    if text is None or text.strip().lower() in ("", "none", "empty"):
        return ()
    if text.strip().lower() == "all":
        return tuple(range(rs.rank))
    n = rs.model.dim
    weights = {tuple(r.weight): i for i, r in enumerate(rs.base)}
    out = set()
    for tok in text.split(","):
        tok = tok.strip().lower()
        if tok.isdigit():
            i = int(tok)
            if i >= rs.rank:
                raise UsageError(f"base index {i} out of range for rank {rs.rank}")
            out.add(i)
            continue
        m = re.fullmatch(r"([ab])(\d)(\d)", tok)
        if not m:
            raise UsageError(f"cannot parse simple root {tok!r}")
        i, j = int(m.group(2)) - 1, int(m.group(3)) - 1
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise UsageError(f"bad indices in {tok!r}")
        w = np.zeros(n)
        w[i] += 1.0
        w[j] += -1.0 if m.group(1) == "a" else 1.0
        key = tuple(w)
        if key not in weights:
            raise UsageError(f"{tok!r} is not a simple root of {rs.model}")
        out.add(weights[key])
    return tuple(sorted(out))


def parse_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.replace(";", ",").split(",") if x.strip()])
    except ValueError as exc:
        raise UsageError(f"cannot parse numbers from {text!r}") from exc


def read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def read_matrix(text: str | None, model: GroupModel) -> np.ndarray:
    """``identity``, a JSON file holding a matrix (or ``{"g": matrix}``), or inline JSON."""
    if text is None or text == "identity":
        return np.eye(model.dim)
    obj = json.loads(text) if text.lstrip().startswith("[") else read_json(text)
    if isinstance(obj, dict):
        obj = obj.get("g", obj.get("matrix"))
    try:
        return model.check_shape(np.array(obj, dtype=float))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad matrix: {exc}") from exc


def diag_in_cartan(values, rs: RootSystem) -> np.ndarray:
    """Diagonal Cartan element; ``sopp`` accepts the first ``p`` entries alone."""
    v = np.asarray(values, dtype=float)
    n = rs.model.dim
    if rs.model.family == "sopp" and len(v) == rs.model.size:
        v = np.concatenate([v, -v[::-1]])
    if len(v) != n:
        raise UsageError(f"expected {n} diagonal entries, got {len(v)}")
    H = np.diag(v)
    if not rs.is_in_cartan(H):
        raise UsageError("diagonal entries do not define a Cartan element (trace must vanish)")
    return H


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def config_hash(args: argparse.Namespace) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("output", "func", "format")}
    if "seed" in cfg:
        cfg["seed"] = resolve_seed(args)
    for key in ("input", "sequence_file", "spec"):
        p = cfg.get(key)
        if p and Path(p).is_file():
            cfg[key + "_sha256"] = hashlib.sha256(Path(p).read_bytes()).hexdigest()
    blob = json.dumps(_jsonable(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def report(args, command: str, model, body: dict) -> dict:
    out = {
        "schema": SCHEMA,
        "command": command,
        "model": str(model) if model is not None else None,
        "config_hash": config_hash(args),
        "version": __version__,
        "citation": CITATIONS[command.split()[0]],
    }
    out.update(body)
    return out


def emit(args, rep: dict, csv_text: str | None = None) -> None:
    if args.format == "csv":
        if csv_text is None:
            raise UsageError("this command has no CSV table")
        text = csv_text
    else:
        text = json.dumps(_jsonable(rep), indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def resolve_seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV} must be an integer") from exc
    return args.seed


def tolerances(args) -> Tolerances:
    return Tolerances(args.factorization_tol, args.membership_tol, args.spectrum_tol)


def root_system(args) -> RootSystem:
    return build_root_system(GroupModel.parse(args.model), tolerances(args))


def ball_spec(args) -> BallSpec:
    return BallSpec(args.ball, args.mesh, args.max_points)


# -- commands -------------------------------------------------------------------


def cmd_roots(args) -> int:
    rs = root_system(args)
    model = rs.model
    if model.family == "sl":
        chamber = "h_1 > h_2 > ... > h_n on the diagonal"
    else:
        chamber = "h_1 > ... > h_{p-1} > |h_p| on the first p diagonal entries"
    body = {
        "count": len(rs.roots),
        "positive": len(rs.positive_roots),
        "rank": rs.rank,
        "base": [{"index": i, "coeffs": list(a.coeffs), "weight": a.weight} for i, a in enumerate(rs.base)],
        "roots": [{"coeffs": list(a.coeffs), "weight": a.weight} for a in rs.roots],
        "chamber": chamber,
    }
    rows = "coeffs,weight\n" + "".join(
        f"\"{a.label()}\",\"{' '.join(f'{w + 0.0:g}' for w in a.weight)}\"\n" for a in rs.roots
    )
    emit(args, report(args, "roots", model, body), rows)
    return 0


def _suite(name, value, threshold, compare="le"):
    passed = value <= threshold if compare == "le" else value == threshold
    return {"suite": name, "value": float(value), "threshold": float(threshold), "passed": bool(passed)}


def _verify_model(rs: RootSystem, rng: np.random.Generator, trials: int, tol: float | None) -> list:
    model = rs.model
    out = []
    n = model.dim
    expected = n * (n - 1) if model.family == "sl" else 2 * model.size * (model.size - 1)
    out.append(_suite("root-count", abs(len(rs.roots) - expected), 0))

    eig = max(
        float(np.linalg.norm(bracket(H, a.vector) - a(H) * a.vector))
        for a in rs.roots for H in rs.a_basis
    )
    out.append(_suite("eigen-relation", eig, tol or 1e-10))

    by_coeffs = {a.coeffs: a for a in rs.roots}
    worst = 0.0
    for a, b in itertools.product(rs.roots, repeat=2):
        B = bracket(a.vector, b.vector)
        s = tuple(x + y for x, y in zip(a.coeffs, b.coeffs))
        if all(c == 0 for c in s):
            r = float(np.linalg.norm(B - np.diag(np.diag(B))))
        elif s in by_coeffs:
            v = by_coeffs[s].vector
            r = float(np.linalg.norm(B - (np.sum(B * v) / np.sum(v * v)) * v))
        else:
            r = float(np.linalg.norm(B))
        worst = max(worst, r)
    out.append(_suite("bracket-relation", worst, tol or 1e-9))

    res = 0.0
    for _ in range(trials):
        X = sum(rng.standard_normal() * B for B in rs.basis)
        g = group_exp(3.0 * X / max(1.0, float(np.linalg.norm(X))))
        f = iwasawa(g, model)
        c = cartan_kak(g, model)
        Y, k = polar(g, model)
        scale = float(np.linalg.norm(g))
        res = max(
            res,
            float(np.linalg.norm(f.product() - g)) / scale,
            float(np.linalg.norm(c.product() - g)) / scale,
            float(np.linalg.norm(group_exp(Y) @ k - g)) / scale,
        )
    out.append(_suite("factorization-round-trip", res, tol or 1e-8))

    failures = 0
    mem = 0.0
    for r in range(rs.rank):
        for I in itertools.combinations(range(rs.rank), r):
            sd = rs.subset(I)
            failures += len(verify_nilpotency_criterion(sd, trials, rng).counterexamples)
            sg = build_limit_group(rs, LimitGroupDescriptor.identity(rs, I))
            for _ in range(trials):
                mem = max(mem, sg.residual(sg.random_element(rng)))
    out.append(_suite("nilpotency-criterion-failures", failures, 0, "eq"))
    out.append(_suite("limit-group-membership", mem, tol or rs.tol.membership_tol))
    return out


def cmd_verify(args) -> int:
    models = args.model_list or list(DEFAULT_VERIFY_MODELS)
    rng = np.random.default_rng(resolve_seed(args))
    results = {}
    ok = True
    for m in models:
        rs = build_root_system(GroupModel.parse(m), tolerances(args))
        suites = _verify_model(rs, rng, args.trials, args.tol)
        results[str(rs.model)] = suites
        ok = ok and all(s["passed"] for s in suites)
    body = {"passed": ok, "suites": results}
    rows = "model,suite,value,threshold,passed\n" + "".join(
        f"{m},{s['suite']},{s['value']:.6g},{s['threshold']:.6g},{s['passed']}\n"
        for m, suites in results.items() for s in suites
    )
    emit(args, report(args, "verify", ",".join(results), body), rows)
    return 0 if ok else 1


def cmd_decompose(args) -> int:
    model = GroupModel.parse(args.model)
    g = read_matrix(args.input, model)
    tol = tolerances(args)
    scale = max(1.0, float(np.linalg.norm(g)))
    if args.factorization == "iwasawa":
        f = iwasawa(g, model, tol=tol)
        factors = {"k": f.k, "a": f.a, "n": f.n}
        prod = f.product()
    elif args.factorization == "cartan":
        f = cartan_kak(g, model, tol)
        factors = {"k1": f.k1, "a": f.a, "k2": f.k2}
        prod = f.product()
    else:
        X, k = polar(g, model, tol)
        factors = {"X": X, "k": k}
        prod = group_exp(X) @ k
    body = {"factorization": args.factorization, "factors": factors,
            "residual": float(np.linalg.norm(prod - g)) / scale}
    emit(args, report(args, "decompose", model, body))
    return 0


def cmd_limit_group(args) -> int:
    rs = root_system(args)
    model = rs.model
    I = parse_subset(args.I, rs)
    a = np.eye(model.dim) if args.a is None else np.diag(np.exp(np.diag(diag_in_cartan(parse_floats(args.a), rs))))
    k = read_matrix(args.k, model)
    desc = LimitGroupDescriptor(I, a, k).validate(rs, rs.tol)
    sg = build_limit_group(rs, desc, rs.tol)
    rng = np.random.default_rng(resolve_seed(args))
    member_res = [sg.residual(sg.random_element(rng)) for _ in range(args.trials)]
    tests = []
    if args.g:
        g = read_matrix(args.g, model)
        tests.append({"label": "input", "residual": sg.residual(g), "member": sg.member(g)})
    e = np.eye(model.dim)
    tests.append({"label": "identity", "residual": sg.residual(e), "member": sg.member(e)})
    if not sg.subset.is_full:
        H = sum((i + 1.0) * B for i, B in enumerate(rs.a_basis))
        g = desc.k @ group_exp(H) @ desc.k.T
        tests.append({"label": "regular-cartan-conjugate", "residual": sg.residual(g), "member": sg.member(g)})
    body = {
        "descriptor": desc.to_json(rs),
        "dimension": len(sg.lie_algebra_basis()),
        "random_members": {"count": args.trials, "max_residual": max(member_res, default=0.0),
                           "all_members": all(r <= rs.tol.membership_tol for r in member_res)},
        "tests": tests,
    }
    emit(args, report(args, "limit-group", model, body))
    return 0


def _sequence_from_spec(spec: dict, rs: RootSystem, horizon: int):
    model = rs.model
    if "terms" in spec:
        return [model.check_shape(np.array(t, dtype=float)) for t in spec["terms"]]
    if "g" in spec or spec.get("kind") == "constant":
        g = model.check_shape(np.array(spec.get("g", np.eye(model.dim).tolist()), dtype=float))
        return [g] * horizon
    if "slope" in spec:
        k = model.check_shape(np.array(spec.get("k", np.eye(model.dim).tolist()), dtype=float))
        slope = diag_in_cartan(spec["slope"], rs)
        offset = diag_in_cartan(spec.get("offset", [0.0] * len(spec["slope"])), rs)
        decay = diag_in_cartan(spec.get("decay", [0.0] * len(spec["slope"])), rs)
        return [k @ group_exp(offset + n * slope + 0.5 ** n * decay) for n in range(1, horizon + 1)]
    raise UsageError("sequence spec needs 'terms', 'g' or 'slope'")


def cmd_classify(args) -> int:
    spec = read_json(args.sequence_file)
    args.model = args.model or spec.get("model")
    if args.model is None:
        raise UsageError("no model given on the command line or in the sequence spec")
    rs = root_system(args)
    seq = _sequence_from_spec(spec, rs, args.horizon)
    res = classify_sequence(seq, rs, horizon=args.horizon)
    limit = "interior" if res.interior else res.limit.to_json(rs)
    body = {"limit": limit, "I": list(res.I), "residual": res.residual}
    emit(args, report(args, "classify", rs.model, body))
    return 0


def cmd_converge(args) -> int:
    rs = root_system(args)
    I = parse_subset(args.I, rs)
    m = re.fullmatch(r"geometric:([0-9.eE+-]+)", args.sequence)
    if not m:
        raise UsageError("--sequence must look like geometric:<ratio>")
    ratio = float(m.group(1))
    if not ratio > 1:
        raise UsageError("the geometric ratio must exceed 1")
    table = convergence_experiment(rs, I, ball=ball_spec(args), seed=resolve_seed(args),
                                   ratio=ratio, horizon=args.horizon)
    verdict = {"decreasing": table.decreasing_from(1), "final": table.final,
               "converged": bool(table.final < args.threshold)}
    body = {"I": list(table.I), "table": [{"n": n, "distance": d} for n, d in zip(table.ns, table.distances)],
            "verdict": verdict}
    emit(args, report(args, "converge", rs.model, body), table.to_csv())
    return 0


def cmd_polyhedral(args) -> int:
    rs = root_system(args)
    if args.action == "corner":
        H = diag_in_cartan(parse_floats(args.H), rs)
        F = facet_of_vector(H, rs)
        I = parse_subset(args.I, rs) if args.I is not None else tuple(range(rs.rank))
        p = PolyhedralPoint.from_vector(rs, I, H)
        body = {
            "facet": {"zero": [list(a.coeffs) for a in F.sigma0], "plus": [list(a.coeffs) for a in F.sigma_plus],
                      "minus": [list(a.coeffs) for a in F.sigma_minus], "certified": certify_facet(F, rs)},
            "I": list(p.I),
            "corner_coords": corner_coords(p, rs),
        }
        emit(args, report(args, "polyhedral corner", rs.model, body))
        return 0
    if args.action == "phi":
        g = read_matrix(args.g, rs.model)
        I = parse_subset(args.I, rs)
        H = diag_in_cartan(parse_floats(args.H), rs) if args.H else np.zeros((rs.model.dim,) * 2)
        d = phi(CompactifiedPoint(g, PolyhedralPoint.from_vector(rs, I, H)), rs)
        emit(args, report(args, "polyhedral phi", rs.model, {"descriptor": d.to_json(rs)}))
        return 0
    return _polyhedral_continuity(args)


def _polyhedral_continuity(args) -> int:
    spec = read_json(args.spec)
    args.model = spec.get("model", args.model)
    rs = root_system(args)
    horizon = int(spec.get("horizon", args.horizon))
    I = parse_subset(spec.get("I", "all"), rs) if isinstance(spec.get("I", "all"), str) else tuple(spec["I"])
    k = len(spec["slope"])
    slope = diag_in_cartan(spec["slope"], rs)
    offset = diag_in_cartan(spec.get("offset", [0.0] * k), rs)
    decay = diag_in_cartan(spec.get("decay", [0.0] * k), rs)
    seq = [PolyhedralPoint.from_vector(rs, I, offset + n * slope + 0.5 ** n * decay) for n in range(1, horizon + 1)]
    if "limit" in spec:
        lim = spec["limit"]
        J = parse_subset(lim["I"], rs) if isinstance(lim["I"], str) else tuple(lim["I"])
        limit = PolyhedralPoint.from_vector(rs, J, diag_in_cartan(lim.get("H", [0.0] * k), rs))
    else:
        limit = polyhedral_limit(seq, rs, tol=float(spec.get("limit_tol", 1e-2)))
    ball = BallSpec(**spec["ball"]) if "ball" in spec else ball_spec(args)
    table = continuity_experiment_f(rs, seq, ball, resolve_seed(args), limit=limit)
    body = {"limit": {"I": list(table.limit.I), "rep": np.diag(table.limit.rep)},
            "table": [{"n": n, "distance": d} for n, d in zip(table.ns, table.distances)],
            "final": table.final}
    emit(args, report(args, "polyhedral continuity", rs.model, body), table.to_csv())
    return 0


# -- argument parsing --------------------------------------------------------------


def _common(p: argparse.ArgumentParser, model_required: bool = True) -> None:
    if model_required:
        p.add_argument("--model", required=True, help="sl:<n> or sopp:<p>")
    p.add_argument("--seed", type=int, default=0, help=f"overridden by ${SEED_ENV}")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--factorization-tol", type=float, default=1e-9)
    p.add_argument("--membership-tol", type=float, default=1e-7)
    p.add_argument("--spectrum-tol", type=float, default=1e-6)


def _ball_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ball", type=float, default=6.0, help="radius R of the sampling ball")
    p.add_argument("--mesh", type=float, default=0.15)
    p.add_argument("--max-points", type=int, default=6000)
    p.add_argument("--horizon", type=int, default=12)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chabauty-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("roots", help="root system tables")
    _common(p)
    p.set_defaults(func=cmd_roots)

    p = sub.add_parser("verify", help="run the invariant suites")
    _common(p, model_required=False)
    p.add_argument("--model", dest="model_list", action="append", help="repeatable; default sl:2..4 and sopp:2")
    p.add_argument("--tol", type=float, help="replace every residual threshold by this value")
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("decompose", help="Iwasawa, Cartan or polar factors of one element")
    _common(p)
    p.add_argument("--factorization", choices=("iwasawa", "cartan", "polar"), required=True)
    p.add_argument("--input", required=True, help="JSON file with a matrix or {\"g\": matrix}")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("limit-group", help="build a limit group and test membership")
    _common(p)
    p.add_argument("--I", help="simple roots, e.g. a12 or 0,1")
    p.add_argument("--a", help="diagonal of log a, comma separated")
    p.add_argument("--k", help="matrix file, inline JSON or 'identity'")
    p.add_argument("--g", help="an element to test")
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_limit_group)

    p = sub.add_parser("classify", help="limit of g_n K g_n^-1 for a sequence")
    _common(p, model_required=False)
    p.add_argument("--model")
    p.add_argument("--sequence", dest="sequence_file", required=True, help="JSON sequence spec")
    p.add_argument("--horizon", type=int, default=40)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("converge", help="Hausdorff distances from a_n K a_n^-1 to D^I")
    _common(p)
    p.add_argument("--I", required=True)
    p.add_argument("--sequence", default="geometric:2")
    p.add_argument("--threshold", type=float, default=0.5, help="final distance counted as converged")
    _ball_args(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("polyhedral", help="polyhedral compactification tools")
    psub = p.add_subparsers(dest="action", required=True)
    q = psub.add_parser("corner")
    _common(q)
    q.add_argument("--H", required=True, help="diagonal of H, comma separated")
    q.add_argument("--I", help="corner to project to; default the interior")
    q.set_defaults(func=cmd_polyhedral)
    q = psub.add_parser("phi")
    _common(q)
    q.add_argument("--g", default="identity")
    q.add_argument("--I", default="none")
    q.add_argument("--H", help="diagonal of H, comma separated")
    q.set_defaults(func=cmd_polyhedral)
    q = psub.add_parser("continuity")
    _common(q, model_required=False)
    q.add_argument("--model", default="sl:3")
    q.add_argument("--spec", required=True, help="JSON sequence of polyhedral points")
    _ball_args(q)
    q.set_defaults(func=cmd_polyhedral)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ModelError, LimitGroupError, SequenceError, ClassificationError,
            FactorizationError, ValueError) as exc:
        print(f"chabauty-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
