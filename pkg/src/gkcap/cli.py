"""Command-line front end.

Every command prints a small human-readable table followed by one JSON
object per line (``--format json`` prints only the JSON lines).  Exit codes:
0 success, 2 invalid input, 3 cross-check mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import discrete_source as ds
from . import linear_source as ls
from .gf_linalg import format_matrix
from .keygen_sim import build_extractor, simulate

EXIT_OK, EXIT_INVALID, EXIT_MISMATCH = 0, 2, 3
XCHECK_TOL = 1e-9


class InputError(Exception):
    pass


def _parse_set(text: str | None) -> list[str]:
    if text is None:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None


def _load_spec(path: str) -> ls.LinearSourceSpec:
    doc = _load_json(path)
    try:
        return ls.spec_from_dict(doc)
    except (ls.SpecError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_any_source(path: str) -> ds.DiscreteSource:
    doc = _load_json(path)
    try:
        if isinstance(doc, dict) and "field_p" in doc:
            return ls.export_discrete(ls.spec_from_dict(doc))
        return ds.source_from_dict(doc)
    except ls.ExhaustionCapExceeded:
        raise
    except (ls.SpecError, ValueError, TypeError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(rows: dict, args) -> None:
    if args.format in ("both", "table"):
        width = max((len(k) for k in rows), default=0)
        for k, v in rows.items():
            if isinstance(v, float):
                v = f"{v:.12g}"
            elif not isinstance(v, str):
                v = json.dumps(v)
            print(f"{k:<{width}}  {v}")
    if args.format in ("both", "json"):
        print(json.dumps(rows, sort_keys=True, separators=(",", ":")))


def _mcf_record(res: ls.McfResult) -> dict:
    return {
        "g_matrix": format_matrix(res.g_matrix),
        "rank_m": res.rank,
        "recovery_maps": {u: format_matrix(w) for u, w in res.recovery_maps.items()},
        "jgk_bits": res.jgk_bits,
    }


def cmd_mcf(args) -> int:
    spec = _load_spec(args.spec)
    _emit({"verb": "mcf", "path": args.spec, **_mcf_record(ls.mcf(spec))}, args)
    return EXIT_OK


def cmd_capacity(args) -> int:
    spec = _load_spec(args.spec)
    rep = ls.capacity(spec)
    _emit({"verb": "capacity", "path": args.spec, "rank_m": rep.rank_m, "rank_md": rep.rank_md,
           "rank_joint": rep.rank_joint, "capacity_bits": rep.capacity_bits,
           "jgk_bits": rep.jgk_bits}, args)
    return EXIT_OK


def cmd_entropy(args) -> int:
    spec = _load_spec(args.spec)
    users = _parse_set(args.set)
    try:
        ordered = spec.ordered(users)
    except ls.SpecError as exc:
        raise InputError(str(exc)) from None
    _emit({"verb": "entropy", "path": args.spec, "set": list(ordered),
           "entropy_bits": ls.subset_entropy(spec, ordered)}, args)
    return EXIT_OK


def cmd_wyner2(args) -> int:
    spec = _load_spec(args.spec)
    try:
        rec = ls.bivariate_identities(spec)
    except ls.SpecError as exc:
        raise InputError(f"{args.spec}: {exc}") from None
    _emit({"verb": "wyner2", "path": args.spec, "jgk_bits": rec.jgk_bits, "mi_bits": rec.mi_bits,
           "wyner_bits": rec.wyner_bits, "cond_mi_bits": rec.cond_mi_bits,
           "certified": rec.certified, "g_matrix": format_matrix(rec.witness.g_matrix)}, args)
    return EXIT_OK


def cmd_mmi(args) -> int:
    src = _load_any_source(args.source)
    users = _parse_set(args.set) or list(src.users)
    try:
        val, part = ds.multivariate_mi(src, users)
    except (KeyError, ValueError) as exc:
        raise InputError(str(exc)) from None
    _emit({"verb": "mmi", "path": args.source, "set": list(src.ordered(users)), "mmi_bits": val,
           "argmin_partition": [list(b) for b in part.blocks]}, args)
    return EXIT_OK


def cmd_check_dm(args) -> int:
    src = _load_any_source(args.joint)
    b = _parse_set(args.set) or None
    try:
        rep = ds.verify_double_markov(src, args.q, _parse_set(args.active), b)
    except (KeyError, ValueError) as exc:
        raise InputError(str(exc)) from None
    _emit({"verb": "check-dm", "path": args.joint,
           "antecedent_mi_bits": rep.antecedent_mis,
           "antecedents_exact_zero": rep.antecedents_exact_zero,
           "consequent_mi_bits": rep.consequent_mi,
           "consequent_exact_zero": rep.consequent_exact_zero,
           "hypothesis_holds": rep.hypothesis_holds}, args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _load_spec(args.spec)
    if args.n < 1 or args.trials < 1 or args.seed < 0:
        raise InputError("--n and --trials must be positive and --seed non-negative")
    rep = simulate(build_extractor(spec), args.n, args.trials, args.seed, binning=args.binning)
    _emit({"verb": "simulate", "path": args.spec, **rep.to_dict()}, args)
    return EXIT_OK


def xcheck_spec(spec: ls.LinearSourceSpec) -> dict:
    """Linear-algebra values next to their brute-force oracle counterparts."""
    res = ls.mcf(spec)
    cap = ls.capacity(spec, res)
    src = ls.export_discrete(spec)
    lab = ds.ergodic_decomposition(src, spec.active)
    cap_oracle = ds.capacity_oracle(src, spec.active, spec.untrusted)
    ok = (abs(res.jgk_bits - lab.jgk_bits) <= XCHECK_TOL
          and abs(cap.capacity_bits - cap_oracle) <= XCHECK_TOL)
    return {"jgk_bits": res.jgk_bits, "oracle_jgk_bits": lab.jgk_bits,
            "capacity_bits": cap.capacity_bits, "oracle_capacity_bits": cap_oracle,
            "pass": ok}


def cmd_xcheck(args) -> int:
    failed = 0
    for path in args.specs:
        rec = xcheck_spec(_load_spec(path))
        failed += not rec["pass"]
        _emit({"verb": "xcheck", "path": path, **rec}, args)
    return EXIT_MISMATCH if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("both", "json", "table"), default="both",
                        help="output style (default: table then one JSON line)")
    ap = argparse.ArgumentParser(prog="gkcap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    sp = sub.add_parser("mcf", parents=[common], help="maximal common function of the active users")
    sp.add_argument("spec")
    sp.set_defaults(func=cmd_mcf)

    sp = sub.add_parser("capacity", parents=[common], help="zero-discussion secrecy capacity H(G|Z_D)")
    sp.add_argument("spec")
    sp.set_defaults(func=cmd_capacity)

    sp = sub.add_parser("entropy", parents=[common], help="joint entropy of a user subset")
    sp.add_argument("spec")
    sp.add_argument("--set", default="", help="comma-separated user ids")
    sp.set_defaults(func=cmd_entropy)

    sp = sub.add_parser("wyner2", parents=[common], help="GK / mutual / Wyner common information of two users")
    sp.add_argument("spec")
    sp.set_defaults(func=cmd_wyner2)

    sp = sub.add_parser("mmi", parents=[common], help="partition-based multivariate mutual information")
    sp.add_argument("source", help="discrete-source or linear-source JSON")
    sp.add_argument("--set", default=None, help="comma-separated user ids (default: all)")
    sp.set_defaults(func=cmd_mmi)

    sp = sub.add_parser("check-dm", parents=[common], help="double Markov verifier")
    sp.add_argument("joint", help="discrete-source JSON containing Q and Z_B")
    sp.add_argument("--active", required=True, help="comma-separated active users")
    sp.add_argument("--q", default="Q", help="id of the designated variable (default Q)")
    sp.add_argument("--set", default=None, help="the set B (default: all users except Q)")
    sp.set_defaults(func=cmd_check_dm)

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo key agreement with no discussion")
    sp.add_argument("spec")
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--binning", action="store_true", help="random-binning key instead of linear")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("xcheck", parents=[common], help="compare linear results against the discrete oracle")
    sp.add_argument("specs", nargs="+")
    sp.set_defaults(func=cmd_xcheck)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ls.ExhaustionCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ls.SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
