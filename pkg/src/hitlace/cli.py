"""Command-line interface: every pipeline as a subcommand with JSON/CSV
reports, deterministic seeds, and a CI-friendly exit-code contract.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 input could not be
parsed, 3 a pipeline stage rejected the input (the module error is echoed).

Chain input schema: {"labels": [...], "P": [[...]], "pi0": [...]?, "target": label?}
Block structure schema: {"block_of": [0, 0, 1, ...]}
Reports carry the versioned schema tag "hitlace-report/1" and are
byte-identical for identical (input, config, seed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import blocks as blocks_mod
from . import compound as compound_mod
from . import interlace as interlace_mod
from . import links as links_mod
from . import moran as moran_mod
from .chains import (
    StochasticMatrix,
    hitting_time_cdf,
    make_absorbing,
    stationary_distribution,
    validate_stochastic,
    stochastic_violations,
)
from .errors import ChainError, EmptySubset, MonotonicityViolated, ParseError

SCHEMA = "hitlace-report/1"

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_PARSE = 2
EXIT_PIPELINE = 3


# -- input handling ---------------------------------------------------------------

def load_chain(path: str):
    """Parse the chain JSON schema; returns (matrix, pi0 | None, target | None)."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read chain file {path}: {exc}") from None
    if not isinstance(doc, dict) or "P" not in doc:
        raise ParseError(f"{path}: expected an object with a 'P' matrix")
    labels = tuple(str(x) for x in doc.get("labels", range(len(doc["P"]))))
    try:
        M = validate_stochastic(doc["P"], labels)
    except ChainError as exc:
        raise ParseError(f"{path}: {exc}") from None
    pi0 = None
    if "pi0" in doc:
        pi0 = np.asarray(doc["pi0"], dtype=np.float64)
        if len(pi0) != M.n_states or abs(pi0.sum() - 1.0) > 1e-9 or pi0.min() < 0:
            raise ParseError(f"{path}: pi0 is not a distribution over the states")
    target = str(doc["target"]) if "target" in doc else None
    return M, pi0, target


def collapse_states(P: StochasticMatrix, pi0, subset, target_label: str):
    """Merge a subset of states (plus the target) into one state.

    The merged row mixes the member rows with weights proportional to pi0 on
    the subset (uniform when pi0 carries no mass there); columns are summed.
    Preprocessing convenience for hitting a set rather than a single state.
    """
    if not subset:
        raise EmptySubset("nothing to collapse")
    idx = sorted({P.index(s) for s in subset} | {P.index(target_label)})
    keep = [i for i in range(P.n_states) if i not in idx]
    n_new = len(keep) + 1
    pos = idx[0]                       # merged state sits at the first member
    new_order = keep[:]
    new_order.insert(sum(1 for i in keep if i < pos), None)  # None = merged

    if pi0 is None:
        weights = np.full(len(idx), 1.0 / len(idx))
        pi0_full = None
    else:
        mass = float(np.sum(pi0[idx]))
        weights = pi0[idx] / mass if mass > 0 else np.full(len(idx), 1.0 / len(idx))
        pi0_full = pi0

    M = P.entries
    merged_row_full = weights @ M[idx, :]
    out = np.zeros((n_new, n_new))
    new_pi0 = np.zeros(n_new) if pi0_full is not None else None
    labels = []
    for a, src in enumerate(new_order):
        row = merged_row_full if src is None else M[src]
        labels.append(str(target_label) if src is None else P.labels[src])
        if new_pi0 is not None:
            new_pi0[a] = np.sum(pi0_full[idx]) if src is None else pi0_full[src]
        for b, dst in enumerate(new_order):
            out[a, b] = row[idx].sum() if dst is None else row[dst]
    return validate_stochastic(out, labels), new_pi0


def _resolve_target(M: StochasticMatrix, flag_target, file_target) -> int:
    label = flag_target if flag_target is not None else file_target
    if label is None:
        return 0
    return M.index(str(label))


# -- report plumbing ----------------------------------------------------------------

def _verdict(criterion: str, value, tolerance):
    if isinstance(value, bool):
        passed = value
    else:
        passed = bool(value <= tolerance)
    return {"criterion": criterion, "passed": passed,
            "value": value, "tolerance": tolerance}


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _emit(report: dict, out_path) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_csv(rows, header, csv_path) -> None:
    lines = [",".join(header)]
    lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in row)
              for row in rows]
    Path(csv_path).write_text("\n".join(lines) + "\n")


# -- subcommands ----------------------------------------------------------------------

def _cmd_validate(args) -> tuple[dict, list]:
    try:
        doc = json.loads(Path(args.input).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {args.input}: {exc}") from None
    violations = stochastic_violations(doc.get("P", [[]]))
    payload = {"n_states": len(doc.get("P", [])), "violations": violations}
    verdicts = [_verdict("matrix is row-stochastic", len(violations) == 0, 0)]
    return payload, verdicts


def _prepare(args):
    M, pi0, file_target = load_chain(args.input)
    target_label = args.target if args.target is not None else file_target
    if args.collapse:
        subset = [s.strip() for s in args.collapse.split(",") if s.strip()]
        if target_label is None:
            target_label = subset[0]
        M, pi0 = collapse_states(M, pi0, subset, target_label)
    target = _resolve_target(M, target_label, None)
    return M, pi0, target


def _cmd_decompose(args) -> tuple[dict, list]:
    M, _, target = _prepare(args)
    dec = interlace_mod.decompose(M, target=target, horizon=args.horizon,
                                  tol_algebraic=args.tol_algebraic,
                                  tol_spectral=args.tol_spectral)
    labels = [M.labels[i] for i in dec.permutation]
    payload = {
        "state_order": labels,
        "shift_applied": dec.shift_applied,
        "lambdas": dec.spectra.lambdas.tolist(),
        "gammas": dec.spectra.gammas.tolist(),
        "rho": dec.star.rho.tolist(),
        "pi_star": dec.star.pi_star.tolist(),
        "P_star": dec.star.P_star.entries.tolist(),
        "P_hat": dec.dual.P_hat.entries.tolist(),
        "lambda1": dec.lambda1.matrix.tolist(),
        "lambda2": dec.lambda2.matrix.tolist(),
        "lambda": dec.link.matrix.tolist(),
        "certificates": {
            "lambda1": json.loads(dec.cert_lambda1.to_json()),
            "lambda2": json.loads(dec.cert_lambda2.to_json()),
            "lambda": json.loads(dec.cert_link.to_json()),
        },
        "cdf_max_discrepancy": dec.cdf_max_discrepancy,
        "tail_residual": dec.tail_residual,
        "lambda_is_stochastic": dec.link.is_stochastic,
    }
    verdicts = [
        _verdict("link certificate residuals", dec.cert_link.max_residual(),
                 args.tol_spectral),
        _verdict("absorption column exact", dec.cert_link.residual_absorption, 1e-10),
        _verdict("CDF max discrepancy", dec.cdf_max_discrepancy, args.tol_spectral),
        _verdict("stationary tail identity", dec.tail_residual, 1e-10),
    ]
    if args.csv:
        t = np.arange(args.horizon + 1)
        rows = zip(t.tolist(), dec.cdf_primary.values.tolist(),
                   dec.cdf_dual.values.tolist(), dec.cdf_convolution.values.tolist())
        _emit_csv(rows, ["t", "cdf_primary", "cdf_dual", "cdf_convolution"], args.csv)
    return payload, verdicts


def _cmd_brown_v(args) -> tuple[dict, list]:
    M, _, target = _prepare(args)
    if target != 0:
        perm = (target, *(i for i in range(M.n_states) if i != target))
        M = StochasticMatrix(M.entries[np.ix_(perm, perm)],
                             tuple(M.labels[i] for i in perm))
    pi = stationary_distribution(M)
    report = compound_mod.check_p00_monotone(M, pi, args.horizon + 1)
    if not report.monotone:
        raise MonotonicityViolated(
            f"return probability rises at t={report.first_violation}",
            t=report.first_violation)
    dual, link, cert = compound_mod.build_ladder_dual(M, pi, args.horizon)
    cg = compound_mod.compound_geometric_cdf(float(pi[0]), report.v, args.horizon)
    exact = hitting_time_cdf(pi, make_absorbing(M, 0), 0, args.horizon)
    dual_cdf = hitting_time_cdf(dual.pihat0, dual.Phat, 0, args.horizon)
    disc = max(exact.max_abs_diff(cg), exact.max_abs_diff(dual_cdf))
    condition = compound_mod.check_v_link_condition(M, pi, args.horizon)
    payload = {
        "monotone": report.monotone,
        "horizon": args.horizon,
        "v_tail": report.v.tail[:args.horizon + 1].tolist(),
        "q": dual.q.tolist(),
        "lambda_is_stochastic": link.is_stochastic,
        "link_condition": condition.holds,
        "link_condition_witness": condition.witness,
        "truncation_defect": dual.truncation_defect,
        "certificate": json.loads(cert.to_json()),
        "cdf_max_discrepancy": disc,
    }
    verdicts = [
        _verdict("CDF max discrepancy", disc, 1e-9),
        _verdict("ladder certificate residuals", cert.max_residual(), 1e-9),
        _verdict("link condition matches stochasticity",
                 condition.holds == link.is_stochastic, 0),
    ]
    return payload, verdicts


def _cmd_moran(args) -> tuple[dict, list]:
    n = args.n
    mean, var = moran_mod.moran_moments(n)
    cert = moran_mod.certify_moran(n)
    disc = moran_mod.geometric_decomposition_check(n, args.horizon)
    payload = {
        "n": n,
        "mean": float(mean),
        "variance": float(var),
        "mean_exact": str(mean),
        "variance_exact": str(var),
        "max_cdf_discrepancy": disc,
        "certify_residuals": json.loads(cert.to_json()),
    }
    verdicts = [
        _verdict("mean equals (n-1)^2", mean == (n - 1) ** 2, 0),
        _verdict("decay decomposition CDF discrepancy", disc, 1e-9),
        _verdict("dual link certificate residuals", cert.max_residual(), 1e-8),
    ]
    return payload, verdicts


def _cmd_block(args) -> tuple[dict, list]:
    M, pi0, _ = _prepare(args)
    try:
        doc = json.loads(Path(args.blocks).read_text())
        structure = blocks_mod.BlockStructure(np.asarray(doc["block_of"], dtype=np.int64))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ParseError(f"cannot read block structure {args.blocks}: {exc}") from None
    dual = blocks_mod.fit_block_dual(M, structure)
    link = blocks_mod.block_link(structure, dual.mus)
    if pi0 is None:
        pi0 = stationary_distribution(M)
    pihat0 = np.array([float(np.sum(pi0[structure.members(i)]))
                       for i in range(structure.n_blocks)])
    cert = links_mod.certify(link, pi0, M, pihat0, dual.Phat)
    payload = {
        "P_hat": dual.Phat.entries.tolist(),
        "mu": [m.tolist() for m in dual.mus],
        "proportionality_residual": dual.residual,
        "warnings": list(dual.warnings),
        "certificate": json.loads(cert.to_json()),
    }
    verdicts = [
        _verdict("block proportionality residual", dual.residual, args.tol_algebraic),
        _verdict("semigroup residual", cert.residual_semigroup, args.tol_algebraic),
        _verdict("initial law decomposes over blocks", cert.residual_initial,
                 args.tol_algebraic),
    ]
    return payload, verdicts


def _cmd_link_sim(args) -> tuple[dict, list]:
    M, _, target = _prepare(args)
    dec = interlace_mod.decompose(M, target=target, horizon=args.horizon,
                                  tol_algebraic=args.tol_algebraic,
                                  tol_spectral=args.tol_spectral)
    if not dec.link.is_stochastic:
        raise ChainError("composed link has negative entries; "
                         "sample-path linking is unavailable for this chain")
    P_abs = make_absorbing(dec.P_work, 0)
    snapshots = tuple(t for t in (1, 2, 3, 5, 8) if t <= args.horizon)
    batch = links_mod.sample_linked_pairs(
        dec.pi, P_abs, dec.link, dec.dual.pi_hat, dec.dual.P_hat, 0, 0,
        args.paths, args.seed, snapshot_times=snapshots)
    cells = links_mod.conditional_law_cells(batch, dec.link)
    big = links_mod.testable_cells(cells)
    within = sum(1 for c in big if c["within_3se"])
    chi = []
    for t in snapshots:
        for xh in range(dec.link.shape[0]):
            grp = [c for c in cells if c["t"] == t and c["dual_state"] == xh
                   and c["expected"] > 0]
            if not grp:
                continue
            n_obs = grp[0]["n"]
            stat = sum((c["n"] * (c["observed"] - c["expected"])) ** 2
                       / (c["n"] * c["expected"]) for c in grp)
            chi.append({"t": t, "dual_state": xh, "n": n_obs,
                        "chi_square": stat, "dof": len(grp) - 1})
    agree = batch.absorption_agreement()
    payload = {
        "paths": args.paths,
        "absorption_times_equal": agree,
        "absorption_agreement_fraction": agree / args.paths,
        "cells_tested": len(big),
        "cells_within_3se": within,
        "cell_pass_fraction": within / len(big) if big else 1.0,
        "chi_square_table": chi,
    }
    verdicts = [
        _verdict("absorption times agree on every pair",
                 agree == args.paths, 0),
        _verdict("conditional law cells within 3 standard errors",
                 within >= 0.99 * len(big) if big else True, 0),
    ]
    return payload, verdicts


# -- entry point -------------------------------------------------------------------------

def _add_common(p, with_input=True):
    if with_input:
        p.add_argument("input", help="chain JSON file")
    p.add_argument("--target", default=None, help="target state label")
    p.add_argument("--horizon", type=int, default=500)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol-algebraic", type=float, default=1e-10, dest="tol_algebraic")
    p.add_argument("--tol-spectral", type=float, default=1e-8, dest="tol_spectral")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.add_argument("--collapse", default=None,
                   help="comma-separated labels to merge into the target first")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hitlace",
        description="certified intertwining decompositions of Markov chain hitting times")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a chain file against the input schema")
    _add_common(p)

    p = sub.add_parser("decompose", help="interlaced-spectra star-chain pipeline")
    _add_common(p)
    p.add_argument("--csv", default=None, help="write the CDF table here as CSV")

    p = sub.add_parser("brown-v", help="compound-geometric representation")
    _add_common(p)
    p.set_defaults(horizon=200)

    p = sub.add_parser("moran", help="pair-merge partition chain closed forms")
    p.add_argument("n", type=int)
    _add_common(p, with_input=False)
    p.set_defaults(horizon=2000)

    p = sub.add_parser("block", help="fit a block dual and certify its link")
    _add_common(p)
    p.add_argument("--blocks", required=True, help="block structure JSON file")

    p = sub.add_parser("link-sim", help="Monte Carlo sample-path linking statistics")
    _add_common(p)
    p.add_argument("--paths", type=int, default=10_000)
    return parser


_COMMANDS = {
    "validate": _cmd_validate,
    "decompose": _cmd_decompose,
    "brown-v": _cmd_brown_v,
    "moran": _cmd_moran,
    "block": _cmd_block,
    "link-sim": _cmd_link_sim,
}


def run(args) -> int:
    # where the report is written does not affect what was computed, so the
    # destination flags stay out of the echo to keep reports byte-identical
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("command", "out", "csv")}
    try:
        payload, verdicts = _COMMANDS[args.command](args)
    except ParseError as exc:
        _emit({"schema": SCHEMA, "command": args.command, "config": config,
               "error": {"kind": "parse", "message": str(exc)}}, args.out)
        return EXIT_PARSE
    except ChainError as exc:
        _emit({"schema": SCHEMA, "command": args.command, "config": config,
               "error": {"kind": type(exc).__name__, "message": str(exc)}}, args.out)
        return EXIT_PIPELINE
    report = {"schema": SCHEMA, "command": args.command, "config": config,
              "payload": payload, "verdicts": verdicts}
    _emit(report, args.out)
    return EXIT_OK if all(v["passed"] for v in verdicts) else EXIT_VERDICT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
