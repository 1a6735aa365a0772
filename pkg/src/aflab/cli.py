"""``af-lab`` command line.

Exit codes: 0 ok, 2 invalid configuration, 3 verification failure, 4 I/O error.
Errors are written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import bases, constellation, dpaf, fstaf, receiver, serialization, verify, whgroup
from .errors import AfLabError, InvalidArgumentError

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_IO = 0, 2, 3, 4

ANCHORS = {
    "dp_mainlobe": "E|A_DP(0,0)|^2 = N^2 + (kappa-1)N",
    "dp_eisl": "EISL_DP = (N^2 - N)(N + kappa - 1); normalized N - 1",
    "dp_grid": "E|A_DP(k,q)|^2 = N + (kappa-2) sum_n |u_n^H D_q J_k u_n|^2 + N^2 delta_k delta_q",
    "fst_mainlobe": "E|A_FST(0,0)|^2 = M^2 N^2 + (kappa-1)MN",
    "fst_eisl": "EISL_FST = M^2N^2 - MN + (kappa-2)MN(||V^T kron F_N U||_4^4 - 1)",
    "fst_grid": "E|A_FST(k,q)|^2 = MN + M^2N^2 delta + (kappa-2)MN || |V|^2 f_q* ||^2 || |U^H F^H|^2 f_k ||^2",
    "afdm_phi": "phi = gcd(2 N c1, N)",
    "index_set": "I_U = {(k,q): U^H D_q J_k U diagonal}; |I_U| <= N; no (a,b),(a,b+1),(a+1,b)",
    "mf_dp": "MF = sum_l beta_l exp(-j2pi k_l (q-q_l)/N) A_DP(k-k_l, q-q_l)",
    "mf_fst": "MF = sum_l beta_l A_FST(k-k_l, q-q_l)",
    "optimality": "kappa < 2: OFDM minimal per bin and in EISL; kappa > 2: OTFS minimal",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArgumentError(message)


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="root seed (default 0)")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads for Monte Carlo")
    p.add_argument("--out-dir", default=d("."), help="directory for output files")
    p.add_argument("--format", choices=("csv", "json", "pgm"), default=d("csv"), help="grid output format")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="af-lab", description="Expected ambiguity functions of random communication waveforms.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        return p

    p = add("dp", "discrete periodic AF grid")
    p.add_argument("--waveform", required=True, help="sc|ofdm|otfs:N1xN2|afdm:c1[,c2]|file:path")
    p.add_argument("--constellation", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", default="closed", help="closed|mc:<trials>|enum")
    p.add_argument("--pgm", help="also write an 8-bit PGM preview here")

    p = add("fst", "fast-slow-time AF grid")
    p.add_argument("--waveform", required=True, help="sc|ofdm|otfs|afdm:c1[,c2]|file:U,V")
    p.add_argument("--constellation", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--mode", default="closed", help="closed|mc:<trials>|enum")

    p = add("index-set", "diagonalizability index set of a basis")
    p.add_argument("--waveform", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tol", type=float, default=whgroup.DIAG_TOL)

    p = add("mf", "matched-filter simulation")
    p.add_argument("--framing", choices=("dp", "fst"), required=True)
    p.add_argument("--targets", required=True, help="k:q:re:im[,k:q:re:im...]")
    p.add_argument("--noise", type=float, default=0.0, help="per-sample noise variance")
    p.add_argument("--waveform", default="ofdm")
    p.add_argument("--constellation", default="qam16")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--n-cp", type=int, default=16)
    p.add_argument("--mode", choices=("approx", "exact"), default="approx", help="FST channel model")

    p = add("probe-optimality", "compare random schemes with OFDM/OTFS")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--schemes", type=int, default=50)

    p = add("verify", "run the verification suite")
    level = p.add_mutually_exclusive_group()
    level.add_argument("--quick", dest="level", action="store_const", const="quick")
    level.add_argument("--full", dest="level", action="store_const", const="full")
    p.set_defaults(level="quick")

    p = add("constellation-stats", "moments of a constellation")
    p.add_argument("--constellation", required=True)
    return parser


def _parse_mode(text: str) -> tuple[str, int | None]:
    if text == "closed":
        return "closed", None
    if text == "enum":
        return "enum", None
    m = re.fullmatch(r"mc:(\d+)", text)
    if m and int(m.group(1)) >= 1:
        return "mc", int(m.group(1))
    raise InvalidArgumentError(f"mode must be closed, enum or mc:<trials>, got {text!r}")


def _check_size(name: str, value: int, low: int = 1) -> None:
    if value < low:
        raise InvalidArgumentError(f"--{name} must be >= {low}, got {value}")


def _config(args) -> dict:
    skip = {"threads", "out_dir", "pgm"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit_grid(args, stem: str, grid: dpaf.AFGrid, sidecar: dict) -> dict:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    if args.format == "csv":
        files["grid"] = str(serialization.write_grid_csv(grid.values, out / f"{stem}.csv"))
    elif args.format == "pgm":
        files["grid"] = str(serialization.write_pgm(grid.values, out / f"{stem}.pgm"))
    else:
        sidecar = dict(sidecar, values=grid.values)
    if getattr(args, "pgm", None):
        files["pgm"] = str(serialization.write_pgm(grid.values, args.pgm))
    serialization.write_json(sidecar, out / f"{stem}.json")
    return files


def _public_meta(meta: dict) -> dict:
    return {k: v for k, v in meta.items() if not isinstance(v, np.ndarray)}


def cmd_dp(args) -> int:
    _check_size("n", args.n, 2)
    basis = bases.parse_waveform(args.waveform, args.n)
    const = constellation.parse_constellation(args.constellation)
    mode, trials = _parse_mode(args.mode)
    if mode == "closed":
        grid = dpaf.closed_form_dp_grid(basis, const)
    elif mode == "enum":
        grid = dpaf.enumerated_expected_dp_grid(basis, const)
    else:
        grid = dpaf.mc_expected_dp_grid(basis, const, trials, args.seed, threads=args.threads)
    e = dpaf.eisl_dp(grid)
    sidecar = {"mainlobe": e["mainlobe"], "eisl": e["eisl"], "normalized_eisl": e["normalized_eisl"],
               "meta": dict(_public_meta(grid.meta), mode=grid.mode, constellation=const.label),
               "config": _config(args),
               "paper_anchor": {k: ANCHORS[k] for k in ("dp_grid", "dp_mainlobe", "dp_eisl")}}
    _emit_grid(args, "dp", grid, sidecar)
    print(serialization.dumps({k: sidecar[k] for k in ("mainlobe", "eisl", "normalized_eisl")}), end="")
    return EXIT_OK


def cmd_fst(args) -> int:
    _check_size("n", args.n, 2)
    _check_size("m", args.m, 1)
    scheme = bases.parse_scheme(args.waveform, args.n, args.m)
    const = constellation.parse_constellation(args.constellation)
    mode, trials = _parse_mode(args.mode)
    if mode == "closed":
        grid = fstaf.closed_form_fst_grid(scheme, const)
    elif mode == "enum":
        grid = fstaf.enumerated_expected_fst_grid(scheme, const)
    else:
        grid = fstaf.mc_expected_fst_grid(scheme, const, trials, args.seed, threads=args.threads)
    e = fstaf.eisl_fst(grid, scheme=scheme, kappa=const)
    sidecar = {"mainlobe": e["mainlobe"], "eisl_grid_route": e["eisl_grid_route"],
               "eisl_formula_route": e["eisl_formula_route"], "kron_fourth_norm": e["kron_fourth_norm"],
               "meta": dict(_public_meta(grid.meta), mode=grid.mode, constellation=const.label),
               "config": _config(args),
               "paper_anchor": {k: ANCHORS[k] for k in ("fst_grid", "fst_mainlobe", "fst_eisl")}}
    if scheme.kind == "afdm":
        sidecar["phi"] = fstaf.afdm_phi(args.n, scheme.u_basis.params["c1"])
        sidecar["paper_anchor"]["phi"] = ANCHORS["afdm_phi"]
    _emit_grid(args, "fst", grid, sidecar)
    print(serialization.dumps({k: sidecar[k] for k in ("mainlobe", "eisl_grid_route", "eisl_formula_route")}), end="")
    return EXIT_OK


def cmd_index_set(args) -> int:
    _check_size("n", args.n, 2)
    basis = bases.parse_waveform(args.waveform, args.n)
    s = whgroup.index_set(basis, args.tol)
    rep = whgroup.geometry_report(s)
    result = {"members": [list(p) for p in s.sorted_members()], "cardinality": rep.cardinality,
              "no_2x2": rep.no_2x2, "min_triangle_area": rep.min_triangle_area,
              "min_half_symplectic": rep.min_half_symplectic, "area_ok": rep.area_ok,
              "waveform": basis.label, "n": args.n, "tol": args.tol,
              "paper_anchor": ANCHORS["index_set"]}
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    serialization.write_json(result, out / "index_set.json")
    print(serialization.dumps(result), end="")
    return EXIT_OK


def cmd_mf(args) -> int:
    targets = receiver.parse_targets(args.targets)
    const = constellation.parse_constellation(args.constellation)
    scenario = receiver.Scenario(targets, args.noise, args.n_cp)
    if args.framing == "dp":
        basis = bases.parse_waveform(args.waveform, args.n)
        x = basis.matrix @ constellation.sample(const, args.n, args.seed).values
        y = receiver.simulate_dp_echo(x, scenario, args.seed)
        grid = receiver.mf_dp_grid(x, y)
        predicted = receiver.predicted_mf_dp(x, targets)
        anchor = ANCHORS["mf_dp"]
    else:
        scheme = bases.parse_scheme(args.waveform, args.n, args.m)
        s = constellation.sample(const, (args.n, args.m), args.seed).values
        x = scheme.u_basis.matrix @ s @ scheme.v_basis.matrix
        y = receiver.simulate_fst_echo(x, scenario, args.seed, mode=args.mode)
        grid = receiver.mf_fst_grid(x, y)
        predicted = receiver.predicted_mf_fst(x, targets)
        anchor = ANCHORS["mf_fst"]
    power = np.abs(grid) ** 2
    peaks = [{"k": t.delay_k, "q": t.doppler_q, "mf_power": float(power[t.delay_k % power.shape[0],
                                                                        t.doppler_q % power.shape[1]])}
             for t in targets]
    result = {"targets": [{"k": t.delay_k, "q": t.doppler_q, "gain": t.gain} for t in targets],
              "peaks": peaks, "reconstruction_error": receiver.reconstruction_error(grid, predicted),
              "snr": receiver.snr(x, args.noise), "config": _config(args), "paper_anchor": anchor}
    grid_obj = dpaf.AFGrid(power, "realized", {}, framing=args.framing)
    _emit_grid(args, "mf", grid_obj, result)
    print(serialization.dumps({k: result[k] for k in ("peaks", "reconstruction_error")}), end="")
    return EXIT_OK


def cmd_probe(args) -> int:
    _check_size("n", args.n, 2)
    _check_size("m", args.m, 1)
    _check_size("schemes", args.schemes, 1)
    report = fstaf.optimality_probe(args.n, args.m, args.kappa, args.schemes, args.seed)
    report["paper_anchor"] = ANCHORS["optimality"]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    serialization.write_json(report, out / "probe_optimality.json")
    print(serialization.dumps(report), end="")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_verify(args) -> int:
    report = verify.verify(args.level)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    serialization.write_json(report.to_dict(), out / f"verify_{args.level}.json")
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  ({c.runtime:.2f}s)")
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_stats(args) -> int:
    c = constellation.parse_constellation(args.constellation)
    result = dict(constellation.stats(c).to_dict(), label=c.label, size=c.size)
    print(serialization.dumps(result), end="")
    return EXIT_OK


COMMANDS = {"dp": cmd_dp, "fst": cmd_fst, "index-set": cmd_index_set, "mf": cmd_mf,
            "probe-optimality": cmd_probe, "verify": cmd_verify, "constellation-stats": cmd_stats}


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise InvalidArgumentError(f"--threads must be >= 1, got {args.threads}")
        return COMMANDS[args.command](args)
    except AfLabError as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
