"""Command-line entry: ``python3 -m g2calib {verify,sample,flow,dirac,sw}``.

Exit status: 0 when every check passes, 1 on a failed check, 2 on usage
errors (bad flags, unwritable output).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings

import numpy as np

from . import dirac_sw as ds
from . import grassmann as gr
from .checks import DEFAULT_SW_HOLONOMY, REGISTRY, run_checks

SCHEMA = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(kind):
    def parse(text):
        try:
            val = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if val <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return parse


def _non_negative_int(text):
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count {text!r}") from None
    if val < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return val


def _triple(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric holonomy {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="-", help="output path, '-' for stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--tol", type=_positive(float), default=None)

    p = _Parser(prog="g2calib", description="G2 calibration and flat-torus SW toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    v.add_argument("--only", action="append", choices=[c.name for c in REGISTRY])

    s = sub.add_parser("sample", parents=[common], help="project random planes to the associative locus")
    s.add_argument("n", type=_non_negative_int)
    s.add_argument("--defect", type=_positive(float), default=0.3)

    f = sub.add_parser("flow", parents=[common], help="one projection flow from a seeded plane")
    f.add_argument("--defect", type=_positive(float), default=0.3)
    f.add_argument("--steps", type=_positive(int), default=500)
    f.add_argument("--rate", type=_positive(float), default=0.05)

    d = sub.add_parser("dirac", parents=[common], help="flat-torus Dirac spectrum")
    d.add_argument("--K", type=_positive(int), default=4)
    d.add_argument("--holonomy", type=_triple, default=(0.0, 0.0, 0.0))
    d.add_argument("--twist", choices=ds.TWISTS, default="abelian")

    w = sub.add_parser("sw", parents=[common], help="SW gradient descent from a seeded state")
    w.add_argument("--K", type=_positive(int), default=2)
    w.add_argument("--holonomy", type=_triple, default=DEFAULT_SW_HOLONOMY)
    w.add_argument("--steps", type=_positive(int), default=500)
    w.add_argument("--rate", type=_positive(float), default=0.5)
    w.add_argument("--scale", type=_positive(float), default=0.1)
    w.add_argument("--state-out", default=None, help="write the final state as JSON")
    return p


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


def _report(command, checks, extra=None, seconds=0.0) -> dict:
    doc = {
        "schema": SCHEMA,
        "command": command,
        "status": "pass" if all(c["status"] == "pass" for c in checks) else "fail",
        "checks": checks,
        "seconds": round(seconds, 4),
    }
    if extra:
        doc.update(extra)
    return doc


def _row(name, anchor, passed, value, tol) -> dict:
    return {"name": name, "anchor": anchor, "status": "pass" if passed else "fail",
            "value": float(value), "tolerance": float(tol)}


def cmd_verify(args):
    tol = 1e-10 if args.tol is None else args.tol
    results = run_checks(args.seed, tol, args.only)
    rows = [r.as_dict() for r in results]
    fmt = args.format or "json"
    if fmt == "csv":
        text = _csv(["name", "anchor", "status", "value", "tolerance", "seconds"],
                    [[r["name"], r["anchor"], r["status"], _fmt(r["value"]), _fmt(r["tolerance"]),
                      r["seconds"]] for r in rows])
    else:
        text = json.dumps(_report("verify", rows, {"seed": args.seed, "tol": tol},
                                  sum(r.seconds for r in results)), indent=2) + "\n"
    return text, all(r.passed for r in results)


def _child_rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def cmd_sample(args):
    tol = 1e-8 if args.tol is None else args.tol
    rows = []
    failures = 0
    for i, rng in enumerate(_child_rngs(args.seed, args.n)):
        start = gr.plane_at_defect(gr.random_associative_plane(rng), args.defect, rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                plane, info = gr.project_to_associative(start, tol=tol, full_output=True)
                iters = info["iterations"]
            except gr.ConvergenceError as err:
                plane, iters = err.best, err.iterations
                failures += 1
        rows.append((i, _fmt(gr.calibration_value(plane)), _fmt(gr.chi_defect(plane)), iters))
    header = ["seed", "phi_value", "chi_defect", "iterations"]
    if (args.format or "csv") == "json":
        recs = [dict(zip(header, r)) for r in rows]
        ok = failures == 0
        text = json.dumps(_report("sample", [_row("projection flow", "associative locus", ok,
                                                  failures, 0.5)], {"rows": recs}), indent=2) + "\n"
        return text, ok
    return _csv(header, rows), failures == 0


def cmd_flow(args):
    tol = 1e-8 if args.tol is None else args.tol
    rng = _child_rngs(args.seed, 1)[0]
    start = gr.plane_at_defect(gr.random_associative_plane(rng), args.defect, rng)
    t0 = time.perf_counter()
    try:
        plane, info = gr.project_to_associative(start, step=args.rate, tol=tol,
                                                max_iter=args.steps, full_output=True)
        ok, trace, iters = True, info["trace"], info["iterations"]
    except gr.ConvergenceError as err:
        plane, ok, trace, iters = err.best, False, [], err.iterations
    defect = gr.chi_defect(plane)
    if (args.format or "json") == "csv":
        return _csv(["iteration", "chi_defect"], [(i, _fmt(d)) for i, d in enumerate(trace)]), ok
    rows = [_row("projection flow", "associative locus", ok, defect, tol)]
    if ok:
        rank = gr.dchi_rank(plane)
        rows.append(_row("rank of d chi", "associative grassmannian has dimension 8", rank == 4,
                         abs(rank - 4), 0.5))
    extra = {"seed": args.seed, "iterations": iters, "start_defect": gr.chi_defect(start),
             "plane": plane.to_list(), "phi_value": gr.calibration_value(plane), "trace": trace}
    doc = _report("flow", rows, extra, time.perf_counter() - t0)
    return json.dumps(doc, indent=2) + "\n", doc["status"] == "pass"


def cmd_dirac(args):
    tol = 1e-9 if args.tol is None else args.tol
    conn = ds.Connection.flat(args.K, args.holonomy, args.twist)
    D = ds.build_dirac(args.K, conn)
    rows = D.spectrum_rows()
    mult = 1 if args.twist == "abelian" else 2
    err = np.max(np.abs(np.sort([r[3] for r in rows])
                        - ds.flat_spectrum_oracle(args.K, args.holonomy, mult)))
    ok = err < tol
    if (args.format or "csv") == "csv":
        return _csv(["kx", "ky", "kz", "eigenvalue"], [(*r[:3], _fmt(r[3])) for r in rows]), ok
    checks = [_row("flat torus dirac", "spectrum equals +-|2 pi k + a0|", ok, err, tol)]
    extra = {"cutoff": args.K, "holonomy": list(args.holonomy), "twist": args.twist,
             "kernel_dim": ds.kernel_dim(conn, tol),
             "spectrum": [{"k": list(r[:3]), "eigenvalue": r[3]} for r in rows]}
    return json.dumps(_report("dirac", checks, extra), indent=2) + "\n", ok


def cmd_sw(args):
    tol = 1e-10 if args.tol is None else args.tol
    rng = _child_rngs(args.seed, 1)[0]
    init = ds.SWState.random(args.K, rng, args.scale, holonomy=args.holonomy)
    t0 = time.perf_counter()
    res = ds.sw_descent(init, steps=args.steps, rate=args.rate, tol=tol)
    if args.state_out:
        _write(args.state_out, res.state.to_json() + "\n")
    monotone = bool(np.all(np.diff(res.energies) <= 0))
    ok = res.converged and monotone
    if (args.format or "csv") == "csv":
        return _csv(["iteration", "energy", "step"],
                    [(i, _fmt(e), _fmt(s)) for i, e, s in res.trace_rows()]), ok
    checks = [_row("sw descent", "energy reaches tolerance", res.converged, res.energies[-1], tol),
              _row("sw descent monotone", "energy non-increasing", monotone, 0.0, 0.5)]
    extra = {"cutoff": args.K, "holonomy": list(args.holonomy), "energies": res.energies,
             "steps": res.steps}
    return json.dumps(_report("sw", checks, extra, time.perf_counter() - t0), indent=2) + "\n", ok


COMMANDS = {"verify": cmd_verify, "sample": cmd_sample, "flow": cmd_flow,
            "dirac": cmd_dirac, "sw": cmd_sw}


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as err:
        raise UsageError(f"cannot write {path}: {err.strerror}") from None


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        text, ok = COMMANDS[args.command](args)
        _write(args.out, text)
    except UsageError as err:
        print(f"g2calib: error: {err}", file=sys.stderr)
        return 2
    if not ok:
        print(f"g2calib: {args.command}: check failed", file=sys.stderr)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
