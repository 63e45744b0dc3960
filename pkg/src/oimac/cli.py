"""Command-line front end.

    oimac bounds    --family peak --a1 0.3 [--snr-lo 0 --snr-hi 40 --snr-steps 81]
    oimac decompose exp-binary --a 0.44
    oimac check     rearrangement | ordering | asymptotes

Bound sweeps go out as CSV (snr_db, sigma, bound_name, kind, value), everything
else as JSON. Exit status is 0 on success and 1 on any failure or error.

SNR is 1/sigma. By default SNR_dB = 10 log10(1/sigma); pass --db-convention 20
for the amplitude reading. The sigma column makes either choice auditable.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import capacity, decomp, dists

DEFAULTS = {
    "family": None, "a1": None, "e1": None, "alpha1": None, "alpha2": None,
    "snr_lo": 0.0, "snr_hi": 40.0, "snr_steps": 81, "bounds": None,
    "units": "nats", "db_convention": 10, "seed": None, "jobs": 1,
}
CSV_HEADER = ("snr_db", "sigma", "bound_name", "kind", "value")


class CliError(Exception):
    pass


class UnknownBound(CliError):
    pass


class InvalidRange(CliError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1 like every other failure
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _num(x: float) -> str:
    return repr(float(x))


def _json_safe(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _json_safe(obj.item())
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _dump(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- bounds

def _merge(args: argparse.Namespace) -> dict:
    """Defaults < config file < explicit flags."""
    req = dict(DEFAULTS)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        req.update(data)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            req[k] = v
    if isinstance(req["bounds"], str):
        req["bounds"] = [b for b in req["bounds"].split(",") if b]
    return req


def config_from_request(req: dict) -> capacity.ChannelConfig:
    fam = req["family"]
    if fam is None:
        raise CliError("--family is required")
    fam = fam.replace("-", "_")
    need = {"peak": ("a1",), "average": ("e1",), "peak_average": ("a1", "alpha1")}
    if fam not in need:
        raise CliError(f"unknown family {req['family']!r}")
    missing = [k for k in need[fam] if req[k] is None]
    if missing:
        raise CliError(f"family {fam} needs " + ", ".join("--" + m for m in missing))
    try:
        if fam == "peak":
            return capacity.ChannelConfig.peak(float(req["a1"]))
        if fam == "average":
            return capacity.ChannelConfig.average(float(req["e1"]))
        a2 = req["alpha2"]
        return capacity.ChannelConfig.peak_average(
            float(req["a1"]), float(req["alpha1"]), None if a2 is None else float(a2))
    except capacity.CapacityError as exc:
        raise CliError(str(exc)) from exc


def _snr_grid(req: dict) -> np.ndarray:
    lo, hi, steps = float(req["snr_lo"]), float(req["snr_hi"]), int(req["snr_steps"])
    if not lo < hi:
        raise InvalidRange(f"need snr-lo < snr-hi, got {lo} >= {hi}")
    if steps < 2:
        raise InvalidRange("need at least 2 SNR steps")
    return np.linspace(lo, hi, steps)


def _one_point(config, sigma, names):
    return capacity.sweep(config, [sigma], names)


def bounds_csv(req: dict) -> str:
    config = config_from_request(req)
    names = req["bounds"]
    known = capacity.bound_names(config.family)
    if names:
        bad = [n for n in names if n not in known]
        if bad:
            raise UnknownBound(f"unknown bounds for {config.family.value}: {bad}; "
                               f"choose from {known}")
    else:
        names = known
    if req["units"] not in ("nats", "bits"):
        raise CliError("units must be nats or bits")
    conv = int(req["db_convention"])
    snrs = _snr_grid(req)
    sigmas = capacity.snr_to_sigma(snrs, conv)

    # points are independent; results are put back in request order
    jobs = max(1, int(req["jobs"]))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            per = list(ex.map(_one_point, [config] * len(sigmas), sigmas,
                              [names] * len(sigmas)))
    else:
        per = [_one_point(config, s, names) for s in sigmas]

    bits = req["units"] == "bits"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for snr, s, curves in zip(snrs, sigmas, per):
        by_name = {c.name: c for c in curves}
        for n in names:
            c = by_name[n]
            v = c.points[0][1]
            w.writerow((_num(snr), _num(s), n, c.kind,
                        _num(v / math.log(2.0) if bits else v)))
    return buf.getvalue()


def cmd_bounds(args) -> int:
    req = _merge(args)
    _emit(bounds_csv(req), args.out)
    return 0


# ---------------------------------------------------------------- decompose

def _fraction_or_float(s: str):
    """'3/8' stays an exact rational; anything else is a float."""
    return Fraction(s) if "/" in s else float(s)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise CliError(f"{args.kind} needs " + ", ".join("--" + m for m in missing))
    return [getattr(args, n) for n in names]


def build_split(args) -> tuple[decomp.Split, dict]:
    k = args.kind
    if k == "uniform-binary":
        (a,) = _need(args, "a")
        return decomp.decompose_uniform_binary(_fraction_or_float(a)), {"a": a}
    if k == "uniform-contracted":
        (kk,) = _need(args, "k")
        return decomp.decompose_uniform_contracted(kk), {"k": kk}
    if k == "exp-verdu":
        (a,) = _need(args, "a")
        return decomp.decompose_exp_verdu(float(a)), {"a": float(a)}
    if k == "exp-binary":
        (a,) = _need(args, "a")
        return decomp.decompose_exp_binary(float(a), args.J), {"a": float(a), "J": args.J}
    if k == "truncexp-binary":
        a, lam = _need(args, "a", "lam")
        return (decomp.decompose_truncexp_binary(_fraction_or_float(a), lam, args.J),
                {"a": a, "lambda": lam, "J": args.J})
    if k == "truncexp-contracted":
        kk, lam = _need(args, "k", "lam")
        return (decomp.decompose_truncexp_contracted(kk, lam, args.width),
                {"k": kk, "lambda": lam, "width": args.width})
    if k == "discrete-uniform":
        k1, n = _need(args, "k1", "n")
        return decomp.decompose_discrete_uniform(k1, n), {"k1": k1, "n": n}
    if k == "geometric":
        lam, lam1 = _need(args, "lam", "lam1")
        return decomp.decompose_geometric(lam, lam1), {"lambda": lam, "lambda1": lam1}
    if k == "truncgeom":
        k1, n, lam = _need(args, "k1", "n", "lam")
        return decomp.decompose_truncgeom(k1, n, lam), {"k1": k1, "n": n, "lambda": lam}
    raise CliError(f"unknown decomposition {k!r}")  # pragma: no cover - argparse choices


def decompose_report(args) -> dict:
    split, params = build_split(args)
    rep = decomp.verify_split(split, mc_seed=args.seed)
    out = rep.to_dict()
    out["kind"] = split.name
    out["params"] = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in params.items()}
    out["index_set"] = list(split.index_set.indices) if split.index_set is not None else None
    return out


def cmd_decompose(args) -> int:
    out = decompose_report(args)
    _emit(_dump(out), args.out)
    return 0 if out["pass"] else 1


# ---------------------------------------------------------------- check

def _check_rearrangement(args) -> tuple[dict, bool]:
    rep = decomp.check_rearrangement(args.n_max, args.order)
    out = {"check": "rearrangement", "order": rep.order, "n_max": rep.n_max,
           "pass": rep.passed, "failures": rep.failures,
           "min_rel_margin": rep.min_rel_margin}
    if not rep.passed and rep.order != "unmerged":
        out["note"] = ("the merged rearrangement violates b_n <= r_n; "
                       "--order unmerged checks the sequence the construction uses")
    return out, rep.passed


def _check_ordering(args) -> tuple[dict, bool]:
    names = args.figures.split(",") if args.figures else list(capacity.FIGURES)
    unknown = [n for n in names if n not in capacity.FIGURES]
    if unknown:
        raise CliError(f"unknown figures {unknown}; choose from {list(capacity.FIGURES)}")
    sigmas = capacity.snr_to_sigma(np.linspace(0.0, 40.0, args.steps), args.db_convention)
    reps = [capacity.check_ordering(capacity.FIGURES[n], sigmas, n) for n in names]
    ok = all(r.passed for r in reps)
    return {"check": "ordering", "db_convention": args.db_convention, "steps": args.steps,
            "pass": ok, "figures": [r.to_dict() for r in reps]}, ok


def _check_asymptotes(args) -> tuple[dict, bool]:
    rows = capacity.check_asymptotes(args.sigma)
    ok = all(r.passed for r in rows)
    return {"check": "asymptotes", "sigma": args.sigma, "pass": ok,
            "rows": [{"name": r.name, "value": r.value, "target": r.target,
                      "error": abs(r.value - r.target), "pass": r.passed} for r in rows]}, ok


CHECKS = {"rearrangement": _check_rearrangement, "ordering": _check_ordering,
          "asymptotes": _check_asymptotes}


def cmd_check(args) -> int:
    out, ok = CHECKS[args.name](args)
    _emit(_dump(out), args.out)
    return 0 if ok else 1


# ---------------------------------------------------------------- parser

DECOMP_KINDS = ("uniform-binary", "uniform-contracted", "exp-verdu", "exp-binary",
                "truncexp-binary", "truncexp-contracted", "discrete-uniform",
                "geometric", "truncgeom")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oimac", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bounds", help="sum-capacity bounds over an SNR grid, as CSV")
    b.add_argument("--config", help="JSON file with any of the flag names as keys")
    b.add_argument("--family", choices=("peak", "average", "peak_average", "peak-average"))
    b.add_argument("--a1", type=float, help="normalised peak of user 1 (A1 + A2 = 1)")
    b.add_argument("--e1", type=float, help="normalised average of user 1 (E1 + E2 = 1)")
    b.add_argument("--alpha1", type=float, help="average-to-peak ratio of user 1")
    b.add_argument("--alpha2", type=float, help="average-to-peak ratio of user 2 (default alpha1)")
    b.add_argument("--snr-lo", dest="snr_lo", type=float)
    b.add_argument("--snr-hi", dest="snr_hi", type=float)
    b.add_argument("--snr-steps", dest="snr_steps", type=int)
    b.add_argument("--bounds", help="comma-separated bound names (default: all of the family)")
    b.add_argument("--units", choices=("nats", "bits"))
    b.add_argument("--db-convention", dest="db_convention", type=int, choices=(10, 20))
    b.add_argument("--jobs", type=int, help="worker processes (output order is fixed)")
    b.add_argument("--seed", type=int, help="accepted for symmetry; bounds are deterministic")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    d = sub.add_parser("decompose", help="build and verify a decomposition, as JSON")
    d.add_argument("kind", choices=DECOMP_KINDS)
    d.add_argument("--a", help="split point or target mean; '3/8' is kept exact")
    d.add_argument("--k", type=int)
    d.add_argument("--k1", type=int)
    d.add_argument("--n", type=int)
    d.add_argument("--lam", "--lambda", dest="lam", type=float)
    d.add_argument("--lam1", "--lambda1", dest="lam1", type=float)
    d.add_argument("--width", type=float, default=1.0)
    d.add_argument("--J", type=int, default=decomp.DEFAULT_J, help="series truncation")
    d.add_argument("--seed", type=int, help="also run a seeded Monte-Carlo KS check")
    d.add_argument("--out")
    d.set_defaults(func=cmd_decompose)

    c = sub.add_parser("check", help="run a property suite; exit 1 on failure")
    c.add_argument("name", choices=tuple(CHECKS))
    c.add_argument("--n-max", dest="n_max", type=int, default=200)
    c.add_argument("--order", choices=decomp.ORDERS, default="printed")
    c.add_argument("--figures", help="comma-separated subset of " + ",".join(capacity.FIGURES))
    c.add_argument("--steps", type=int, default=81)
    c.add_argument("--db-convention", dest="db_convention", type=int, choices=(10, 20),
                   default=10)
    c.add_argument("--sigma", type=float, default=1e-4)
    c.add_argument("--out")
    c.set_defaults(func=cmd_check)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, capacity.CapacityError, decomp.DecompError, dists.DistError) as exc:
        print(f"oimac: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
