"""steinitz-lab command line.

Exit codes: 0 ok, 2 parse error, 3 divergent series, 4 target not in the
domain of sums, 5 undecidable grid family, 6 certificate replay failure.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import redirect_stderr, redirect_stdout

import numpy as np

from . import __version__
from .counterexample import BadSeriesCertificate, ladder_certificate, verify_nonconvexity
from .domain import domain_of_sums, gamma
from .errors import (
    CertificateReplayFailed,
    DivergentSeries,
    NotInDomain,
    RepresentationInvalid,
    SpecError,
    UndecidableFamily,
)
from .hilbert import LinearMap, WeightedHilbert
from .koethe import KoetheMatrix, build_hs_scale, hs_link, link_map, nuclearity_test, standard_scale
from .nuclearity import veps_profile
from .rearrange import parse_stream, rearrange_to_target, verify_stream
from .series import SeriesSpec

EXIT_OK, EXIT_PARSE, EXIT_DIVERGENT, EXIT_DOMAIN, EXIT_UNDECIDABLE, EXIT_REPLAY = 0, 2, 3, 4, 5, 6


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _load_series(path):
    data = _read_json(path)
    try:
        return SeriesSpec.from_dict(data)
    except DivergentSeries as exc:
        raise CliError(EXIT_DIVERGENT, f"{path}: {exc}") from exc
    except (SpecError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from exc


def _header(args):
    return {
        "tool": "steinitz-lab",
        "version": __version__,
        "seed": args.seed,
        "config": {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)},
    }


def _write(args, text):
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_analyze(args):
    spec = _load_series(args.input)
    rep = gamma(spec)
    dom = domain_of_sums(spec, args.tol)
    out = _header(args)
    out["gamma"] = rep.to_dict()
    out["domain"] = dom.to_dict()
    _write(args, _json(out))
    return EXIT_OK


def _parse_vector(text, dim):
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"target {text!r} is not a list of numbers") from exc
    if len(vals) != dim:
        raise CliError(EXIT_PARSE, f"target needs {dim} coordinates, got {len(vals)}")
    return np.array(vals)


def cmd_rearrange(args):
    spec = _load_series(args.input)
    if args.replay:
        return _replay_stream(args, spec)
    if args.target is None:
        raise CliError(EXIT_PARSE, "--target is required")
    target = _parse_vector(args.target, spec.dimension)
    scale = standard_scale(spec.dimension, levels=3)
    try:
        stream = rearrange_to_target(spec, target, scale, args.stages, args.stage_width, seed=args.seed)
        stream.run()
    except NotInDomain as exc:
        functional = " ".join(repr(float(x)) for x in exc.functional)
        print(f"target not in the domain of sums (distance {exc.distance:.6g}); "
              f"separating functional: {functional}", file=sys.stderr)
        return EXIT_DOMAIN
    head = [f"# {line}" for line in _json(_header(args)).splitlines()]
    head += [f"# target {' '.join(repr(float(x)) for x in target)}"]
    stream.header = tuple(head)
    _write(args, stream.dumps())
    return EXIT_OK


def _replay_stream(args, spec):
    try:
        with open(args.replay, encoding="utf-8") as fh:
            text = fh.read()
        indices, certs = parse_stream(text)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"{args.replay}: {exc}") from exc
    target = None
    for line in text.splitlines():
        if line.startswith("# target "):
            target = _parse_vector(line[len("# target "):], spec.dimension)
    if target is None:
        target = _parse_vector(args.target or "", spec.dimension)
    scale = standard_scale(spec.dimension, levels=3)
    check = verify_stream(spec, target, indices, certs, scale)
    for stage, n, err, bound, ok in check.errors:
        print(f"stage {stage} N={n} error={err!r} bound={bound!r} {'ok' if ok else 'FAIL'}")
    if not check.ok:
        print("certificate replay failed", file=sys.stderr)
        return EXIT_REPLAY
    return EXIT_OK


def _grid_from(data):
    spec = data.get("grid", data) if isinstance(data, dict) else data
    try:
        return KoetheMatrix.from_dict(spec)
    except (SpecError, TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"grid: {exc}") from exc


def _map_from(data):
    try:
        m = np.array(data["matrix"], dtype=float)
        dw = np.array(data.get("domain_weights", np.ones(m.shape[1])), dtype=float)
        cw = np.array(data.get("codomain_weights", np.ones(m.shape[0])), dtype=float)
        return LinearMap(m, WeightedHilbert(dw), WeightedHilbert(cw))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CliError(EXIT_PARSE, f"matrix spec: {exc}") from exc


def cmd_diagnose(args):
    data = _read_json(args.input)
    if not isinstance(data, dict):
        raise CliError(EXIT_PARSE, f"{args.input}: expected a JSON object")
    lines = [f"# {line}" for line in _json(_header(args)).splitlines()]
    if "matrix" in data:
        T = _map_from(data)
    else:
        A = _grid_from(data)
        n_max = int(data.get("n_max", 6))
        m_max = int(data.get("m_max", 12))
        try:
            res = nuclearity_test(A, n_max, m_max)
        except UndecidableFamily as exc:
            print(f"undecidable: {exc}", file=sys.stderr)
            return EXIT_UNDECIDABLE
        lines.append(f"# verdict: {res.verdict()}")
        D = int(data.get("D", 6))
        scale = build_hs_scale(A, D, int(data.get("levels", 3)))
        lines.append(f"# profile of disc 1 -> disc 2, HS = {hs_link(scale, 1)!r}")
        T = link_map(scale, 1)
    rep = veps_profile(T, args.epsilon)
    lines.append("n,delta_n,v_n,n^eps*v_n")
    for n, d, v, val, _ in rep.rows():
        lines.append(f"{n},{float(d)!r},{float(v)!r},{float(val)!r}")
    lines.append(f"# {rep.disclaimer}")
    _write(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_counterexample(args):
    if args.input:
        data = _read_json(args.input)
        try:
            cert = BadSeriesCertificate.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(EXIT_PARSE, f"{args.input}: {exc}") from exc
        m_max = args.mmax or len(cert.representations)
        try:
            verdict = verify_nonconvexity(cert, m_max, args.horizon)
        except (CertificateReplayFailed, RepresentationInvalid, ValueError) as exc:
            print(f"replay failed: {exc}", file=sys.stderr)
            return EXIT_REPLAY
        out = _header(args)
        out["verdict"] = verdict.to_dict()
        _write(args, _json(out))
        return EXIT_OK
    try:
        ladder, cert = ladder_certificate(args.dim, args.levels)
    except ValueError as exc:
        raise CliError(EXIT_PARSE, str(exc)) from exc
    m_max = args.mmax or args.levels
    verdict = verify_nonconvexity(cert, m_max, args.horizon)
    if args.certificate:
        with open(args.certificate, "w", encoding="utf-8") as fh:
            fh.write(cert.dumps())
    out = _header(args)
    out["ladder"] = {"certificates": list(ladder.certificates), "note": ladder.note}
    out["verdict"] = verdict.to_dict()
    _write(args, _json(out))
    return EXIT_OK


def _run_job(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return {"argv": argv, "exit": code, "stdout": out.getvalue(), "stderr": err.getvalue()}


def cmd_batch(args):
    jobs = _read_json(args.input)
    if not isinstance(jobs, list) or not all(isinstance(j, list) and all(isinstance(a, str) for a in j) for j in jobs):
        raise CliError(EXIT_PARSE, f"{args.input}: expected a list of argument lists")
    workers = max(1, int(os.environ.get("STEINITZ_LAB_THREADS", "1") or 1))
    # output capture is process-global, so jobs that print run one at a time
    if workers > 1 and all("--output" in j for j in jobs):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    out = _header(args)
    out["results"] = results
    _write(args, _json(out))
    return max((r["exit"] for r in results), default=EXIT_OK)


def build_parser():
    parser = argparse.ArgumentParser(prog="steinitz-lab", description="Domains of sums, rearrangements and nuclearity diagnostics.")
    parser.add_argument("--version", action="version", version=f"steinitz-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output", default=None, help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("analyze", help="Gamma, its annihilator and the domain of sums")
    p.add_argument("--input", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("rearrange", help="emit a permutation stream towards a target")
    p.add_argument("--input", required=True)
    p.add_argument("--target", default=None, help="comma- or space-separated coordinates")
    p.add_argument("--stages", type=int, default=5)
    p.add_argument("--stage-width", type=int, default=64)
    p.add_argument("--replay", default=None, help="verify an existing stream file instead")
    common(p)
    p.set_defaults(func=cmd_rearrange)

    p = sub.add_parser("diagnose", help="s-number and volume-number table for a map or grid")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=0, help="unused by the closed-form table; recorded")
    common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("counterexample", help="ladder certificate and nonconvexity verdict")
    p.add_argument("--input", default=None, help="certificate to replay")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--mmax", type=int, default=None)
    p.add_argument("--horizon", type=int, default=64, help="terms enumerated per tail cloud")
    p.add_argument("--certificate", default=None, help="where to write the certificate JSON")
    common(p)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("batch", help="run a JSON list of argument lists")
    p.add_argument("--input", required=True)
    common(p)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    for name in ("stages", "horizon", "stage_width"):
        v = getattr(args, name, None)
        if v is not None and v < (0 if name == "stages" else 1):
            print(f"--{name.replace('_', '-')} must be positive", file=sys.stderr)
            return EXIT_PARSE
    try:
        return args.func(args)
    except CliError as exc:
        print(exc, file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
