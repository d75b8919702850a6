"""Command-line front end.

Subcommands::

    starlab run --config suite.yaml [--master_seed S] [--workers W] [--out DIR] [key=value ...]
    starlab volume {radial,gaussian,exponential} BODY [--resolution R] [--budget B] [--master_seed S]
    starlab radial BODY U1 U2 ...
    starlab constant {omega,b,c,d,a} ARGS...

``starlab --config suite.yaml`` is shorthand for ``starlab run``.  Exit
codes: 0 on success, 2 when any comparison returns VIOLATION, 1 on errors
(bad configuration, hypothesis violations, unreadable inputs).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfg
from .bodies import ball_body, cross_polytope, cube, make_support_body, polar_body, segment
from .centroid import dual_centroid_body
from .densities import make_density
from .estimate import Estimate
from .experiments import (
    HypothesisError,
    ball_flattening_inequality,
    validate_flattening,
    validate_hypotheses,
    busemann_ratio,
    cefpp_probe,
    convergence_study,
    moment_bound_probe,
    rearrangement_inequality,
)
from .numerics import (
    RngStream,
    gaussian_neg_moment,
    nt_constants,
    sphere_quadrature,
    unit_ball_volume,
)
from .volume import volume_exponential, volume_gaussian_extrapolated, volume_radial

log = logging.getLogger("starlab")

CSV_COLUMNS = (
    "experiment",
    "quantity",
    "parameter",
    "value",
    "stderr",
    "quad_error",
    "n_samples",
    "method",
    "verdict",
    "params",
    "master_seed",
    "stream",
    "config_hash",
)

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


# ---------------------------------------------------------------------------
# Experiment dispatch
# ---------------------------------------------------------------------------

def _density(config, name):
    return make_density(config.get("densities", {})[name])


def _body(config, name):
    if name is None:
        return None
    return make_support_body(config.get("bodies", {})[name])


def run_experiment(exp: dict, config: dict, stream: RngStream, workers: int = 1):
    """Run one experiment entry of a validated config; returns a report."""
    kind = exp["type"]
    get = exp.get
    res = get("resolution")
    if kind in ("rearrangement", "ball_flattening"):
        fn = rearrangement_inequality if kind == "rearrangement" else ball_flattening_inequality
        kw = dict(
            f=_density(config, exp["density"]),
            C=_body(config, get("body")),
            p=exp["p"],
            mode=get("mode", "exact"),
            kind=get("kind", "centroid"),
            alpha=get("alpha"),
            N=get("N", 8),
            trials=get("trials", 10_000),
            stream=stream,
            resolution=res,
            budget=get("budget", 100_000),
            workers=workers,
        )
        if kind == "rearrangement":
            kw["coupling"] = get("coupling")
        return fn(**kw)
    if kind == "busemann":
        return busemann_ratio(_density(config, exp["density"]), res)
    if kind == "convergence":
        return convergence_study(
            exp["study"],
            f=_density(config, exp["density"]) if "density" in exp else None,
            p=get("p"),
            C=_body(config, get("body")),
            values=tuple(get("values", ())) or None,
            N=get("N", 8),
            alpha=get("alpha", 0.2),
            trials=get("trials", 10_000),
            stream=stream,
            resolution=res,
            tolerance=get("tolerance"),
            workers=workers,
        )
    if kind == "moment_bound":
        return moment_bound_probe(
            _density(config, exp["density"]),
            _body(config, exp["body"]),
            exp["p"],
            get("eps", 0.5),
            get("Ns"),
            get("trials", 10_000),
            stream,
            get("directions", 32),
            workers,
        )
    if kind == "cefpp":
        return cefpp_probe(
            [_density(config, d) for d in exp["densities"]],
            _body(config, exp["body"]),
            get("measure", "gaussian"),
            get("variant", "rearrangement"),
            get("trials", 10_000),
            stream,
            get("points", 64),
            workers,
        )
    raise ValueError(f"unknown experiment type {kind!r}")  # pragma: no cover - schema rejects it


def check_experiment(exp: dict, config: dict):
    """Build the inputs of an experiment and check its hypotheses, without sampling."""
    kind = exp["type"]
    f = _density(config, exp["density"]) if "density" in exp else None
    C = _body(config, exp.get("body"))
    for name in exp.get("densities", ()):
        _density(config, name)
    if kind == "rearrangement":
        ck = exp.get("kind", "centroid")
        bodies = [C if C is not None else segment()] if ck == "centroid" else ()
        validate_hypotheses(ck, f.n, exp["p"], exp.get("mode", "exact"), bodies, exp.get("alpha"))
    elif kind == "ball_flattening":
        validate_flattening(exp.get("kind", "centroid"), f.n, exp["p"], exp.get("mode", "exact"), C, exp.get("alpha"))


def _format(x):
    if isinstance(x, float):
        return repr(x)
    return x


def report_csv(report, chash: str) -> str:
    """Long-format CSV text for one report."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    prov = report.provenance
    params = ";".join(f"{k}={_format(v)}" for k, v in sorted(report.params.items()))
    for row in report.rows():
        out = {k: _format(row.get(k, "")) for k in CSV_COLUMNS[:9]}
        out.update(params=params, master_seed=prov.get("master_seed", ""), stream=prov.get("stream", ""),
                   config_hash=chash)
        writer.writerow(out)
    return buf.getvalue()


def _summary_line(name, report) -> str:
    if hasattr(report, "margin"):
        detail = f"lhs={report.lhs.value:.10g} rhs={report.rhs.value:.10g} margin={report.margin:.6g} band={report.band:.3g}"
    else:
        label = "final_value" if report.kind == "moment_bound" else "final_error"
        detail = (
            f"{report.parameter}={list(report.values)} {label}={report.final_error:.6g} "
            f"trend_ok={report.trend_ok}"
        )
    return f"{name}: {report.verdict} ({detail})"


def run(config: dict, out_dir: Path, workers: int = 1) -> int:
    """Execute every experiment; writes CSVs, the resolved config and a summary."""
    chash = cfg.config_hash(config)
    seed = config["master_seed"]
    for exp in config["experiments"]:
        try:
            check_experiment(exp, config)
        except HypothesisError as exc:
            raise HypothesisError(f"experiment {exp['name']!r}: {exc}") from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved_config.yaml").write_text(cfg.dump(config))
    lines = [f"starlab {__version__} master_seed={seed} config_hash={chash}"]
    violation = False
    for k, exp in enumerate(config["experiments"]):
        stream = RngStream(seed, k)
        start = time.perf_counter()
        report = run_experiment(exp, config, stream, workers)
        report = report.with_provenance(config_hash=chash, master_seed=seed, stream=str(k))
        (out_dir / f"{exp['name']}.csv").write_text(report_csv(report, chash))
        line = _summary_line(exp["name"], report)
        lines.append(line)
        log.info("%s [%.1f s]", line, time.perf_counter() - start)
        violation |= report.verdict == "VIOLATION"
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    return EXIT_VIOLATION if violation else EXIT_OK


def cmd_run(args) -> int:
    path = args.config or cfg.default_config_path()
    config = cfg.load(path)
    overrides = list(args.overrides)
    if args.master_seed is not None:
        overrides.append(f"master_seed={args.master_seed}")
    config = cfg.validate(cfg.apply_overrides(config, overrides))
    workers = args.workers or config.get("workers", 1)
    out = Path(args.out or config.get("output_dir", "results"))
    return run(config, out, workers)


# ---------------------------------------------------------------------------
# One-shots
# ---------------------------------------------------------------------------

_DISC_ALIASES = {"unit-disc": 2, "unit-ball": 3}


def parse_body(spec: str):
    """Star body from a short text spec.

    ``unit-disc``, ``unit-ball``, ``ball:n[:radius]``, ``cube:n`` (the cube
    [-1,1]^n), ``cross:n`` (the cross-polytope B_1^n), ``interval``, and
    ``centroid:<family>:<n>:<p>`` for the exact dual centroid body of a
    catalog density with default parameters and C = [-1, 1].
    """
    if spec in _DISC_ALIASES:
        return ball_body(_DISC_ALIASES[spec])
    head, *rest = spec.split(":")
    try:
        if head == "ball":
            return ball_body(int(rest[0]), float(rest[1]) if len(rest) > 1 else 1.0)
        if head == "cube":
            return polar_body(cross_polytope(int(rest[0])))
        if head == "cross":
            return polar_body(cube(int(rest[0])))
        if head == "centroid":
            fam, n, p = rest
            return dual_centroid_body(make_density({"family": fam, "n": int(n)}), segment(), float(p))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"cannot parse body spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown body spec {spec!r}")


def _print_estimate(est: Estimate):
    row = est.as_row()
    writer = csv.DictWriter(sys.stdout, fieldnames=list(row), lineterminator="\n")
    writer.writeheader()
    writer.writerow({k: _format(v) for k, v in row.items()})


def cmd_volume(args) -> int:
    K = parse_body(args.body)
    n = K.n
    stream = RngStream(args.master_seed or 0)
    res = args.resolution or (4096 if n == 2 else 64)
    if args.method == "radial":
        mode = "deterministic" if n <= 3 else "monte_carlo"
        est = volume_radial(K, sphere_quadrature(n, res, mode, stream), seed=stream.master_seed)
    elif args.method == "gaussian":
        est = volume_gaussian_extrapolated(K, n, args.budget, stream)
    else:
        est = volume_exponential(K, n, 1.0, "direct", budget=args.budget, rng=stream)
    est = replace(est, seed=stream.master_seed)
    print(f"# body={args.body} n={n} method={est.method}", file=sys.stderr)
    _print_estimate(est)
    return EXIT_OK


def cmd_radial(args) -> int:
    K = parse_body(args.body)
    u = np.asarray(args.u, dtype=float)
    if u.size != K.n:
        raise ValueError(f"direction has {u.size} coordinates, body lives in R^{K.n}")
    print(repr(float(K.radial(u[None, :])[0])))
    return EXIT_OK


def cmd_constant(args) -> int:
    name, vals = args.name, args.args
    need = {"omega": 1, "b": 2, "c": 2, "d": 1, "a": 3}[name]
    if len(vals) != need:
        raise ValueError(f"constant {name} takes {need} argument(s), got {len(vals)}")
    if name == "omega":
        value = unit_ball_volume(int(vals[0]))
    elif name == "b":
        value = gaussian_neg_moment(int(vals[0]), float(vals[1]))
    elif name == "c":
        value = nt_constants(1, int(vals[0]), float(vals[1])).c_np
    elif name == "d":
        value = nt_constants(1, 1, float(vals[0])).d_p
    else:
        value = nt_constants(int(vals[0]), int(vals[1]), float(vals[2])).a_Nnp
    print(repr(float(value)))
    print(f"# constant {name}({', '.join(vals)})", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 so that 2 stays reserved for VIOLATION."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="starlab", description="Star-body volume laboratory.")
    parser.add_argument("--version", action="version", version=f"starlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiments listed in a config")
    p_run.add_argument("--config", help="YAML config (default: the bundled default suite)")
    p_run.add_argument("--master_seed", type=int, help="override the config's master seed")
    p_run.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("overrides", nargs="*", help="dotted key=value overrides")
    p_run.set_defaults(func=cmd_run)

    p_vol = sub.add_parser("volume", help="volume of a star body")
    p_vol.add_argument("method", choices=["radial", "gaussian", "exponential"])
    p_vol.add_argument("body")
    p_vol.add_argument("--resolution", type=int)
    p_vol.add_argument("--budget", type=int, default=200_000)
    p_vol.add_argument("--master_seed", type=int)
    p_vol.set_defaults(func=cmd_volume)

    p_rad = sub.add_parser("radial", help="radial function of a star body")
    p_rad.add_argument("body")
    p_rad.add_argument("u", nargs="+", type=float)
    p_rad.set_defaults(func=cmd_radial)

    p_const = sub.add_parser("constant", help="special constants")
    p_const.add_argument("name", choices=["omega", "b", "c", "d", "a"])
    p_const.add_argument("args", nargs="*")
    p_const.set_defaults(func=cmd_constant)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--") and argv[0] not in ("--help", "--version"):
        argv.insert(0, "run")
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except HypothesisError as exc:
        print(f"hypothesis error: {exc}", file=sys.stderr)
    except (cfg.ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
