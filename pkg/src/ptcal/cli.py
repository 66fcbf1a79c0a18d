"""Command-line front end.

Subcommands: generate, fit, apply, evaluate, compare, pt, simulate,
reliability, and rerun (replays any output file from its embedded
provenance). Data goes to ``--out``; a failure prints one JSON line to stderr
and exits with status 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import __version__
from . import calibrate as cal
from . import io
from .core import RNG_ALGORITHM, PtcalError
from .metrics import evaluate, reliability_data
from .pipeline import COMPARE_COLUMNS, RunConfig, SimulationConfig, compare_methods, run_simulation
from .pt import PTParams, pt_inverse, roundtrip_report
from .synth import KINDS, LAWS, DistortionSpec, generate


def _provenance(args: argparse.Namespace, config: dict, inputs: Sequence[str] = ()) -> dict:
    recorded = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func", "command")}
    return {
        "command": args.command,
        "args": recorded,
        "config": config,
        "inputs": {p: io.file_digest(p) for p in inputs if p},
        "rng": RNG_ALGORITHM,
        "version": __version__,
    }


def _run_config(args) -> RunConfig:
    return RunConfig(
        gamma=args.gamma,
        bins=args.bins,
        strategy=args.strategy,
        split=tuple(args.split),
        calibrator=args.method,
        master_seed=args.seed,
    )


def _predictions(args):
    """Dataset plus the probabilities to score, per --model / --column."""
    data, calibrated = io.load_table(args.data)
    if args.model:
        return data, cal.calibrate_dataset(io.load_model(args.model), data)
    if args.column == "calibrated":
        if calibrated is None:
            raise PtcalError(f"{args.data} has no calibrated column")
        return data, calibrated
    return data, data.scores


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> None:
    spec = DistortionSpec(
        kind=args.kind,
        n=args.n,
        seed=args.seed,
        law=args.law,
        t=args.t,
        gamma=args.gamma,
        a=args.a,
        b=args.b,
        alpha=args.alpha,
        beta=args.beta,
    )
    data = generate(spec)
    config = spec.to_dict()
    config["logit_clamp"] = 30.0
    io.write_csv(args.out, data, provenance=_provenance(args, config))


def cmd_fit(args) -> None:
    cfg = _run_config(args)
    data = io.load_csv(args.data)
    model = cal.fit_calibrator(cfg.calibrator, data, cfg.bins, cfg.strategy)
    doc = io.envelope("model", _provenance(args, cfg.to_dict(), [args.data]), {"model": io.model_to_dict(model)})
    io.write_json(args.out, doc)


def cmd_apply(args) -> None:
    cfg = _run_config(args)
    data = io.load_csv(args.data)
    model = io.load_model(args.model) if args.model else cal.IdentityModel()
    q = cal.calibrate_dataset(model, data)
    if args.pt:
        q = pt_inverse(q, PTParams(cfg.gamma))
    io.write_csv(args.out, data, calibrated=q, provenance=_provenance(args, cfg.to_dict(), [args.data, args.model]))


def cmd_evaluate(args) -> None:
    cfg = _run_config(args)
    data, q = _predictions(args)
    report = evaluate(q, data.labels, cfg.bins)
    doc = io.envelope(
        "evaluation", _provenance(args, cfg.to_dict(), [args.data, args.model]), {"metrics": report.to_dict()}
    )
    io.write_json(args.out, doc)


def _format_table(rows, best) -> list[str]:
    cols = list(COMPARE_COLUMNS)
    names = {"accuracy": "Acc", "f1": "F1", "ece": "ECE", "nll": "NLL", "brier": "Brier"}
    lines = ["method".ljust(20) + "".join(names[c].rjust(12) for c in cols)]
    for r in rows:
        cells = []
        for c in cols:
            if r.report is None:
                cells.append("n/a".rjust(12))
            else:
                mark = "*" if r.method in best[c] else " "
                cells.append(f"{getattr(r.report, c):.6f}{mark}".rjust(12))
        lines.append(r.method.ljust(20) + "".join(cells))
    return lines


def cmd_compare(args) -> None:
    cfg = _run_config(args)
    data = io.load_csv(args.data)
    rows, best = compare_methods(data, cfg)
    body = {
        "columns": list(COMPARE_COLUMNS),
        "rows": [
            {"method": r.method, "metrics": None if r.report is None else r.report.to_dict(), "error": r.error}
            for r in rows
        ],
        "best": best,
        "table": _format_table(rows, best),
    }
    io.write_json(args.out, io.envelope("comparison", _provenance(args, cfg.to_dict(), [args.data]), body))


def cmd_pt(args) -> None:
    params = PTParams(args.gamma)
    report = roundtrip_report(params)
    body = {"roundtrip": report.to_dict()}
    io.write_json(args.out, io.envelope("pt_roundtrip", _provenance(args, {"gamma": params.gamma}), body))


def _sim_config(args) -> SimulationConfig:
    return SimulationConfig(
        run=_run_config(args),
        gamma_agent=args.agent_gamma,
        n=args.n,
        law_alpha=args.law_alpha,
        agents=args.agents,
        scenarios=args.scenarios,
        prior=args.prior,
        reliance_init=args.reliance_init,
        learning_rate=args.learning_rate,
        noise_sd=args.noise_sd,
    )


def cmd_simulate(args) -> None:
    cfg = _sim_config(args)
    result = run_simulation(cfg)
    io.write_json(args.out, io.envelope("simulation", _provenance(args, cfg.to_dict()), {"result": result.to_dict()}))


def cmd_reliability(args) -> None:
    cfg = _run_config(args)
    data, q = _predictions(args)
    bins = reliability_data(q, data.labels, cfg.bins)
    text = io.format_reliability_csv(bins, provenance=_provenance(args, cfg.to_dict(), [args.data, args.model]))
    io.atomic_write(args.out, text)


def cmd_rerun(args) -> None:
    prov = io.read_provenance(args.file)
    replay = argparse.Namespace(**prov["args"], command=prov["command"], out=args.out)
    replay.func = COMMANDS[prov["command"]]
    replay.func(replay)


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "apply": cmd_apply,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "pt": cmd_pt,
    "simulate": cmd_simulate,
    "reliability": cmd_reliability,
    "rerun": cmd_rerun,
}


# ---------------------------------------------------------------- parser


def _run_flags(p: argparse.ArgumentParser, method_default: str = "isotonic") -> None:
    p.add_argument("--gamma", type=float, default=0.71, help="prospect-theory gamma (default 0.71)")
    p.add_argument("--bins", type=int, default=cal.DEFAULT_BINS, help="number of bins M (default 15)")
    p.add_argument("--strategy", choices=cal.BIN_STRATEGIES, default=cal.EQUAL_WIDTH)
    p.add_argument("--seed", type=int, default=42, help="master seed (default 42)")
    p.add_argument("--method", choices=cal.METHODS, default=method_default, help="calibration method")
    p.add_argument(
        "--split", type=float, nargs=3, default=[0.8, 0.1, 0.1], metavar=("TRAIN", "VAL", "TEST")
    )


def _prediction_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="prediction CSV (score,label[,logit][,calibrated])")
    p.add_argument("--model", default=None, help="calibrator model file to apply first")
    p.add_argument("--column", choices=("score", "calibrated"), default="score")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptcal", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"ptcal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write synthetic miscalibrated predictions")
    p.add_argument("--kind", choices=KINDS, default="identity")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--law", choices=LAWS, default="uniform")
    p.add_argument("--alpha", type=float, default=1.0, help="beta law alpha")
    p.add_argument("--beta", type=float, default=1.0, help="beta law beta")
    p.add_argument("--t", type=float, default=1.0, help="temperature distortion factor")
    p.add_argument("--gamma", type=float, default=0.71, help="pt_weight distortion gamma")
    p.add_argument("--a", type=float, default=1.0, help="logistic distortion slope")
    p.add_argument("--b", type=float, default=0.0, help="logistic distortion intercept")

    p = sub.add_parser("fit", help="fit a calibrator on a validation CSV")
    _run_flags(p)
    p.add_argument("--data", required=True)

    p = sub.add_parser("apply", help="add a calibrated column to a prediction CSV")
    _run_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", default=None, help="model file; identity when omitted")
    p.add_argument("--pt", action="store_true", help="apply the inverse weighting correction after calibrating")

    p = sub.add_parser("evaluate", help="write a metric report")
    _run_flags(p)
    _prediction_flags(p)

    p = sub.add_parser("compare", help="compare calibration methods on one dataset")
    _run_flags(p)
    p.add_argument("--data", required=True)

    p = sub.add_parser("pt", help="round-trip error of the inverse weighting correction")
    p.add_argument("--gamma", type=float, default=0.71)

    p = sub.add_parser("simulate", help="run the five-arm agent study")
    _run_flags(p)
    p.add_argument("--agent-gamma", type=float, default=None, help="agents' gamma (default: --gamma)")
    p.add_argument("--n", type=int, default=20_000, help="synthetic samples before splitting")
    p.add_argument("--law-alpha", type=float, default=0.4, help="Beta(alpha, alpha) law of true probabilities")
    p.add_argument("--agents", type=int, default=30)
    p.add_argument("--scenarios", type=int, default=20)
    p.add_argument("--prior", type=float, default=0.5)
    p.add_argument("--reliance-init", type=float, default=0.5)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--noise-sd", type=float, default=0.05)

    p = sub.add_parser("reliability", help="write reliability-diagram data as CSV")
    _run_flags(p)
    _prediction_flags(p)

    p = sub.add_parser("rerun", help="regenerate an output file from its embedded provenance")
    p.add_argument("file")

    for name, p in sub.choices.items():
        p.add_argument("--out", required=True, help="output file")
        p.set_defaults(func=COMMANDS[name])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (PtcalError, OSError) as exc:
        err = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
