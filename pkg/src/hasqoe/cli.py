"""Command-line surface: a thin client over the engine's operations.

Every command prints the seed and config digest it ran with on stderr.
Exit codes: 1 for usage problems, 2 for bad input data, 3 for runtime
failures (including missed realtime deadlines).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .errors import DataError, DeadlineExceeded, UsageError
from .evaluation import (
    extract_dataset_features,
    load_dataset_index,
    split_eval_features,
    synth_dataset,
)
from .features import FEATURE_ORDER_TAG
from .pipeline import ScoringEngine, config_digest, load_config
from .sampler import calibrate_weights
from .session import load_manifest
from .svr import SvrHyperparams, load_model, save_model, train

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="has-qoe", description=__doc__)
    parser.add_argument("--version", action="version", version=f"has-qoe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assess", help="score every playback window of a session")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--realtime", action="store_true")
    p.add_argument("--out", required=True, help="CSV output path ('-' for stdout)")

    p = sub.add_parser("train", help="train an SVR model on a dataset index")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)

    p = sub.add_parser("eval", help="repeated content-disjoint 80/20 evaluation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report JSON path; per-rep CSV lands beside it")

    p = sub.add_parser("calibrate-weights", help="derive sampling weights from half scores")
    p.add_argument("--in", dest="input", required=True,
                   help="CSV with columns session_id,q_start,q_end,mos")
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--contents", type=int, default=8)
    p.add_argument("--sessions-per-content", type=int, default=6)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8642)

    return parser


def _note(seed, config) -> None:
    digest = config_digest(config) if config is not None else "-"
    print(f"has-qoe: seed={seed} config_digest={digest}", file=sys.stderr)


def _cmd_assess(args) -> int:
    config = load_config(args.config)
    if args.realtime:
        from dataclasses import replace

        config = replace(config, realtime=True)
    _note("-", config)
    manifest = load_manifest(args.manifest)
    model = load_model(args.model)
    engine = ScoringEngine(config)
    rows = engine.score_session(manifest, model)
    lines = ["t,qoe_score,cumulative_time_ratio"]
    lines += [f"{r.t},{r.qoe!r},{r.cumulative_time_ratio!r}" for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def _cmd_train(args) -> int:
    config = load_config(args.config)
    _note("-", config)
    entries = load_dataset_index(args.dataset)
    X, mos, _ = extract_dataset_features(entries, config)
    hyper = SvrHyperparams(
        c=args.c if args.c is not None else 1.0, epsilon=args.epsilon, gamma=args.gamma
    )
    model = train(X, mos, hyper, feature_order_tag=FEATURE_ORDER_TAG)
    save_model(model, args.out)
    print(
        f"trained on {len(entries)} sessions; {model.support_vectors.shape[0]} support vectors "
        f"-> {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_eval(args) -> int:
    config = load_config(args.config)
    _note(args.seed, config)
    entries = load_dataset_index(args.dataset)
    X, mos, content_ids = extract_dataset_features(entries, config)
    report = split_eval_features(X, mos, content_ids, args.reps, args.seed)
    out = Path(args.out)
    out.write_text(report.to_json(), encoding="utf-8")
    out.with_suffix(".csv").write_text(report.to_csv(), encoding="utf-8")
    agg = report.aggregate
    print(
        f"srocc mean={agg['srocc']['mean']:.4f} median={agg['srocc']['median']:.4f} | "
        f"plcc mean={agg['plcc']['mean']:.4f} | krocc mean={agg['krocc']['mean']:.4f}",
        file=sys.stderr,
    )
    return 0


def _cmd_calibrate(args) -> int:
    _note("-", None)
    half_scores = []
    mos = []
    try:
        with open(args.input, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            required = {"session_id", "q_start", "q_end", "mos"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise DataError(
                    f"{args.input}: CSV must have columns session_id,q_start,q_end,mos"
                )
            for row in reader:
                half_scores.append((float(row["q_start"]), float(row["q_end"])))
                mos.append(float(row["mos"]))
    except FileNotFoundError:
        raise DataError(f"calibration CSV not found: {args.input}") from None
    except ValueError as exc:
        raise DataError(f"{args.input}: bad numeric value: {exc}") from exc
    try:
        weights = calibrate_weights(half_scores, mos)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    Path(args.out).write_text(
        json.dumps({"w_s": weights.w_s, "w_e": weights.w_e}), encoding="utf-8"
    )
    print(f"w_s={weights.w_s!r} w_e={weights.w_e!r} -> {args.out}", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    _note(args.seed, None)
    try:
        index_path, entries = synth_dataset(
            args.contents, args.sessions_per_content, args.seed, args.out
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    print(f"wrote {len(entries)} sessions; index at {index_path}", file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "assess": _cmd_assess,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "calibrate-weights": _cmd_calibrate,
    "simulate": _cmd_simulate,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"has-qoe: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"has-qoe: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DeadlineExceeded as exc:
        print(f"has-qoe: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"has-qoe: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - last-resort mapping
        print(f"has-qoe: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
