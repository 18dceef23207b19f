"""Command-line front end.

Subcommands: `train` runs an experiment from a config file; `mc-verify`
runs the Monte Carlo verification suites and prints a pass/fail table;
`bounds` evaluates the closed-form expressions; `plot-data` flattens a
metrics JSONL into a tidy CSV for external plotting.

Exit codes: 0 on success, 1 on bad arguments or invalid inputs, 2 on an
unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import analysis
from .experiment import load_config, run_experiment, summary_path

SUITE_ALIASES = {
    "lemma31": "mean-energy",
    "lemmad1": "flip-prob",
    "lemma32": "error-prob",
}
SUITES = ("mean-energy", "flip-prob", "error-prob", "all")
_DEFAULT_TRIALS = {"mean-energy": 100_000, "flip-prob": 100_000, "error-prob": 10_000}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="airvote", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run an experiment from a config file")
    train.add_argument("--config", required=True, help="flat key = value config file")

    verify = sub.add_parser("mc-verify", help="Monte Carlo checks of the closed forms")
    verify.add_argument("--suite", default="all",
                        choices=SUITES + tuple(SUITE_ALIASES), metavar="SUITE",
                        help=f"one of {', '.join(SUITES)}")
    verify.add_argument("--trials", type=int, default=None,
                        help="override the per-suite default trial count")
    verify.add_argument("--seed", type=int, default=0)

    bounds = sub.add_parser("bounds", help="evaluate a closed-form expression")
    group = bounds.add_mutually_exclusive_group(required=True)
    group.add_argument("--cost", choices=analysis.COMM_SCHEMES,
                       help="uplink bits per round for a compression scheme")
    group.add_argument("--failure-prob", type=float, metavar="GRAD_SNR",
                       help="single-device sign-flip tail bound")
    group.add_argument("--error-prob", action="store_true",
                       help="majority-vote detection error bound")
    group.add_argument("--tau", action="store_true", help="channel penalty factor")
    group.add_argument("--convergence", action="store_true",
                       help="bound on the running mean L1 gradient norm")
    bounds.add_argument("--devices", type=int, default=31)
    bounds.add_argument("--dim", type=int, default=10_000)
    bounds.add_argument("--snr", type=float, default=2.0)
    bounds.add_argument("--grad-snr", type=float, default=3.0)
    bounds.add_argument("--gamma", type=float, default=1.0)
    bounds.add_argument("--rounds", type=int, default=1000)
    bounds.add_argument("--smoothness-l1", type=float, default=1.0)
    bounds.add_argument("--sigma-l1", type=float, default=1.0)
    bounds.add_argument("--loss-gap", type=float, default=1.0)
    bounds.add_argument("--batch-size", type=int, default=None)
    bounds.add_argument("--strict-derivation", action="store_true")

    plot = sub.add_parser("plot-data", help="re-emit metrics JSONL as tidy CSV")
    plot.add_argument("--input", required=True, help="metrics JSONL written by train")
    plot.add_argument("--output", required=True, help="CSV path to write")
    plot.add_argument("--scheme", default=None,
                      help="scheme label; default comes from the sibling summary CSV")
    return parser


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_train(args) -> int:
    config = load_config(args.config)
    out = run_experiment(config)
    print(f"wrote {out} and {summary_path(out)}")
    return 0


def _print_table(title: str, header: list[str], rows: list[list[str]]):
    print(title)
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    print()


def _run_suite(name: str, trials: int | None, seed: int) -> bool:
    if name == "mean-energy":
        rows = analysis.run_mean_energy_suite(trials or _DEFAULT_TRIALS[name], seed)
        _print_table(
            f"mean received bin energy vs closed form ({trials or _DEFAULT_TRIALS[name]} trials)",
            ["devices", "power", "noise", "predicted", "estimate", "rel_err", "status"],
            [
                [
                    str(r["active_devices"]),
                    f"{r['mean_tx_power']:g}",
                    f"{r['noise_var']:g}",
                    f"{r['predicted']:.4f}",
                    f"{r['estimate']:.4f}",
                    f"{r['rel_err']:.4%}",
                    "PASS" if r["passed"] else "FAIL",
                ]
                for r in rows
            ],
        )
        return all(r["passed"] for r in rows)
    if name == "flip-prob":
        rows = analysis.run_flip_prob_suite(trials or _DEFAULT_TRIALS[name], seed)
        _print_table(
            f"sign-flip frequency vs unimodal tail bound ({trials or _DEFAULT_TRIALS[name]} draws)",
            ["grad_snr", "estimate", "bound", "slack", "status"],
            [
                [
                    f"{r['grad_snr']:g}",
                    f"{r['estimate']:.5f}",
                    f"{r['bound']:.5f}",
                    f"{r['bound'] + 3 * r['stderr'] - r['estimate']:+.5f}",
                    "PASS" if r["passed"] else "FAIL",
                ]
                for r in rows
            ],
        )
        return all(r["passed"] for r in rows)
    rows = analysis.run_error_prob_suite(trials or _DEFAULT_TRIALS["error-prob"], seed)
    _print_table(
        f"majority-vote error vs attenuated target ({trials or _DEFAULT_TRIALS['error-prob']} trials)",
        ["devices", "snr", "flip", "estimate", "exact", "target", "<1/2", "status"],
        [
            [
                str(r["num_devices"]),
                f"{r['snr']:g}",
                f"{r['flip_prob']:g}",
                f"{r['estimate']:.4f}",
                f"{r['exact']:.4f}",
                f"{r['target']:.4f}",
                "yes" if r["below_half"] else "NO",
                "PASS" if r["passed"] else "FAIL",
            ]
            for r in rows
        ],
    )
    if not all(r["passed"] for r in rows):
        print(
            "note: the (1-q)-attenuated target sits below the exact detector error\n"
            "(K*q + 1/snr)/(K + 2/snr) by K*q^2/(K + 2/snr), so flip rates of 0.2\n"
            "and above exceed it by far more than Monte Carlo noise; the estimates\n"
            "above should instead match the `exact` column.\n"
        )
    return all(r["passed"] for r in rows)


def _cmd_mc_verify(args) -> int:
    suite = SUITE_ALIASES.get(args.suite, args.suite)
    names = [s for s in SUITES if s != "all"] if suite == "all" else [suite]
    ok = True
    for name in names:
        ok = _run_suite(name, args.trials, args.seed) and ok
    print("all suites passed" if ok else "some checks failed")
    return 0 if ok else 1


def _cmd_bounds(args) -> int:
    if args.cost:
        print(analysis.comm_cost(args.cost, args.devices, args.dim))
    elif args.failure_prob is not None:
        print(analysis.failure_prob_bound(args.failure_prob))
    elif args.error_prob:
        print(analysis.error_prob_bound(args.devices, args.snr, args.grad_snr))
    elif args.tau:
        print(analysis.convergence_tau(args.devices, args.snr, args.gamma))
    else:
        params = analysis.BoundParams(
            num_devices=args.devices,
            snr=args.snr,
            rounds=args.rounds,
            gamma=args.gamma,
            smoothness_l1=args.smoothness_l1,
            sigma_l1=args.sigma_l1,
            loss_gap=args.loss_gap,
            batch_size=args.batch_size,
        )
        print(analysis.convergence_bound(params, strict_derivation=args.strict_derivation))
    return 0


def _cmd_plot_data(args) -> int:
    source = Path(args.input)
    if not source.exists():
        raise FileNotFoundError(f"metrics file not found: {source}")
    scheme = args.scheme
    if scheme is None:
        sidecar = summary_path(source)
        if sidecar.exists():
            with sidecar.open() as fh:
                scheme = next(csv.DictReader(fh))["scheme"]
        else:
            scheme = "unknown"
    with source.open() as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    with Path(args.output).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "scheme", "accuracy"])
        for record in records:
            writer.writerow([record["round"], scheme, record["test_accuracy"]])
    print(f"wrote {args.output} ({len(records)} rows)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    handlers = {
        "train": _cmd_train,
        "mc-verify": _cmd_mc_verify,
        "bounds": _cmd_bounds,
        "plot-data": _cmd_plot_data,
    }
    try:
        return handlers[args.command](args)
    except (FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - unexpected failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
