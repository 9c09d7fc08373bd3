"""Command-line entry point.

Subcommands: train, evaluate, aggregate, epoch-sweep, rules, probe, synth.
Exit codes: 0 success, 1 validation problem, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .config import load_config
from .errors import ValidationError, WuglabError
from .synthetic import SynthSpec

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--seeds", help="comma-separated seed list override")
    p.add_argument("--epochs", type=int, help="override total epochs")
    p.add_argument("--samples", type=int,
                   help="samples per seed and item (aggregate)")
    p.add_argument("--freq-mode", choices=["type", "token", "log-token"],
                   dest="freq_mode", help="training multiplicity mode")
    p.add_argument("--out", dest="out_dir", help="output directory override")
    p.add_argument("--workers", type=int, help="parallel training processes")


def _config_from_args(args) -> "ExperimentConfig":
    overrides = {}
    if args.seeds is not None:
        try:
            overrides["seeds"] = tuple(int(s) for s in args.seeds.split(","))
        except ValueError:
            raise ValidationError(f"bad --seeds value: {args.seeds!r}")
    for key in ("epochs", "samples", "freq_mode", "out_dir", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wuglab",
        description="Train and evaluate phoneme-level inflection models"
                    " against wug-test data.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
            ("train", "train one model per seed, saving checkpoints"),
            ("evaluate", "correlations, CR@5, accuracy, second-place report"),
            ("aggregate", "participant simulation from sampled productions"),
            ("epoch-sweep", "correlation and beam-skew curves over epochs"),
            ("rules", "rule-learner baseline reports"),
            ("probe", "representation clouds and PCA projections")):
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)
        if name == "probe":
            p.add_argument("--skip-reversed", action="store_true",
                           help="skip the reversed-phoneme control run")

    synth = sub.add_parser("synth", help="generate synthetic corpus + nonce"
                                         " files")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--seed", type=int, default=7)
    synth.add_argument("--regular", type=int, default=200,
                       help="total regular verbs (split across suffix classes)")
    synth.add_argument("--irregular", type=int, default=20,
                       help="total irregular verbs (split across 4 families)")
    synth.add_argument("--nonce-per-category", type=int, default=2)
    return parser


def _run(args) -> int:
    from . import experiments

    if args.command == "synth":
        if args.regular < 3 or args.irregular < 4:
            raise ValidationError("need --regular >= 3 and --irregular >= 4")
        third = args.regular // 3
        fam = max(1, args.irregular // 4)
        spec = SynthSpec(
            n_regular_coronal=third,
            n_regular_voiceless=third,
            n_regular_voiced=args.regular - 2 * third,
            family_size=fam,
            nonce_per_category=args.nonce_per_category,
        )
        corpus_path, nonce_path = experiments.run_synth(args.out, args.seed,
                                                        spec)
        print(f"wrote {corpus_path}")
        print(f"wrote {nonce_path}")
        return EXIT_OK

    cfg = _config_from_args(args)
    if args.command == "train":
        logs = experiments.run_train(cfg)
        for seed in cfg.seeds:
            last = logs[seed][-1]
            print(f"seed {seed}: epoch {last[2]} loss {last[3]}"
                  f" accuracy {last[4]}%")
    elif args.command == "evaluate":
        experiments.run_evaluate(cfg)
        print(f"reports written to {experiments.reports_dir(cfg)}")
    elif args.command == "aggregate":
        out = experiments.run_aggregate(cfg)
        rep = out["report"]
        from .reports import fmt_value
        print(f"aggregate spearman: regular {fmt_value(rep.regular_value)}"
              f" irregular {fmt_value(rep.irregular_value)}")
    elif args.command == "epoch-sweep":
        experiments.run_epoch_sweep(cfg)
        print(f"sweep written to {experiments.reports_dir(cfg)}")
    elif args.command == "rules":
        out = experiments.run_rules(cfg)
        print(f"{len(out['grammar'])} rules; reports under"
              f" {cfg.out_dir}/rules")
    elif args.command == "probe":
        experiments.run_probe(cfg, reversed_control=not args.skip_reversed)
        print(f"probe exports under {cfg.out_dir}/probe")
    else:  # pragma: no cover - argparse enforces choices
        raise ValidationError(f"unknown command {args.command!r}")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse uses exit 2 for usage errors; those are validation
        # problems in this tool's taxonomy (--help stays 0)
        return EXIT_VALIDATION if e.code else EXIT_OK
    try:
        return _run(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except WuglabError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
