"""Command-line entry point: ``kar <subcommand> [--config FILE] [--key value ...]``.

Every RunConfig field is also a flag (``--batch-size 512``); flags override
the config file. Results go to stdout as tab-separated rows; logs go to
stderr. Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .errors import CacheError, ConfigError, DataError, KarError, NumericError
from .pipeline.config import RunConfig, apply_overrides, load_config

log = logging.getLogger("kar")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OTHER = 0, 2, 3, 4, 1


def _emit(text):
    sys.stdout.write(text)
    sys.stdout.flush()


def cmd_prepare_data(cfg, args):
    from .pipeline.stages import prepare_data

    res = prepare_data(cfg)
    _emit("split\tsamples\n"
          f"train\t{res.n_train}\ntest\t{res.n_test}\n")
    log.info("%d users, %d items -> %s, %s", res.n_users, res.n_items, cfg.train_path,
             cfg.test_path)


def cmd_elicit_factors(cfg, args):
    from .pipeline.stages import ask_factors

    factors = ask_factors(cfg)
    _emit("".join(f"{i}\t{f}\n" for i, f in enumerate(factors.factors, 1)))


def cmd_gen_prompts(cfg, args):
    from .pipeline.stages import gen_prompts

    reqs = gen_prompts(cfg)
    n_pref = sum(r.kind.value == "preference" for r in reqs)
    _emit(f"kind\tcount\npreference\t{n_pref}\nitem_factual\t{len(reqs) - n_pref}\n")


def cmd_gen_knowledge(cfg, args):
    from .pipeline.stages import gen_knowledge

    recs = gen_knowledge(cfg)
    _emit(f"records\tstore\n{len(recs)}\t{cfg.knowledge_path}\n")


def cmd_encode(cfg, args):
    from .pipeline.stages import encode

    cache = encode(cfg)
    _emit(f"vectors\tdim\tcache\n{len(cache)}\t{cache.dim}\t{cfg.reps_path}\n")


def cmd_train(cfg, args):
    from .pipeline.report import to_tsv, training_records, write_training_report
    from .pipeline.training import train

    res = train(cfg)
    write_training_report(res.report, cfg.report_dir, figures=cfg.figures)
    _emit(to_tsv(training_records(res.report),
                 ["backbone", "mode", "epoch", "train_logloss", "test_auc", "test_logloss"]))
    _emit(f"# best epoch {res.report.best_epoch}: auc {res.report.auc:.6f} "
          f"logloss {res.report.logloss:.6f}\n")


def cmd_ablate(cfg, args):
    from .pipeline.ablation import run_ablation
    from .pipeline.report import ABLATION_COLUMNS, to_tsv, write_ablation_report

    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    table = run_ablation(cfg, modes, workers=args.parallel)
    recs = table.to_records()
    write_ablation_report(recs, cfg.report_dir, figures=cfg.figures)
    _emit(to_tsv(recs, ABLATION_COLUMNS))


def cmd_bench(cfg, args):
    from .pipeline.bench import bench_inference
    from .pipeline.report import BENCH_COLUMNS, to_tsv, write_bench_report

    table = bench_inference(cfg)
    write_bench_report(table, cfg.report_dir, figures=cfg.figures)
    _emit(to_tsv(table.to_records(), BENCH_COLUMNS))


def cmd_export_augmented(cfg, args):
    from .pipeline.stages import export_augmented

    cache = export_augmented(cfg)
    _emit(f"vectors\tdim\tcache\n{len(cache)}\t{cache.dim}\t{cfg.aug_path}\n")


def cmd_synth(cfg, args):
    from .pipeline import synthetic

    out = Path(args.out)
    if args.kind == "movielens":
        synthetic.movielens_like(out, seed=cfg.seed, n_users=args.users, n_items=args.items,
                                 n_ratings=args.ratings)
        _emit(f"kind\tdir\nmovielens\t{out}\n")
    else:
        paths = synthetic.knowledge_dataset(out, seed=cfg.seed, n_users=args.users,
                                            n_items=args.items)
        _emit(f"kind\ttrain\ttest\treps\nknowledge\t{paths.train}\t{paths.test}\t{paths.reps}\n")


COMMANDS = {
    "prepare-data": (cmd_prepare_data, "parse MovieLens files, split by user, write sample files"),
    "elicit-factors": (cmd_elicit_factors, "ask the LLM for scenario factors (override applies)"),
    "gen-prompts": (cmd_gen_prompts, "render preference and item prompts"),
    "gen-knowledge": (cmd_gen_knowledge, "generate knowledge text for every prompt"),
    "encode": (cmd_encode, "encode and aggregate knowledge text into a vector cache"),
    "train": (cmd_train, "train a backbone (plus adaptor when mode != none)"),
    "ablate": (cmd_ablate, "train once per augmentation mode and compare"),
    "bench": (cmd_bench, "time base / in-line adaptor / prestored inference"),
    "export-augmented": (cmd_export_augmented, "prestore adaptor outputs for fast inference"),
    "synth": (cmd_synth, "write a synthetic dataset (knowledge ablation or MovieLens layout)"),
}


def _add_config_flags(p):
    p.add_argument("--config", help="plain-text 'key = value' config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    grp = p.add_argument_group("config keys")
    for f in fields(RunConfig):
        grp.add_argument("--" + f.name.replace("_", "-"), dest=f"cfg_{f.name}", default=None,
                         metavar=f.name.upper())


def build_parser():
    parser = argparse.ArgumentParser(prog="kar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        if name == "ablate":
            p.add_argument("--modes", default="none,fact,reasoning,both")
            p.add_argument("--parallel", type=int, default=1, help="worker processes")
        if name == "synth":
            p.add_argument("--kind", choices=("knowledge", "movielens"), default="knowledge")
            p.add_argument("--out", required=True)
            p.add_argument("--users", type=int, default=800)
            p.add_argument("--items", type=int, default=200)
            p.add_argument("--ratings", type=int, default=100_000)
    return parser


def resolve_config(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for f in fields(RunConfig):
        v = getattr(args, f"cfg_{f.name}")
        if v is not None:
            overrides[f.name] = v
    if args.config:
        return load_config(args.config, overrides)
    return apply_overrides(RunConfig(), overrides) if overrides else RunConfig()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CacheError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
