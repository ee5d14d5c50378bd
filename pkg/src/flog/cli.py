"""Command-line entry point.

    flog <subcommand> --config <file> [--seed N] [--out DIR]

Subcommands run individual stages standalone (synth, parse, partition,
account) or the whole pipeline (train, evaluate). FLOG_THREADS caps
worker parallelism during local training.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import datasets, drain, model as model_ops, partition
from .accountant import PrivacyLedger
from .config import load_config
from .metrics import CSV_HEADER, csv_row, evaluate
from .model import ModelConfig, token_ids_from_keys
from .pipeline import (
    StageError,
    build_all_windows,
    load_entries,
    parse_corpus,
    run_pipeline,
)

log = logging.getLogger(__name__)


def _out_dir(args, cfg) -> Path:
    out = Path(args.out if args.out else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    if cfg.dataset.synthetic is None:
        print("config has no dataset.synthetic section", file=sys.stderr)
        return 1
    out = _out_dir(args, cfg)
    entries = datasets.generate_synthetic(cfg.dataset.synthetic)
    path = out / "synthetic.log"
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(datasets.encode_line(e) + "\n")
    print(f"wrote {len(entries)} lines to {path}")
    return 0


def cmd_parse(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    corpus = parse_corpus(load_entries(cfg), cfg)
    drain.write_template_table(corpus.parser.export_templates(), out / "templates.tsv")
    print(f"{corpus.n_templates} templates -> {out / 'templates.tsv'}")
    return 0


def cmd_partition(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    corpus = parse_corpus(load_entries(cfg), cfg)
    assignment = partition.round_robin_assign(
        list(corpus.records_by_node), cfg.federated.k_clients
    )
    partition.write_assignment_dump(assignment, out / "assignment.tsv")
    print(f"{len(assignment)} nodes over {cfg.federated.k_clients} clients "
          f"-> {out / 'assignment.tsv'}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    metrics = run_pipeline(cfg, args.seed)
    for m in metrics:
        print(csv_row(m))
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    ckpt = out / "model.ckpt"
    if not ckpt.exists():
        print(f"no checkpoint at {ckpt}; run `flog train` first", file=sys.stderr)
        return 1
    corpus = parse_corpus(load_entries(cfg), cfg)
    _, test_windows = build_all_windows(corpus, cfg)
    model_cfg = ModelConfig(
        vocab_size=corpus.n_templates + model_ops.N_RESERVED,
        hidden_dim=cfg.model.hidden_dim,
        head_dim=cfg.model.head_dim,
        n_heads=cfg.model.n_heads,
        n_layers=cfg.model.n_layers,
        lora_rank=cfg.model.lora_rank,
        lora_alpha=cfg.model.lora_alpha,
        lora_dropout=cfg.model.lora_dropout,
        max_sequence_length=cfg.window.max_sequence_length,
        ffn_dim=cfg.model.ffn_dim,
    )
    state = model_ops.init(model_cfg, [args.seed, 10])
    state.load(ckpt)
    scores = [
        float(model_ops.forward(state, token_ids_from_keys(w.key_ids, model_cfg.vocab_size))[0])
        for w in test_windows
    ]
    labels = [w.label for w in test_windows]
    print(CSV_HEADER)
    print(csv_row(evaluate(scores, labels)))
    return 0


def cmd_account(args) -> int:
    cfg = load_config(args.config)
    ledger = PrivacyLedger(
        target_epsilon=cfg.privacy.target_epsilon,
        delta=cfg.privacy.delta,
        noise_multiplier=cfg.federated.noise_multiplier,
        total_rounds=cfg.federated.rounds,
    )
    for _ in range(cfg.federated.rounds):
        ledger.update()
    print(ledger.dump(), end="")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "parse": cmd_parse,
    "partition": cmd_partition,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "account": cmd_account,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flog",
        description="Differentially private federated log anomaly detection simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=0, help="root random seed")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
