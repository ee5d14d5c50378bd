"""End-to-end orchestration: ingest, parse, window, partition, train, evaluate.

Stage outputs are written under the output directory with fixed names
(templates.tsv, assignment.tsv, rounds.csv, ledger.txt, model.ckpt) and a
re-run with the same seed reproduces them.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass
from pathlib import Path

from . import datasets, drain, federated, model as model_ops, partition, windows
from .accountant import PrivacyLedger
from .config import RunConfig
from .metrics import CSV_HEADER, RoundMetrics, csv_row
from .model import ModelConfig

log = logging.getLogger(__name__)

ARTIFACTS = ("templates.tsv", "assignment.tsv", "rounds.csv", "ledger.txt", "model.ckpt")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


@dataclass
class ParsedCorpus:
    parser: drain.DrainParser
    records_by_node: dict[str, list[drain.LogRecord]]  # first-seen node order

    @property
    def n_templates(self) -> int:
        return len(self.parser.templates)


def load_entries(cfg: RunConfig) -> list[datasets.RawEntry]:
    ds = cfg.dataset
    if ds.format == "synthetic":
        # The synthetic corpus is seeded by its own spec so the dataset stays
        # fixed while --seed varies the training randomness.
        entries = datasets.generate_synthetic(ds.synthetic)
        if ds.max_samples is not None:
            entries = entries[: ds.max_samples]
    else:
        entries = [
            e for e, _ in datasets.read_log_file(ds.path, ds.format, ds.max_samples)
        ]
    if ds.min_anomaly_rate_per_node is not None:
        entries = datasets.filter_min_anomaly_rate(entries, ds.min_anomaly_rate_per_node)
    return entries


def parse_corpus(entries: list[datasets.RawEntry], cfg: RunConfig) -> ParsedCorpus:
    parser = drain.DrainParser(cfg.parser)
    records_by_node: dict[str, list[drain.LogRecord]] = {}
    for entry in entries:
        event_id = parser.parse_message(entry.message)
        if event_id is None:
            continue
        records_by_node.setdefault(entry.node_id, []).append(
            drain.LogRecord(
                timestamp=entry.epoch_seconds,
                node_id=entry.node_id,
                is_anomalous=entry.is_anomalous,
                event_id=event_id,
                raw_content_hash=zlib.crc32(entry.message.encode("utf-8")),
            )
        )
    return ParsedCorpus(parser=parser, records_by_node=records_by_node)


def build_all_windows(corpus: ParsedCorpus, cfg: RunConfig):
    """Per-node windows split chronologically into train and test sets."""
    train: list[windows.WindowSequence] = []
    test: list[windows.WindowSequence] = []
    for node, records in corpus.records_by_node.items():
        ws = windows.build_windows(records, cfg.window)
        n_test = int(len(ws) * cfg.evaluation.test_fraction)
        cut = len(ws) - n_test
        train.extend(ws[:cut])
        test.extend(ws[cut:])
    return train, test


def run_pipeline(cfg: RunConfig, seed: int) -> list[RoundMetrics]:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    try:
        entries = load_entries(cfg)
    except Exception as exc:
        raise StageError("ingest", exc) from exc
    log.info("ingested %d entries", len(entries))

    try:
        corpus = parse_corpus(entries, cfg)
        drain.write_template_table(corpus.parser.export_templates(), out / "templates.tsv")
    except Exception as exc:
        raise StageError("parse", exc) from exc
    log.info("parsed %d templates across %d nodes",
             corpus.n_templates, len(corpus.records_by_node))

    try:
        train_windows, test_windows = build_all_windows(corpus, cfg)
    except Exception as exc:
        raise StageError("window", exc) from exc
    log.info("built %d train / %d test windows", len(train_windows), len(test_windows))

    try:
        nodes = list(corpus.records_by_node)
        assignment = partition.round_robin_assign(nodes, cfg.federated.k_clients)
        clients = partition.materialize(train_windows, assignment, cfg.federated.k_clients)
        partition.write_assignment_dump(assignment, out / "assignment.tsv")
    except Exception as exc:
        raise StageError("partition", exc) from exc

    try:
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
        state = model_ops.init(model_cfg, [seed, 10])
        fed_cfg = federated.FedConfig(
            **{
                **{f: getattr(cfg.federated, f) for f in (
                    "k_clients", "rounds", "participation_rate", "local_epochs",
                    "learning_rate", "proximal_mu", "clip_bound", "noise_multiplier",
                    "batch_size", "weight_decay", "warmup_ratio", "grad_accum_steps",
                    "max_grad_norm",
                )},
                "seed": seed,
            }
        )
        ledger = PrivacyLedger(
            target_epsilon=cfg.privacy.target_epsilon,
            delta=cfg.privacy.delta,
            noise_multiplier=fed_cfg.noise_multiplier,
            total_rounds=fed_cfg.rounds,
        )
        trainer = federated.FederatedTrainer(
            state,
            clients,
            [w.key_ids for w in test_windows],
            [w.label for w in test_windows],
            fed_cfg,
            ledger,
        )
        metrics = trainer.run()
    except Exception as exc:
        raise StageError("train", exc) from exc

    with open(out / "rounds.csv", "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for m in metrics:
            fh.write(csv_row(m) + "\n")
    (out / "ledger.txt").write_text(ledger.dump(), encoding="utf-8")
    state.save(out / "model.ckpt")
    return metrics
