"""Experiment orchestration behind the CLI subcommands.

Output paths are a pure function of (config, command); reruns overwrite
deterministically.  Seeds train in parallel up to `workers` processes and
are merged in seed order, so parallelism never changes results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggregate import compare_to_humans, run_participants
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .data import (NonceItem, VerbEntry, expand_corpus, load_corpus,
                   load_nonce, write_corpus, write_nonce)
from .decode import beam_decode, force_score, training_accuracy
from .errors import CheckpointError, ProvenanceError, ValidationError
from .metrics import (MEASURES, category_means, correlate_forms, cr_at_5,
                      human_production_shares, second_place_agreement)
from .model import Model, init_model, train_epoch
from .probe import (decoder_phoneme_cloud, encoder_cloud, nearest_neighbors,
                    pca_project, reverse_entries)
from .reports import fmt_value, write_csv
from .rules import format_grammar, induce_grammar, score_form
from .synthetic import SynthSpec, make_synthetic_corpus
from .vocab import Vocabulary

from . import plots


# -- layout ---------------------------------------------------------------

def checkpoint_path(cfg: ExperimentConfig, seed: int, epoch: int) -> Path:
    return Path(cfg.out_dir) / "checkpoints" / f"seed{seed}_epoch{epoch}.ckpt"


def train_log_path(cfg: ExperimentConfig, seed: int) -> Path:
    return Path(cfg.out_dir) / "logs" / f"train_seed{seed}.csv"


def reports_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out_dir) / "reports"


def figures_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out_dir) / "figures"


# -- shared loading --------------------------------------------------------

def load_data(cfg: ExperimentConfig) -> tuple[list[VerbEntry], list[NonceItem]]:
    corpus = load_corpus(cfg.corpus, cfg.freq_mode)
    items = load_nonce(cfg.nonce)
    return corpus, items


def build_vocab(corpus: Sequence[VerbEntry],
                items: Sequence[NonceItem]) -> Vocabulary:
    seqs = [e.present for e in corpus] + [e.past for e in corpus]
    for item in items:
        seqs.append(item.present)
        for f in item.forms:
            seqs.append(f.phonemes)
    return Vocabulary.from_sequences(seqs)


def load_seed_checkpoint(cfg: ExperimentConfig, seed: int,
                         epoch: int) -> Model:
    path = checkpoint_path(cfg, seed, epoch)
    model = load_checkpoint(path)
    if model.seed != seed or model.epochs_completed != epoch:
        raise ProvenanceError(
            f"{path} records seed {model.seed} at epoch"
            f" {model.epochs_completed}, expected seed {seed} epoch {epoch}")
    return model


def require_checkpoints(cfg: ExperimentConfig,
                        epochs: Sequence[int] | None = None) -> None:
    epochs = epochs or [cfg.final_epoch]
    missing = [str(checkpoint_path(cfg, s, e))
               for s in cfg.seeds for e in epochs
               if not checkpoint_path(cfg, s, e).exists()]
    if missing:
        raise CheckpointError(
            "missing checkpoints (run `train` first):\n  "
            + "\n  ".join(missing))


# -- train -----------------------------------------------------------------

def _train_one_seed(cfg: ExperimentConfig, seed: int) -> list[tuple]:
    corpus, items = load_data(cfg)
    stream = expand_corpus(corpus, cfg.freq_mode)
    vocab = build_vocab(corpus, items)
    model = init_model(vocab, cfg.hp.with_seed(seed))
    rows = []
    for epoch in range(1, cfg.final_epoch + 1):
        loss = train_epoch(model, stream)
        if epoch % cfg.accuracy_every == 0 or epoch == cfg.final_epoch:
            acc = training_accuracy(model, corpus)
            rows.append((cfg.config_hash, seed, epoch, round(loss, 6),
                         round(acc.overall, 4), round(acc.regular, 4),
                         round(acc.irregular, 4)))
        if epoch in cfg.epoch_checkpoints:
            save_checkpoint(model, checkpoint_path(cfg, seed, epoch))
    return rows


def run_train(cfg: ExperimentConfig) -> dict[int, list[tuple]]:
    """Train every seed; returns and writes per-seed accuracy logs."""
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    cfg.write(Path(cfg.out_dir) / "config_used.txt")
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_train_one_seed,
                                    [cfg] * len(cfg.seeds), cfg.seeds))
        logs = dict(zip(cfg.seeds, results))
    else:
        logs = {seed: _train_one_seed(cfg, seed) for seed in cfg.seeds}
    header = ["config_hash", "seed", "epoch", "loss", "acc_overall",
              "acc_regular", "acc_irregular"]
    for seed in cfg.seeds:   # merge in seed order
        write_csv(train_log_path(cfg, seed), header, logs[seed])
        plots.convergence_plot(
            [r[2:] for r in logs[seed]],
            figures_dir(cfg) / f"convergence_seed{seed}.svg")
    return logs


# -- evaluate ---------------------------------------------------------------

def score_suggested_forms(model: Model, items: Sequence[NonceItem]) -> dict:
    scores = {}
    for item in items:
        for form in item.forms:
            scores[(item.item_id, form.phonemes)] = force_score(
                model, item.present, form.phonemes).probability
    return scores


def item_beams(model: Model, items: Sequence[NonceItem],
               width: int | None = None) -> dict:
    return {item.item_id: beam_decode(model, item.present, width)
            for item in items}


def run_evaluate(cfg: ExperimentConfig) -> dict:
    """Per-seed correlations, CR@5, accuracy summary, and the cross-seed
    second-place histogram, as CSV + SVG."""
    require_checkpoints(cfg)
    corpus, items = load_data(cfg)
    epoch = cfg.final_epoch
    rate_targets = ["production"] + (
        ["rating"] if all(i.has_ratings for i in items) else [])
    corr_rows, cr5_rows, cr5_item_rows, acc_rows = [], [], [], []
    beams_by_seed = {}
    corr_values: dict[str, dict[str, list]] = {}
    accs = []
    for seed in cfg.seeds:
        model = load_seed_checkpoint(cfg, seed, epoch)
        scores = score_suggested_forms(model, items)
        beams = item_beams(model, items)
        beams_by_seed[seed] = beams
        for measure in MEASURES:
            for target in rate_targets:
                rep = correlate_forms(items, scores, measure, target)
                corr_rows.append((cfg.config_hash, seed, epoch, measure,
                                  target, "regular",
                                  fmt_value(rep.regular_value), rep.n_regular))
                corr_rows.append((cfg.config_hash, seed, epoch, measure,
                                  target, "irregular",
                                  fmt_value(rep.irregular_value),
                                  rep.n_irregular))
                key = f"{measure}/{target}"
                pools = corr_values.setdefault(key, {"regular": [],
                                                     "irregular": []})
                pools["regular"].append((seed, rep.regular_value))
                pools["irregular"].append((seed, rep.irregular_value))
        cr5 = cr_at_5(items, beams)
        cr5_rows.append((cfg.config_hash, seed, epoch, cr5.n_items,
                         round(cr5.value, 6)))
        for item_id, ok in cr5.item_flags:
            cr5_item_rows.append((cfg.config_hash, seed, epoch, item_id,
                                  int(ok)))
        acc = training_accuracy(model, corpus)
        accs.append(acc)
        acc_rows.append((cfg.config_hash, seed, epoch,
                         round(acc.overall, 4), round(acc.regular, 4),
                         round(acc.irregular, 4)))
    rep_dir = reports_dir(cfg)
    write_csv(rep_dir / "correlations.csv",
              ["config_hash", "seed", "epoch", "measure", "target", "pool",
               "value", "n_forms"], corr_rows)
    write_csv(rep_dir / "cr5.csv",
              ["config_hash", "seed", "epoch", "n_items", "cr5"], cr5_rows)
    write_csv(rep_dir / "cr5_items.csv",
              ["config_hash", "seed", "epoch", "item", "complete"],
              cr5_item_rows)
    write_csv(rep_dir / "accuracy.csv",
              ["config_hash", "seed", "epoch", "overall", "regular",
               "irregular"], acc_rows)
    summary_rows = []
    for pool in ("overall", "regular", "irregular"):
        vals = [getattr(a, pool) for a in accs]
        summary_rows.append((cfg.config_hash, epoch, pool,
                             round(float(np.mean(vals)), 4),
                             round(float(np.std(vals)), 4)))
    write_csv(rep_dir / "accuracy_summary.csv",
              ["config_hash", "epoch", "pool", "mean", "std"], summary_rows)
    hist_rows = []
    histogram = None
    if len(cfg.seeds) >= 2:
        histogram = second_place_agreement(beams_by_seed)
        for (item_id, phonemes), count in sorted(histogram.items()):
            hist_rows.append((cfg.config_hash, epoch, item_id,
                              " ".join(phonemes), count))
        plots.second_place_bar(histogram,
                               figures_dir(cfg) / "second_place.svg")
    write_csv(rep_dir / "second_place.csv",
              ["config_hash", "epoch", "item", "form", "n_seeds"], hist_rows)
    for key, pools in corr_values.items():
        name = key.replace("/", "_")
        plots.correlation_scatter(pools,
                                  figures_dir(cfg) / f"correlations_{name}.svg",
                                  title=key)
    plots.cr5_scatter([(r[1], r[4]) for r in cr5_rows],
                      figures_dir(cfg) / "cr5.svg")
    return {"correlations": corr_rows, "cr5": cr5_rows,
            "accuracy": acc_rows, "second_place": histogram}


# -- aggregate ---------------------------------------------------------------

def run_aggregate(cfg: ExperimentConfig, n_samples: int | None = None) -> dict:
    """Participant-style table from sampled productions plus the human
    comparison (correlations, preference flags, category means)."""
    require_checkpoints(cfg)
    corpus, items = load_data(cfg)
    n_samples = cfg.samples if n_samples is None else n_samples
    models = [load_seed_checkpoint(cfg, seed, cfg.final_epoch)
              for seed in cfg.seeds]
    table = run_participants(corpus, items, cfg.hp, len(models), n_samples,
                             models=models)
    human = human_production_shares(items)
    model_shares = table.shares_by_item()
    rows = []
    from .data import CATEGORIES

    items_by_block = sorted(items, key=lambda it: (
        CATEGORIES.index(it.category), it.item_id))
    for item in items_by_block:
        shares = table.shares(item.item_id)
        counts = table.counts[item.item_id]
        for role in ("reg", "irr1", "irr2", "other"):
            human_share = human[item.item_id].get(role)
            if role in ("irr1", "irr2") and human_share is None:
                continue
            rows.append((cfg.config_hash, item.item_id, item.category, role,
                         counts.get(role, 0), round(shares[role], 6),
                         round(human_share, 6)))
    rep_dir = reports_dir(cfg)
    write_csv(rep_dir / "production_table.csv",
              ["config_hash", "item", "category", "role", "count",
               "model_share", "human_share"], rows)
    report, flags = compare_to_humans(table, items)
    write_csv(rep_dir / "aggregate_comparison.csv",
              ["config_hash", "measure", "target", "pool", "value",
               "n_forms"],
              [(cfg.config_hash, report.measure, report.target, "regular",
                fmt_value(report.regular_value), report.n_regular),
               (cfg.config_hash, report.measure, report.target, "irregular",
                fmt_value(report.irregular_value), report.n_irregular)])
    write_csv(rep_dir / "preference_flags.csv",
              ["config_hash", "item", "human_prefers_irregular",
               "model_prefers_irregular"],
              [(cfg.config_hash, f.item_id, int(f.human_prefers_irregular),
                int(f.model_prefers_irregular)) for f in flags])
    hmeans = category_means(items, human)
    mmeans = category_means(items, model_shares)
    write_csv(rep_dir / "category_means.csv",
              ["config_hash", "source", "category", "regular_mean",
               "irregular_mean", "n_items"],
              [(cfg.config_hash, src, m.category, round(m.regular_mean, 6),
                round(m.irregular_mean, 6), m.n_items)
               for src, means in (("humans", hmeans), ("model", mmeans))
               for m in means])
    plots.production_table_bars(items, human, model_shares,
                                figures_dir(cfg) / "production_table.svg")
    plots.category_means_bars(hmeans, mmeans,
                              figures_dir(cfg) / "category_means.svg")
    return {"table": table, "report": report, "flags": flags}


# -- epoch sweep --------------------------------------------------------------

def run_epoch_sweep(cfg: ExperimentConfig) -> list[tuple]:
    """Correlation-vs-epoch and beam-skew curves over saved checkpoints."""
    require_checkpoints(cfg, cfg.epoch_checkpoints)
    corpus, items = load_data(cfg)
    rows = []
    per_epoch: dict[int, list] = {}
    for seed in cfg.seeds:
        for epoch in cfg.epoch_checkpoints:
            model = load_seed_checkpoint(cfg, seed, epoch)
            scores = score_suggested_forms(model, items)
            rep = correlate_forms(items, scores, "spearman", "production")
            beams = item_beams(model, items)
            top_probs = [math.exp(b.top.log_prob) for b in beams.values()]
            acc = training_accuracy(model, corpus)
            row = (cfg.config_hash, seed, epoch,
                   fmt_value(rep.regular_value), fmt_value(rep.irregular_value),
                   round(float(np.mean(top_probs)), 6),
                   round(acc.irregular, 4))
            rows.append(row)
            per_epoch.setdefault(epoch, []).append(
                (rep.regular_value, rep.irregular_value,
                 float(np.mean(top_probs)), acc.irregular))
    write_csv(reports_dir(cfg) / "epoch_sweep.csv",
              ["config_hash", "seed", "epoch", "rho_regular", "rho_irregular",
               "mean_top_probability", "irregular_accuracy"], rows)

    def mean_or_none(vals):
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    avg_rows = []
    for epoch in cfg.epoch_checkpoints:
        cols = list(zip(*per_epoch[epoch]))
        avg_rows.append((epoch, mean_or_none(cols[0]), mean_or_none(cols[1]),
                         float(np.mean(cols[2])), float(np.mean(cols[3]))))
    plots.epoch_sweep_plot(avg_rows, figures_dir(cfg) / "epoch_sweep.svg")
    return rows


# -- rules ---------------------------------------------------------------------

def run_rules(cfg: ExperimentConfig) -> dict:
    """Rule-learner baseline: grammar export plus correlation reports in
    the exact format of the neural ones (seed column empty)."""
    corpus, items = load_data(cfg)
    grammar = induce_grammar(corpus)
    out = Path(cfg.out_dir) / "rules"
    out.mkdir(parents=True, exist_ok=True)
    (out / "grammar.txt").write_text(format_grammar(grammar),
                                     encoding="utf-8")
    scores = {(item.item_id, form.phonemes):
              score_form(grammar, item.present, form.phonemes)
              for item in items for form in item.forms}
    rate_targets = ["production"] + (
        ["rating"] if all(i.has_ratings for i in items) else [])
    rows = []
    for measure in MEASURES:
        for target in rate_targets:
            rep = correlate_forms(items, scores, measure, target)
            rows.append((cfg.config_hash, "", "", measure, target, "regular",
                         fmt_value(rep.regular_value), rep.n_regular))
            rows.append((cfg.config_hash, "", "", measure, target,
                         "irregular", fmt_value(rep.irregular_value),
                         rep.n_irregular))
    write_csv(out / "correlations.csv",
              ["config_hash", "seed", "epoch", "measure", "target", "pool",
               "value", "n_forms"], rows)
    return {"grammar": grammar, "rows": rows}


# -- probes ----------------------------------------------------------------------

def _cloud_csv(cloud, path):
    width = cloud.vectors.shape[1]
    header = ["label", "class", *[f"v{i}" for i in range(width)]]
    rows = [(cloud.labels[i], cloud.classes[i],
             *[f"{x:.8g}" for x in cloud.vectors[i]])
            for i in range(len(cloud.labels))]
    write_csv(path, header, rows)


def run_probe(cfg: ExperimentConfig, reversed_control: bool = True) -> dict:
    """Encoder/decoder state clouds, PCA projections, neighbour lists,
    and (optionally) the reversed-phoneme control model's cloud."""
    require_checkpoints(cfg)
    corpus, items = load_data(cfg)
    seed = cfg.seeds[0]
    model = load_seed_checkpoint(cfg, seed, cfg.final_epoch)
    out = Path(cfg.out_dir) / "probe"
    words = [(e.lemma, e.present, e.verb_class) for e in corpus]
    words += [(item.item_id, item.present, "nonce") for item in items]
    seen, uniq = set(), []
    for label, phonemes, cls in words:
        if label not in seen:
            seen.add(label)
            uniq.append((label, phonemes, cls))
    enc = encoder_cloud(model, uniq)
    _cloud_csv(enc, out / "encoder_cloud.csv")
    enc_pca = pca_project(enc, 2)
    _cloud_csv(enc_pca.cloud, out / "encoder_pca.csv")
    write_csv(out / "encoder_pca_variance.csv",
              ["component", "explained_variance_ratio"],
              [(i + 1, f"{r:.6f}")
               for i, r in enumerate(enc_pca.explained_variance_ratio)])
    plots.pca_scatter(enc_pca.cloud, figures_dir(cfg) / "encoder_pca.svg",
                      title=f"encoder states (seed {seed})")
    neigh = nearest_neighbors(enc, k=3)
    write_csv(out / "encoder_neighbors.csv",
              ["label", "nearest1", "nearest2", "nearest3"],
              [(label, *ns) for label, ns in sorted(neigh.items())])
    regulars = [e for e in corpus if e.verb_class == "regular"]
    pho = decoder_phoneme_cloud(model, contexts=regulars)
    _cloud_csv(pho, out / "phoneme_cloud.csv")
    pho_pca = pca_project(pho, 2)
    _cloud_csv(pho_pca.cloud, out / "phoneme_pca.csv")
    write_csv(out / "phoneme_pca_variance.csv",
              ["component", "explained_variance_ratio"],
              [(i + 1, f"{r:.6f}")
               for i, r in enumerate(pho_pca.explained_variance_ratio)])
    plots.pca_scatter(pho_pca.cloud, figures_dir(cfg) / "phoneme_pca.svg",
                      title="decoder phoneme vectors")
    result = {"encoder": enc, "phonemes": pho}
    if reversed_control:
        rev_corpus = reverse_entries(load_corpus(cfg.corpus, cfg.freq_mode))
        stream = expand_corpus(rev_corpus, cfg.freq_mode)
        vocab = build_vocab(rev_corpus, [])
        rev_model = init_model(vocab, cfg.hp.with_seed(seed))
        for _ in range(cfg.final_epoch):
            train_epoch(rev_model, stream)
        rev_words = [(e.lemma, e.present, e.verb_class) for e in rev_corpus]
        rev_cloud = encoder_cloud(rev_model, rev_words)
        _cloud_csv(rev_cloud, out / "reversed_encoder_cloud.csv")
        rev_pca = pca_project(rev_cloud, 2)
        _cloud_csv(rev_pca.cloud, out / "reversed_encoder_pca.csv")
        plots.pca_scatter(rev_pca.cloud,
                          figures_dir(cfg) / "reversed_encoder_pca.svg",
                          title="reversed-input control")
        result["reversed"] = rev_cloud
    return result


# -- synth -------------------------------------------------------------------------

def run_synth(out_dir, seed: int = 7,
              spec: SynthSpec | None = None) -> tuple[Path, Path]:
    """Write a synthetic corpus + nonce pair usable as CLI inputs."""
    spec = spec or SynthSpec()
    entries, items = make_synthetic_corpus(spec, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "corpus.tsv"
    nonce_path = out / "nonce.tsv"
    write_corpus(corpus_path, entries)
    write_nonce(nonce_path, items)
    return corpus_path, nonce_path
