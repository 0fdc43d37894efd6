"""Command-line pipeline: synth -> train -> attack -> analyze.

Every command takes ``--config`` (YAML, optional: defaults are the desk
benchmark) plus ``--out``; ``--seed`` overrides the config's top-level seed.
Primary outputs (reports, checkpoints, plot data, images) are byte-identical
across runs with the same config and seed; wall-clock timings live in a
separate ``timings.json`` sidecar. Log verbosity comes from the
``PERTURBENCH_LOG`` environment variable (debug/info/warning/error).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, attacks, data, embedding, models, training
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, parse_config
from .errors import ConfigurationError, InputError, PerturbenchError
from .report import (
    campaign_records,
    campaign_summary,
    dataset_fingerprint,
    write_json,
    write_report,
    write_timings,
    write_tsv,
)

log = logging.getLogger("perturbench")

CAMPAIGNS_NAME = "campaigns.json"
CHECKPOINT_NAME = "model.ckpt"


def _setup_logging():
    level = os.environ.get("PERTURBENCH_LOG", "info").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_run_config(args):
    if args.config:
        return load_config(args.config, seed_override=args.seed)
    return parse_config({}, seed_override=args.seed)


def _config_echo(cfg):
    return asdict(cfg)


def resolve_model_config(section, input_shape, num_classes):
    """Fill a model section's missing fields from the family defaults."""
    base = models.default_config(section.family, num_classes, input_shape)
    cfg = models.ModelConfig(
        family=section.family,
        input_shape=input_shape,
        num_classes=num_classes,
        stage_widths=section.stage_widths or base.stage_widths,
        num_modules=section.num_modules or base.num_modules,
        aux_positions=(
            base.aux_positions if section.aux_positions is None else section.aux_positions
        ),
        aux_loss_weight=section.aux_loss_weight,
    )
    cfg.validate()
    return cfg


def cmd_synth(args):
    cfg = _load_run_config(args)
    out = Path(args.out)
    started = time.perf_counter()
    dataset = data.generate_synthetic(cfg.synth)
    tree = data.write_dataset_tree(dataset, out / "dataset")
    counts = dataset.per_class_counts()
    write_report(
        out,
        {
            "command": "synth",
            "config": _config_echo(cfg),
            "dataset": {
                "root": tree.name,
                "classes": dataset.class_names,
                "per_class_counts": counts,
                "records": len(dataset),
                "image_size": cfg.synth.image_size,
                "fingerprint": dataset_fingerprint(dataset),
            },
        },
    )
    write_timings(out, {"wall_seconds": time.perf_counter() - started})
    print(
        f"synth: wrote {len(dataset)} records "
        f"({dataset.num_classes} classes x {int(counts[0])} images) to {tree}"
    )
    return 0


def cmd_train(args):
    cfg = _load_run_config(args)
    out = Path(args.out)
    started = time.perf_counter()
    dataset = data.load_dataset_dir(args.dataset)
    input_shape = tuple(dataset.images.shape[1:])
    model_cfg = resolve_model_config(cfg.model, input_shape, dataset.num_classes)
    model = models.build_model(model_cfg, cfg.seed)
    log.info(
        "training %s (%d parameters) on %d records",
        model_cfg.family,
        model.parameter_count(),
        len(dataset),
    )
    train_set, test_set = training.split_dataset(dataset, cfg.train_fraction, cfg.train.seed)
    history = training.train_sgd(model, train_set, cfg.train)
    train_acc = training.evaluate_accuracy(model, train_set)
    test_acc = training.evaluate_accuracy(model, test_set)
    history.final_test_accuracy = test_acc
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        model,
        out / CHECKPOINT_NAME,
        metadata={
            "epochs": str(cfg.train.epochs),
            "train_accuracy": repr(train_acc),
            "test_accuracy": repr(test_acc),
        },
    )
    write_report(
        out,
        {
            "command": "train",
            "config": _config_echo(cfg),
            "model": {
                "family": model_cfg.family,
                "input_shape": model_cfg.input_shape,
                "num_classes": model_cfg.num_classes,
                "stage_widths": model_cfg.stage_widths,
                "num_modules": model_cfg.num_modules,
                "parameters": model.parameter_count(),
                "digest": models.parameter_digest(model),
            },
            "split": {"train": len(train_set), "test": len(test_set)},
            "train": {
                "epoch_loss": history.epoch_loss,
                "epoch_accuracy": history.epoch_accuracy,
                "final_train_accuracy": train_acc,
                "final_test_accuracy": test_acc,
            },
        },
    )
    write_timings(out, {"wall_seconds": time.perf_counter() - started})
    print(
        f"train: {model_cfg.family} reached train accuracy {train_acc:.4f}, "
        f"test accuracy {test_acc:.4f} after {cfg.train.epochs} epochs"
    )
    return 0


def _campaign_id(index, cfg):
    return f"c{index:02d}_{cfg.algorithm}"


def _dump_pairs(campaign, dataset, directory, limit):
    directory.mkdir(parents=True, exist_ok=True)
    dumped = 0
    for rec in campaign.records:
        if rec.skipped:
            continue
        original = dataset.images[rec.index]
        adversarial = np.clip(original + rec.perturbation, 0.0, 1.0)
        data.write_ppm(directory / f"{rec.index:05d}_original.ppm", data.unit_to_image(original))
        data.write_ppm(
            directory / f"{rec.index:05d}_adversarial.ppm", data.unit_to_image(adversarial)
        )
        dumped += 1
        if dumped >= limit:
            break


def cmd_attack(args):
    cfg = _load_run_config(args)
    out = Path(args.out)
    started = time.perf_counter()
    model = load_checkpoint(args.checkpoint)
    dataset = data.load_dataset_dir(args.dataset)
    if tuple(dataset.images.shape[1:]) != model.config.input_shape:
        raise InputError(
            f"attack: dataset images {dataset.images.shape[1:]} do not match "
            f"checkpoint input {model.config.input_shape}"
        )
    if dataset.num_classes != model.config.num_classes:
        raise InputError(
            f"attack: dataset has {dataset.num_classes} classes, "
            f"checkpoint expects {model.config.num_classes}"
        )
    summaries = []
    artifact_campaigns = []
    rows = []
    for i, attack_cfg in enumerate(cfg.attacks):
        cid = _campaign_id(i, attack_cfg)
        campaign = attacks.run_campaign(model, dataset, attack_cfg)
        summary = campaign_summary(campaign, cid)
        summaries.append(summary)
        artifact_campaigns.append({**summary, "records": campaign_records(campaign)})
        if cfg.dump_images[i]:
            _dump_pairs(campaign, dataset, out / "images" / cid, cfg.dump_images[i])
        rows.append(
            (
                cid,
                attack_cfg.algorithm,
                f"{attack_cfg.epsilon:.6f}",
                str(campaign.attacked),
                str(campaign.misclassified),
                f"{campaign.fooling_rate * 100:.2f}%" + (" (degenerate)" if campaign.degenerate else ""),
            )
        )
        log.info("campaign %s done: fooling rate %.4f", cid, campaign.fooling_rate)
    out.mkdir(parents=True, exist_ok=True)
    write_json(
        out / CAMPAIGNS_NAME,
        {
            "model_digest": models.parameter_digest(model),
            "dataset_fingerprint": dataset_fingerprint(dataset),
            "num_classes": dataset.num_classes,
            "class_names": dataset.class_names,
            "campaigns": artifact_campaigns,
        },
    )
    write_report(out, {"command": "attack", "config": _config_echo(cfg), "campaigns": summaries})
    write_timings(out, {"wall_seconds": time.perf_counter() - started})
    header = ("campaign", "algorithm", "epsilon", "attacked", "# adversarial examples", "fooling rate")
    widths = [max(len(h), max((len(r[c]) for r in rows), default=0)) for c, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return 0


def _campaign_from_summary(summary, num_classes):
    cfg_dict = dict(summary["config"])
    attack_cfg = attacks.AttackConfig(
        algorithm=cfg_dict["algorithm"],
        epsilon=cfg_dict["epsilon"],
        step_size=cfg_dict.get("step_size"),
        iterations=cfg_dict.get("iterations", 10),
        confidence_threshold=cfg_dict["confidence_threshold"],
    )
    pair_counts = {
        (entry["source"], entry["target"]): entry["count"] for entry in summary["pair_counts"]
    }
    return attacks.CampaignResult(
        config=attack_cfg,
        records=[],
        attacked=summary["attacked"],
        misclassified=summary["adversarial_examples"],
        fooling_rate=summary["fooling_rate"],
        degenerate=summary["degenerate"],
        pair_counts=pair_counts,
        num_classes=num_classes,
    )


def cmd_analyze(args):
    import json

    cfg = _load_run_config(args)
    out = Path(args.out)
    started = time.perf_counter()
    model = load_checkpoint(args.checkpoint)
    dataset = data.load_dataset_dir(args.dataset)
    artifact = json.loads(Path(args.campaign).read_text())
    if artifact.get("model_digest") != models.parameter_digest(model):
        raise InputError(
            "analyze: campaign artifact was produced by a different model checkpoint"
        )
    if artifact.get("dataset_fingerprint") != dataset_fingerprint(dataset):
        raise InputError("analyze: campaign artifact was produced from a different dataset")
    num_classes = dataset.num_classes
    k = cfg.analysis.top_k if cfg.analysis.top_k is not None else min(5, num_classes - 1)
    if k > num_classes - 1:
        raise ConfigurationError(
            f"analysis.top_k: must be <= K-1 = {num_classes - 1}, got {k}"
        )

    features = analysis.extract_features(model, dataset)
    pca = embedding.pca_embed(features.rows, components=2)
    tsne = embedding.tsne_embed(
        features.rows,
        perplexity=cfg.analysis.perplexity,
        iterations=cfg.analysis.tsne_iterations,
        seed=cfg.analysis.seed,
    )
    centers = analysis.class_centers(tsne.coords, features.labels, num_classes)
    feature_centers = analysis.class_centers(features.rows, features.labels, num_classes)

    plots = out / "plots"
    for tag, emb in (("tsne", tsne), ("pca", pca)):
        write_tsv(
            plots / f"embedding_{tag}.tsv",
            ("x", "y", "label"),
            [
                (emb.coords[i, 0], emb.coords[i, 1], int(features.labels[i]))
                for i in range(len(features.labels))
            ],
        )

    campaigns_payload = []
    for summary in artifact["campaigns"]:
        cid = summary["id"]
        campaign = _campaign_from_summary(summary, num_classes)
        dist = analysis.misclass_distribution(campaign)
        selectivity = analysis.selectivity_report(campaign, centers, k)
        write_tsv(
            plots / f"misclass_{cid}.tsv",
            ("class", "count"),
            [(c, int(n)) for c, n in enumerate(dist.counts)],
        )
        write_tsv(
            plots / f"selectivity_targets_{cid}.tsv",
            ("source", "target", "count"),
            [
                (cs.source, target, count)
                for cs in selectivity.per_class
                for target, count in cs.target_counts.items()
            ],
        )
        write_tsv(
            plots / f"selectivity_distance_{cid}.tsv",
            ("source", "rank", "neighbor", "distance"),
            [
                (cs.source, rank + 1, neighbor, distance)
                for cs in selectivity.per_class
                for rank, (neighbor, distance) in enumerate(cs.nearest)
            ],
        )
        campaigns_payload.append(
            {
                "id": cid,
                "fooling_rate": campaign.fooling_rate,
                "adversarial_examples": campaign.misclassified,
                "misclass_distribution": {
                    "counts": dist.counts,
                    "normalized_entropy": dist.normalized_entropy,
                    "gini": dist.gini,
                    "degenerate": dist.degenerate,
                },
                "selectivity": {
                    "k": selectivity.k,
                    "chance_baseline": selectivity.chance_baseline,
                    "aggregate_coverage": selectivity.aggregate_coverage,
                    "per_class": [
                        {
                            "source": cs.source,
                            "coverage": cs.coverage,
                            "nearest": [
                                {"class": c, "distance": d} for c, d in cs.nearest
                            ],
                            "target_counts": {str(t): n for t, n in cs.target_counts.items()},
                        }
                        for cs in selectivity.per_class
                    ],
                },
            }
        )
        cov = campaigns_payload[-1]["selectivity"]["aggregate_coverage"]
        cov_text = "n/a" if cov is None else f"{cov:.3f}"
        print(
            f"analyze: {cid} top-{k} coverage {cov_text} "
            f"(chance {selectivity.chance_baseline:.3f})"
        )

    write_report(
        out,
        {
            "command": "analyze",
            "config": _config_echo(cfg),
            "embedding": {
                "records": len(features.labels),
                "feature_width": features.rows.shape[1],
                "pca_variances": pca.variances,
                "tsne_kl": tsne.kl_divergence,
                "tsne_params": tsne.params,
            },
            "centers": {
                "embedding_distances": centers.distances,
                "feature_space_distances": feature_centers.distances,
            },
            "campaigns": campaigns_payload,
        },
    )
    write_timings(out, {"wall_seconds": time.perf_counter() - started})
    print(f"analyze: embedded {len(features.labels)} records; plots in {plots}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="perturbench",
        description="Desk-scale adversarial-example benchmark pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"perturbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=False, checkpoint=False, campaign=False):
        p.add_argument("--config", help="YAML run configuration (defaults: desk benchmark)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", required=True, help="output directory")
        if dataset:
            p.add_argument("--dataset", required=True, help="class-per-folder PPM dataset root")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="model checkpoint path")
        if campaign:
            p.add_argument("--campaign", required=True, help="campaigns.json from the attack step")

    p = sub.add_parser("synth", help="generate the synthetic PPM dataset tree")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="split, train, evaluate, write a checkpoint")
    common(p, dataset=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="run FGSM/BIM campaigns against a checkpoint")
    common(p, dataset=True, checkpoint=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("analyze", help="embeddings, selectivity, misclassification shape")
    common(p, dataset=True, checkpoint=True, campaign=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PerturbenchError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
