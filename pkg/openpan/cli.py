import hashlib
import json
import logging
import sys
from pathlib import Path
import fire
import numpy as np
from PIL import Image

from . import __version__
from .config import config_to_dict, load_config
from .datasets import (
    FeatureFileProvider,
    SplitRole,
    batch_stream,
    build_open_set_split,
    generate_synthetic_features,
    generate_synthetic_panoptic,
    get_split,
    load_coco_panoptic,
    load_split_file,
    read_assignments,
    read_feature_file,
    save_coco_panoptic,
    write_assignments,
    write_feature_file,
    write_pseudo_labels,
)
from .datasets.coco import DatasetManifest, ImageEntry, load_categories
from .discovery import run_discovery, score_discovery
from .errors import AnnotationError, OpenPanError
from .eval import evaluate_dataset, format_report, report_from_dict, report_to_dict
from .fusion import InstancePrediction, fuse_panoptic, select_unknown_instances
from .logging import entrypoint
from .random import FixedSeed


MANIFEST_NAME = "run_manifest.json"


def _sha256(path):
    path = Path(path)
    h = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for p in files:
        if path.is_dir():
            h.update(str(p.relative_to(path)).encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def write_run_manifest(out, command, inputs, cfg):
    """Records input hashes, resolved config, seed and version next to the outputs."""
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "inputs": {
            name: {"path": str(p), "sha256": _sha256(p)}
            for name, p in sorted(inputs.items())
            if p is not None
        },
        "config": config_to_dict(cfg),
    }
    path = Path(out) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, default=str)
    return path


def _png_dir(json_path, png_dir=None):
    json_path = Path(json_path)
    return Path(png_dir) if png_dir is not None else json_path.with_suffix("")


def _overrides(**kwargs):
    return {k: v for k, v in kwargs.items() if v is not None}


@entrypoint
def build_split(src=None, src_png=None, split="5", role="train", out=None, log_dir=None):
    """Converts closed-set COCO panoptic annotations into an open-set split.

    `split` is a preset name (5, 10, 20) or a JSON split file.
    """
    if src is None or out is None:
        raise fire.core.FireError("build-split requires --src and --out.")

    cfg = load_config()
    spec = load_split_file(split) if Path(str(split)).is_file() else get_split(split)

    manifest, maps = load_coco_panoptic(src, _png_dir(src, src_png))
    manifest, maps = build_open_set_split(manifest, maps, spec, role=SplitRole(role))

    out = Path(out)
    save_coco_panoptic(manifest, maps, out / "panoptic.json", out / "panoptic")
    write_run_manifest(
        out,
        "build-split",
        {"src": src, "src_png": _png_dir(src, src_png)},
        cfg,
    )


def _load_pairs(gt, gt_png, pred, pred_png):
    gt_manifest, gt_maps = load_coco_panoptic(gt, _png_dir(gt, gt_png))
    _, pred_maps = load_coco_panoptic(pred, _png_dir(pred, pred_png))

    missing = sorted(set(gt_maps) - set(pred_maps))
    if missing:
        raise AnnotationError(f"Predictions missing for images {missing[:5]}.")

    pairs = [(i, gt_maps[i], pred_maps[i]) for i in sorted(gt_maps)]
    return gt_manifest.categories, pairs


@entrypoint
def evaluate(
    gt=None,
    pred=None,
    gt_png=None,
    pred_png=None,
    config=None,
    num_workers=None,
    seed=None,
    out=None,
    log_dir=None,
):
    """Open-set PQ/SQ/RQ of predictions against ground truth (both COCO panoptic)."""
    if gt is None or pred is None:
        raise fire.core.FireError("evaluate requires --gt and --pred.")

    cfg = load_config(config, overrides=_overrides(**{"eval.num_workers": num_workers}), seed=seed)

    cats, pairs = _load_pairs(gt, gt_png, pred, pred_png)
    report = evaluate_dataset(pairs, cats, num_workers=cfg.eval.num_workers)

    text = format_report(report, cats=cats, per_category=cfg.eval.per_category)
    print(text)

    logging.info(
        {f"{g}/{m}": getattr(v, m) for g, v in report.groups.items() for m in ["pq", "sq", "rq"]},
        extra=dict(metrics=True, prefix="evaluate"),
    )

    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as f:
            json.dump(report_to_dict(report), f, indent=2)
        (out / "report.txt").write_text(text + "\n")
        write_run_manifest(
            out,
            "evaluate",
            {
                "gt": gt,
                "gt_png": _png_dir(gt, gt_png),
                "pred": pred,
                "pred_png": _png_dir(pred, pred_png),
                "config": config,
            },
            cfg,
        )


@entrypoint
def discover(
    features=None,
    config=None,
    seed=None,
    out=None,
    provider=None,
    assignments=None,
    images_per_step=1,
    k_clusters=None,
    cluster_interval_steps=None,
    top_cluster_fraction=None,
    log_dir=None,
):
    """Unknown-class discovery over a proposal-feature file.

    `provider` optionally names a newer feature file used to refresh exemplar
    features before every clustering round; `assignments` scores the result
    against planted labels.
    """
    if features is None or out is None:
        raise fire.core.FireError("discover requires --features and --out.")

    cfg = load_config(
        config,
        overrides=_overrides(
            **{
                "engine.k_clusters": k_clusters,
                "engine.cluster_interval_steps": cluster_interval_steps,
                "engine.top_cluster_fraction": top_cluster_fraction,
            }
        ),
        seed=seed,
    )

    records = read_feature_file(features)
    feature_provider = FeatureFileProvider(provider) if provider is not None else None

    with FixedSeed(cfg.engine.rng_seed):
        store, labels = run_discovery(
            batch_stream(records, images_per_step=images_per_step),
            cfg=cfg.engine,
            provider=feature_provider,
        )

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_pseudo_labels(out / "pseudo_labels.csv", labels)

    summary = {
        "classes": len(store),
        "exemplars": store.n_exemplars,
        "objectness_threshold": store.current_objectness_threshold,
        "mining_distance": store.current_mining_distance,
    }
    if assignments is not None:
        score = score_discovery(store, read_assignments(assignments))
        summary.update(
            {
                "recovered": list(score.recovered),
                "min_purity": score.min_purity,
                "distractor_acceptance": score.distractor_acceptance,
            }
        )
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2)

    print(json.dumps(summary))
    logging.info(summary, extra=dict(metrics=True, prefix="discover"))

    write_run_manifest(
        out,
        "discover",
        {
            "features": features,
            "config": config,
            "provider": provider,
            "assignments": assignments,
        },
        cfg,
    )


def _read_semantic(path):
    with Image.open(path) as im:
        return np.array(im, dtype=np.uint32)


@entrypoint
def fuse(
    instances=None,
    semantic_dir=None,
    categories=None,
    config=None,
    seed=None,
    out=None,
    log_dir=None,
):
    """Fuses RLE instance predictions with stuff semantic maps into COCO panoptic.

    `instances` is a JSON list of `{image_id, segmentation (RLE), category_id,
    score, unknown}`; `semantic_dir` holds one `<image_id>.png` of stuff
    category ids per image; `categories` is a COCO panoptic JSON whose
    categories are used.
    """
    if instances is None or semantic_dir is None or categories is None or out is None:
        raise fire.core.FireError(
            "fuse requires --instances, --semantic_dir, --categories and --out."
        )

    cfg = load_config(config, seed=seed)

    with open(categories) as f:
        cats = load_categories(json.load(f))
    with open(instances) as f:
        entries = json.load(f)

    by_image = dict()
    for e in entries:
        by_image.setdefault(int(e["image_id"]), []).append(e)

    semantic_dir = Path(semantic_dir)
    images, maps = [], dict()
    for path in sorted(semantic_dir.glob("*.png")):
        image_id = int(path.stem)
        semantic = _read_semantic(path)

        known, unknown = [], []
        for e in by_image.get(image_id, []):
            inst = InstancePrediction.from_rle(
                e["segmentation"], int(e["category_id"]), float(e["score"])
            )
            (unknown if e.get("unknown", False) else known).append(inst)
        unknown = select_unknown_instances(
            unknown, score_threshold=cfg.fusion.unknown_score_threshold
        )

        maps[image_id] = fuse_panoptic(known, unknown, semantic, cfg=cfg.fusion)
        images.append(
            ImageEntry(
                id=image_id,
                width=semantic.shape[1],
                height=semantic.shape[0],
                annotation=f"{image_id:012d}.png",
            )
        )

    out = Path(out)
    save_coco_panoptic(
        DatasetManifest(images=images, categories=cats, split_name="fused"),
        maps,
        out / "panoptic.json",
        out / "panoptic",
    )
    write_run_manifest(
        out,
        "fuse",
        {
            "instances": instances,
            "semantic_dir": semantic_dir,
            "categories": categories,
            "config": config,
        },
        cfg,
    )


@entrypoint
def synth_features(out=None, config=None, seed=None, log_dir=None):
    """Writes a planted-cluster proposal file and its ground-truth assignments."""
    if out is None:
        raise fire.core.FireError("synth features requires --out.")

    cfg = load_config(config, seed=seed)
    records, assignments = generate_synthetic_features(cfg.synth)

    out = Path(out)
    write_feature_file(out / "features.opsf", records, feature_dim=cfg.synth.feature_dim)
    write_assignments(
        out / "assignments.csv", records, [assignments[r.key] for r in records]
    )
    write_run_manifest(out, "synth features", {"config": config}, cfg)


@entrypoint
def synth_panoptic(out=None, config=None, seed=None, log_dir=None):
    """Writes random ground truth, perturbed predictions and the expected report."""
    if out is None:
        raise fire.core.FireError("synth panoptic requires --out.")

    cfg = load_config(config, seed=seed)
    data = generate_synthetic_panoptic(cfg.synth)

    out = Path(out)
    images = [
        ImageEntry(id=i, width=m.width, height=m.height, annotation=f"{i:012d}.png")
        for i, m in sorted(data.gts.items())
    ]
    for name, maps in [("gt", data.gts), ("pred", data.preds)]:
        save_coco_panoptic(
            DatasetManifest(images=images, categories=data.categories, split_name=name),
            maps,
            out / f"{name}.json",
            out / name,
        )
    with open(out / "expected_report.json", "w") as f:
        json.dump(report_to_dict(data.expected), f, indent=2)

    write_run_manifest(out, "synth panoptic", {"config": config}, cfg)


def report(report_json=None, categories=None, per_category=True):
    """Prints a saved report as a table."""
    if report_json is None:
        raise fire.core.FireError("report requires --report_json.")

    with open(report_json) as f:
        rep = report_from_dict(json.load(f))

    cats = None
    if categories is not None:
        with open(categories) as f:
            cats = load_categories(json.load(f))

    print(format_report(rep, cats=cats, per_category=per_category))


COMMANDS = {
    "build-split": build_split,
    "evaluate": evaluate,
    "discover": discover,
    "fuse": fuse,
    "synth": {
        "features": synth_features,
        "panoptic": synth_panoptic,
    },
    "report": report,
}

USAGE = "openpan {build-split,evaluate,discover,fuse,synth {features,panoptic},report} [--flags]"


def main(argv=None):
    try:
        fire.Fire(COMMANDS, command=argv, name="openpan")
    except fire.core.FireExit as e:
        if e.code not in (0, None):
            print(f"error: usage: {USAGE}", file=sys.stderr)
        sys.exit(e.code)
    except fire.core.FireError as e:
        print(f"error: usage: {e}", file=sys.stderr)
        sys.exit(2)
    except (OpenPanError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
