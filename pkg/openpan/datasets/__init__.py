from .registry import (
    register_split,
    get_split,
    list_splits,
    load_split_file,
    expand_split,
)
from .coco import (
    DatasetManifest,
    ImageEntry,
    rgb2id,
    id2rgb,
    load_coco_panoptic,
    save_coco_panoptic,
)
from .splits import SplitRole, build_open_set_split, label_void_proposals
from .features import (
    FeatureFileProvider,
    batch_stream,
    read_assignments,
    read_feature_file,
    read_pseudo_labels,
    write_assignments,
    write_feature_file,
    write_pseudo_labels,
)
from .synthetic import (
    SynthConfig,
    SyntheticPanoptic,
    generate_synthetic_features,
    generate_synthetic_panoptic,
    synthetic_categories,
)
from .utils import get_loader, get_num_workers


__all__ = [
    "register_split",
    "get_split",
    "list_splits",
    "load_split_file",
    "expand_split",
    "DatasetManifest",
    "ImageEntry",
    "rgb2id",
    "id2rgb",
    "load_coco_panoptic",
    "save_coco_panoptic",
    "SplitRole",
    "build_open_set_split",
    "label_void_proposals",
    "FeatureFileProvider",
    "batch_stream",
    "read_assignments",
    "read_feature_file",
    "read_pseudo_labels",
    "write_assignments",
    "write_feature_file",
    "write_pseudo_labels",
    "SynthConfig",
    "SyntheticPanoptic",
    "generate_synthetic_features",
    "generate_synthetic_panoptic",
    "synthetic_categories",
    "get_loader",
    "get_num_workers",
]


def __setup():
    from importlib.resources import files

    for preset in sorted(files(__name__).joinpath("splits").iterdir(), key=lambda p: p.name):
        if preset.name.endswith(".json"):
            load_split_file(preset)


__setup()
