import json
import numpy as np
import pytest
from PIL import Image

from openpan.datasets import (
    DatasetManifest,
    ImageEntry,
    SynthConfig,
    generate_synthetic_panoptic,
    id2rgb,
    load_coco_panoptic,
    rgb2id,
    save_coco_panoptic,
)
from openpan.errors import AnnotationError
from openpan.types import VOID, Status


@pytest.fixture
def dataset(tmp_path):
    data = generate_synthetic_panoptic(SynthConfig(n_images=4, crowd_prob=0.5, rng_seed=1))
    manifest = DatasetManifest(
        images=[ImageEntry(i, 32, 32, file_name=f"img{i}.jpg") for i in data.gts],
        categories=data.categories,
        split_name="synthetic",
    )
    json_path, png_dir = save_coco_panoptic(
        manifest, data.gts, tmp_path / "gt.json", tmp_path / "gt"
    )
    return data, json_path, png_dir


def _edit_json(path, fn):
    with open(path) as f:
        data = json.load(f)
    fn(data)
    with open(path, "w") as f:
        json.dump(data, f)


class TestColorCodec:
    def test_known_colors(self):
        assert rgb2id([0, 0, 0]) == 0
        assert rgb2id([1, 2, 3]) == 1 + 2 * 256 + 3 * 65536
        assert rgb2id([255, 255, 255]) == 256**3 - 1

    def test_inverse(self, rng):
        ids = rng.integers(0, 256**3, size=(16, 16), dtype=np.uint32)
        np.testing.assert_array_equal(rgb2id(id2rgb(ids)), ids)

    def test_out_of_range(self):
        with pytest.raises(AnnotationError):
            id2rgb(np.array([[256**3]], dtype=np.uint64))


class TestLoadSave:
    def test_load(self, dataset):
        data, json_path, png_dir = dataset
        manifest, maps = load_coco_panoptic(json_path, png_dir)

        assert manifest.split_name == "synthetic"
        assert manifest.categories == data.categories
        assert sorted(maps) == sorted(data.gts)
        for i, pmap in maps.items():
            np.testing.assert_array_equal(pmap.pixels, data.gts[i].pixels)
            assert pmap.segments == data.gts[i].segments

    def test_resave_is_byte_identical(self, dataset, tmp_path):
        _, json_path, png_dir = dataset
        manifest, maps = load_coco_panoptic(json_path, png_dir)
        json2, png2 = save_coco_panoptic(manifest, maps, tmp_path / "again.json", tmp_path / "again")

        assert json_path.read_bytes() == json2.read_bytes()
        for png in sorted(png_dir.iterdir()):
            assert png.read_bytes() == (png2 / png.name).read_bytes()

    def test_status_survives(self, dataset, tmp_path):
        data, json_path, png_dir = dataset
        manifest, maps = load_coco_panoptic(json_path, png_dir)
        assert [c.id for c in manifest.categories.unknowns()] == [4, 5]
        assert manifest.categories[VOID].status == Status.VOID

    def test_void_entry_added(self, dataset):
        _, json_path, png_dir = dataset
        _edit_json(
            json_path,
            lambda d: d.update(categories=[c for c in d["categories"] if c["status"] != "void"]),
        )
        manifest, _ = load_coco_panoptic(json_path, png_dir)
        assert manifest.categories.void_id == VOID

    def test_empty_dataset(self, tmp_path):
        data = generate_synthetic_panoptic(SynthConfig(n_images=0))
        manifest = DatasetManifest(categories=data.categories)
        json_path, png_dir = save_coco_panoptic(
            manifest, {}, tmp_path / "empty.json", tmp_path / "empty"
        )
        loaded, maps = load_coco_panoptic(json_path, png_dir)
        assert len(loaded) == 0
        assert maps == {}

    def test_duplicate_image_ids(self):
        with pytest.raises(AnnotationError):
            DatasetManifest(images=[ImageEntry(1, 2, 2), ImageEntry(1, 2, 2)])


class TestLoadErrors:
    def test_missing_json(self, tmp_path):
        with pytest.raises(AnnotationError, match="Missing annotation"):
            load_coco_panoptic(tmp_path / "nope.json", tmp_path)

    def test_missing_png(self, dataset):
        _, json_path, png_dir = dataset
        next(png_dir.iterdir()).unlink()
        with pytest.raises(AnnotationError, match="Missing segment PNG"):
            load_coco_panoptic(json_path, png_dir)

    def test_missing_annotation(self, dataset):
        _, json_path, png_dir = dataset
        _edit_json(json_path, lambda d: d["annotations"].pop())
        with pytest.raises(AnnotationError, match="no annotation entry"):
            load_coco_panoptic(json_path, png_dir)

    def test_duplicate_segment(self, dataset):
        _, json_path, png_dir = dataset

        def _dup(d):
            info = d["annotations"][0]["segments_info"]
            info.append(dict(info[0]))

        _edit_json(json_path, _dup)
        with pytest.raises(AnnotationError, match="duplicate segment"):
            load_coco_panoptic(json_path, png_dir)

    def test_unknown_category(self, dataset):
        _, json_path, png_dir = dataset
        _edit_json(
            json_path, lambda d: d["annotations"][0]["segments_info"][0].update(category_id=99)
        )
        with pytest.raises(AnnotationError, match="unknown category"):
            load_coco_panoptic(json_path, png_dir)

    def test_orphan_png_ids(self, dataset):
        _, json_path, png_dir = dataset
        png = sorted(png_dir.iterdir())[0]
        rgb = np.array(Image.open(png))
        rgb[0, 0] = [7, 7, 7]
        Image.fromarray(rgb).save(png)
        with pytest.raises(AnnotationError, match="absent from segments_info"):
            load_coco_panoptic(json_path, png_dir)
