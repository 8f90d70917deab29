import json
import numpy as np
import pytest
from PIL import Image

from openpan.cli import main
from openpan.datasets import load_coco_panoptic, read_pseudo_labels
from openpan.fusion import encode_rle


def run(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    out, err = capsys.readouterr()
    return exc.value.code, out, err


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(
        "\n".join(
            [
                "synth.n_images = 4",
                "synth.n_planted_classes = 3",
                "synth.points_per_class = 60",
                "synth.feature_dim = 32",
                "synth.erosion_prob = 0.3",
                "synth.flip_prob = 0.2",
                "engine.k_clusters = 8",
                "engine.cluster_interval_steps = 5",
                "engine.top_cluster_fraction = 0.5",
            ]
        )
    )
    return path


@pytest.fixture
def synth_panoptic(tmp_path, small_config, capsys):
    out = tmp_path / "synth"
    code, _, _ = run(
        ["synth", "panoptic", "--out", str(out), "--config", str(small_config), "--seed", "3"],
        capsys,
    )
    assert code == 0
    return out


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        code, _, err = run(["frobnicate"], capsys)
        assert code == 2
        assert "error: usage:" in err

    def test_missing_required_flag(self, capsys):
        code, _, err = run(["evaluate", "--gt", "x.json"], capsys)
        assert code == 2
        assert "--pred" in err


class TestEvaluate:
    def test_matches_expected_report(self, synth_panoptic, tmp_path, capsys):
        out = tmp_path / "eval"
        code, stdout, _ = run(
            [
                "evaluate",
                "--gt",
                str(synth_panoptic / "gt.json"),
                "--pred",
                str(synth_panoptic / "pred.json"),
                "--out",
                str(out),
            ],
            capsys,
        )
        assert code == 0
        assert "All-Known" in stdout

        report = json.loads((out / "report.json").read_text())
        expected = json.loads((synth_panoptic / "expected_report.json").read_text())
        assert report == expected

        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["command"] == "evaluate"
        assert len(manifest["inputs"]["gt"]["sha256"]) == 64
        assert (out / "report.txt").read_text().startswith(stdout.splitlines()[0])

    def test_missing_file_is_an_error_line(self, tmp_path, capsys):
        code, _, err = run(
            ["evaluate", "--gt", str(tmp_path / "gt.json"), "--pred", str(tmp_path / "p.json")],
            capsys,
        )
        assert code == 1
        assert err.strip().splitlines()[-1].startswith("error: AnnotationError:")

    def test_report_command(self, synth_panoptic, capsys):
        code, stdout, _ = run(
            [
                "report",
                "--report_json",
                str(synth_panoptic / "expected_report.json"),
                "--categories",
                str(synth_panoptic / "gt.json"),
            ],
            capsys,
        )
        assert code == 0
        assert "Unknown" in stdout


class TestBuildSplit:
    def test_custom_split(self, synth_panoptic, tmp_path, capsys):
        split = tmp_path / "dogs.json"
        split.write_text(json.dumps({"name": "dogs", "unknown_class_names": ["dog"]}))
        out = tmp_path / "split"
        code, _, _ = run(
            [
                "build-split",
                "--src",
                str(synth_panoptic / "gt.json"),
                "--split",
                str(split),
                "--out",
                str(out),
            ],
            capsys,
        )
        assert code == 0

        manifest, maps = load_coco_panoptic(out / "panoptic.json", out / "panoptic")
        assert manifest.split_name == "dogs-train"
        dog = manifest.categories.by_name("dog").id
        assert not any(
            s.category_id == dog for m in maps.values() for s in m.segments.values()
        )

    def test_missing_class(self, synth_panoptic, tmp_path, capsys):
        code, _, err = run(
            [
                "build-split",
                "--src",
                str(synth_panoptic / "gt.json"),
                "--split",
                "5",
                "--out",
                str(tmp_path / "split"),
            ],
            capsys,
        )
        assert code == 1
        assert "error: SplitError:" in err


class TestDiscover:
    def test_synthetic_run(self, tmp_path, small_config, capsys):
        synth = tmp_path / "features"
        code, _, _ = run(
            ["synth", "features", "--out", str(synth), "--config", str(small_config)],
            capsys,
        )
        assert code == 0
        assert (synth / "features.opsf").is_file()

        out = tmp_path / "discover"
        code, stdout, _ = run(
            [
                "discover",
                "--features",
                str(synth / "features.opsf"),
                "--assignments",
                str(synth / "assignments.csv"),
                "--provider",
                str(synth / "features.opsf"),
                "--config",
                str(small_config),
                "--out",
                str(out),
            ],
            capsys,
        )
        assert code == 0

        summary = json.loads((out / "summary.json").read_text())
        assert json.loads(stdout.strip().splitlines()[-1]) == summary
        assert {"classes", "exemplars", "recovered", "min_purity"} <= set(summary)
        labels = read_pseudo_labels(out / "pseudo_labels.csv")
        assert len(labels) == summary["exemplars"]

    def test_bad_feature_file(self, tmp_path, capsys):
        path = tmp_path / "junk.opsf"
        path.write_bytes(b"junk")
        code, _, err = run(
            ["discover", "--features", str(path), "--out", str(tmp_path / "d")], capsys
        )
        assert code == 1
        assert "error: FeatureFileError:" in err


class TestFuse:
    def test_fuse(self, synth_panoptic, tmp_path, capsys):
        semantic_dir = tmp_path / "semantic"
        semantic_dir.mkdir()
        semantic = np.full((16, 16), 6, dtype=np.uint8)
        Image.fromarray(semantic).save(semantic_dir / "1.png")

        known = np.zeros((16, 16), dtype=bool)
        known[:8, :8] = True
        unknown = np.zeros((16, 16), dtype=bool)
        unknown[8:, 8:] = True
        instances = tmp_path / "instances.json"
        instances.write_text(
            json.dumps(
                [
                    {"image_id": 1, "segmentation": encode_rle(known), "category_id": 1, "score": 0.9},
                    {
                        "image_id": 1,
                        "segmentation": encode_rle(unknown),
                        "category_id": 4,
                        "score": 0.8,
                        "unknown": True,
                    },
                ]
            )
        )
        config = tmp_path / "fuse.cfg"
        config.write_text("fusion.stuff_area_min = 16\nfusion.unknown_on_stuff = True\n")

        out = tmp_path / "fused"
        code, _, _ = run(
            [
                "fuse",
                "--instances",
                str(instances),
                "--semantic_dir",
                str(semantic_dir),
                "--categories",
                str(synth_panoptic / "gt.json"),
                "--config",
                str(config),
                "--out",
                str(out),
            ],
            capsys,
        )
        assert code == 0

        manifest, maps = load_coco_panoptic(out / "panoptic.json", out / "panoptic")
        areas = {s.category_id: s.area for s in maps[1].segments.values()}
        assert areas == {1: 64, 6: 128, 4: 64}
        assert manifest.split_name == "fused"
