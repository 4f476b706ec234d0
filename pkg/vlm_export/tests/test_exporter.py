"""Exporter unit tests: format writer, encoders, manifests, crops, oracle."""

import json

import numpy as np
import pytest

from vlm_export import (
    DegenerateBox,
    DeterministicEncoder,
    ExportManifest,
    ImageLoadFailure,
    ManifestError,
    ModelLoadFailure,
    export_text,
    export_union_crops,
    load_encoder,
    load_image,
    oracle_dump,
    read_embeddings,
    union_box,
    write_embeddings,
)


# ---------------------------------------------------------------- format ----


def test_format_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    vecs = rng.standard_normal((5, 7))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    path = tmp_path / "e.bin"
    labels = [f"row {i}" for i in range(5)]
    write_embeddings(path, labels, vecs, normalized=True)
    got_labels, got, normalized = read_embeddings(path)
    assert got_labels == labels
    assert normalized is True
    assert got.shape == (5, 7)
    assert np.abs(got - vecs).max() < 1e-6  # float32 on disk


@pytest.mark.parametrize(
    "labels, vecs",
    [
        (["a", "a"], np.eye(2)),                      # duplicate labels
        (["a"], np.array([[np.nan, 1.0]])),           # non-finite
        (["a"], np.zeros((1, 3))),                    # zero row
        (["a", "b"], np.eye(3)),                      # label/row mismatch
        (["a"], np.ones(4)),                          # not 2-D
    ],
)
def test_writer_rejects_invalid(tmp_path, labels, vecs):
    with pytest.raises(ManifestError):
        write_embeddings(tmp_path / "bad.bin", labels, vecs, normalized=False)


def test_writer_checks_normalized_flag(tmp_path):
    with pytest.raises(ManifestError, match="unit norm"):
        write_embeddings(tmp_path / "bad.bin", ["a"], np.array([[2.0, 0.0]]),
                         normalized=True)


# -------------------------------------------------------------- encoders ----


def test_deterministic_encoder_is_pure_function():
    enc = DeterministicEncoder(64)
    a = enc.encode_text(["a cat", "a dog"])
    b = DeterministicEncoder(64).encode_text(["a cat", "a dog"])
    assert np.array_equal(a, b)
    assert a.shape == (2, 64)
    assert np.abs(np.linalg.norm(a, axis=1) - 1.0).max() < 1e-12
    assert not np.array_equal(a[0], a[1])


def test_deterministic_encoder_images_depend_on_pixels():
    enc = DeterministicEncoder(32)
    rng = np.random.default_rng(0)
    img1 = rng.uniform(0, 255, (40, 30))
    img2 = rng.uniform(0, 255, (40, 30, 3))
    rows = enc.encode_images([img1, img2, img1])
    assert np.array_equal(rows[0], rows[2])
    assert not np.array_equal(rows[0], rows[1])


def test_load_encoder_registry():
    enc = load_encoder("deterministic:16")
    assert enc.dim == 16
    with pytest.raises(ModelLoadFailure):
        load_encoder("deterministic:not-a-number")
    with pytest.raises(ModelLoadFailure):
        load_encoder("unknown:whatever")
    with pytest.raises(ModelLoadFailure):
        load_encoder("deterministic:0")


# -------------------------------------------------------------- manifests ----


def test_manifest_requires_content(tmp_path):
    with pytest.raises(ManifestError):
        ExportManifest.from_dict({"model": "deterministic:8", "output": "o"})
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(ManifestError):
        ExportManifest.load(path)
    with pytest.raises(ManifestError):
        ExportManifest.from_dict({"prompts": ["a"]})  # missing model/output


# ------------------------------------------------------------ text export ----


def test_export_text_order_and_labels(tmp_path):
    out = tmp_path / "t.bin"
    prompts = ["zebra", "apple", "mango"]  # deliberately unsorted
    m = ExportManifest.from_dict({
        "model": "deterministic:24", "output": str(out), "prompts": prompts,
    })
    report = export_text(m)
    labels, vecs, normalized = read_embeddings(out)
    assert labels == prompts  # output order equals manifest input order
    assert normalized is True
    assert report["count"] == 3 and report["dim"] == 24


def test_export_text_rejects_duplicates(tmp_path):
    m = ExportManifest.from_dict({
        "model": "deterministic:8", "output": str(tmp_path / "t.bin"),
        "prompts": ["a", "b", "a"],
    })
    with pytest.raises(ManifestError, match="duplicate"):
        export_text(m)


def test_export_text_unnormalized_flag_is_truthful(tmp_path):
    out = tmp_path / "t.bin"
    m = ExportManifest.from_dict({
        "model": "deterministic:8", "output": str(out),
        "prompts": ["x"], "normalize": False,
    })
    export_text(m)
    _, vecs, normalized = read_embeddings(out)
    assert normalized is False
    # The deterministic encoder happens to emit unit rows either way.
    assert abs(np.linalg.norm(vecs[0]) - 1.0) < 1e-5


# ------------------------------------------------------------ crop export ----


def test_union_box_closed_form():
    rng = np.random.default_rng(11)
    for _ in range(100):
        pts = rng.uniform(0, 100, (2, 4))
        boxes = []
        for x1, y1, x2, y2 in pts:
            boxes.append((min(x1, x2), min(y1, y2),
                          min(x1, x2) + abs(x2 - x1) + 1.0,
                          min(y1, y2) + abs(y2 - y1) + 1.0))
        a, b = boxes
        u = union_box(a, b)
        assert u[0] == min(a[0], b[0])
        assert u[1] == min(a[1], b[1])
        assert u[2] == max(a[2], b[2])
        assert u[3] == max(a[3], b[3])
        # The union contains both boxes.
        for box in (a, b):
            assert u[0] <= box[0] and u[1] <= box[1]
            assert u[2] >= box[2] and u[3] >= box[3]


@pytest.fixture
def image_file(tmp_path):
    rng = np.random.default_rng(5)
    arr = rng.uniform(0, 255, (60, 80, 3))
    path = tmp_path / "scene.npy"
    np.save(path, arr)
    return path


def test_export_union_crops(tmp_path, image_file):
    out = tmp_path / "u.bin"
    m = ExportManifest.from_dict({
        "model": "deterministic:24", "output": str(out),
        "crops": [
            {"image": str(image_file), "subj_box": [0, 0, 20, 20],
             "obj_box": [30, 10, 50, 40]},
            {"image": str(image_file), "subj_box": [5, 5, 10, 10],
             "obj_box": [6, 6, 9, 9]},
        ],
    })
    report = export_union_crops(m)
    labels, vecs, normalized = read_embeddings(out)
    assert labels == ["scene.npy#0", "scene.npy#1"]
    assert normalized is True and vecs.shape == (2, 24)
    assert report["union_boxes"][0] == [0.0, 0.0, 50.0, 40.0]
    assert report["union_boxes"][1] == [5.0, 5.0, 10.0, 10.0]


@pytest.mark.parametrize(
    "subj",
    [
        [10, 10, 10, 20],       # zero width
        [10, 10, 90, 20],       # exceeds width 80
        [-1, 0, 10, 10],        # negative origin
        [0, 0, 10],             # malformed
        [0, 0, float("nan"), 5],
    ],
)
def test_export_rejects_bad_boxes(tmp_path, image_file, subj):
    m = ExportManifest.from_dict({
        "model": "deterministic:8", "output": str(tmp_path / "u.bin"),
        "crops": [{"image": str(image_file), "subj_box": subj,
                   "obj_box": [0, 0, 5, 5]}],
    })
    with pytest.raises(DegenerateBox):
        export_union_crops(m)


def test_export_rejects_missing_image(tmp_path):
    m = ExportManifest.from_dict({
        "model": "deterministic:8", "output": str(tmp_path / "u.bin"),
        "crops": [{"image": str(tmp_path / "nope.npy"),
                   "subj_box": [0, 0, 5, 5], "obj_box": [0, 0, 5, 5]}],
    })
    with pytest.raises(ImageLoadFailure):
        export_union_crops(m)


def test_load_image_png(tmp_path):
    from PIL import Image

    path = tmp_path / "img.png"
    Image.fromarray(np.uint8(np.arange(64).reshape(8, 8))).save(path)
    arr = load_image(path)
    assert arr.shape == (8, 8)
    assert arr[0, 1] == 1.0


# ----------------------------------------------------------------- oracle ----


def test_oracle_identical_and_orthogonal(tmp_path):
    t = tmp_path / "t.bin"
    i = tmp_path / "i.bin"
    v = np.eye(4)[:2]
    write_embeddings(t, ["p0", "p1"], v, normalized=True)
    write_embeddings(i, ["c0", "c1"], v, normalized=True)
    rows = oracle_dump(t, i, [("p0", "c0"), ("p0", "c1"), ("p1", "c1")])
    assert rows[0]["cosine"] == 1.0   # identical rows
    assert rows[1]["cosine"] == 0.0   # orthogonal rows
    assert rows[2]["cosine"] == 1.0


def test_oracle_unknown_label(tmp_path):
    t = tmp_path / "t.bin"
    write_embeddings(t, ["p0"], np.eye(2)[:1], normalized=True)
    with pytest.raises(ManifestError, match="not in"):
        oracle_dump(t, t, [("p0", "missing")])


# -------------------------------------------------------------------- CLI ----


def test_cli_round_trip(tmp_path, image_file):
    from click.testing import CliRunner

    from vlm_export.cli import main

    runner = CliRunner()
    t_manifest = tmp_path / "text.json"
    t_out = tmp_path / "t.bin"
    t_manifest.write_text(json.dumps({
        "model": "deterministic:16", "output": str(t_out),
        "prompts": ["a cat sitting on a mat"],
    }))
    res = runner.invoke(main, ["export-text", str(t_manifest)])
    assert res.exit_code == 0, res.output

    c_manifest = tmp_path / "crops.json"
    c_out = tmp_path / "u.bin"
    c_manifest.write_text(json.dumps({
        "model": "deterministic:16", "output": str(c_out),
        "crops": [{"image": str(image_file), "subj_box": [0, 0, 20, 20],
                   "obj_box": [10, 10, 40, 30]}],
    }))
    res = runner.invoke(main, ["export-crops", str(c_manifest)])
    assert res.exit_code == 0, res.output

    o_manifest = tmp_path / "oracle.json"
    o_out = tmp_path / "oracle_out.json"
    o_manifest.write_text(json.dumps({
        "text_file": str(t_out), "image_file": str(c_out),
        "pairs": [["a cat sitting on a mat", "scene.npy#0"]],
        "output": str(o_out),
    }))
    res = runner.invoke(main, ["oracle", str(o_manifest)])
    assert res.exit_code == 0, res.output
    doc = json.loads(o_out.read_text())
    assert -1.0 <= doc["pairs"][0]["cosine"] <= 1.0


def test_cli_error_reporting(tmp_path):
    from click.testing import CliRunner

    from vlm_export.cli import main

    manifest = tmp_path / "bad.json"
    manifest.write_text(json.dumps({
        "model": "deterministic:8", "output": str(tmp_path / "o.bin"),
        "prompts": ["a", "a"],
    }))
    runner = CliRunner()
    res = runner.invoke(main, ["export-text", str(manifest)])
    assert res.exit_code == 1
    assert "error kind=ManifestError" in res.output + str(res.stderr or "")
