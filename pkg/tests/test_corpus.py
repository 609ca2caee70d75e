import hashlib
from pathlib import Path

import numpy as np
import pytest

from tandemnet.corpus import (
    FrameRecord,
    Manifest,
    assign_folds,
    make_folds,
    read_manifest,
    synth_generate,
    write_manifest,
)
from tandemnet.imaging import load_ppm
from tandemnet.labels import BENIGN, PORN


def _records(n_videos=4, shots=3, label_of=lambda i: BENIGN if i % 2 == 0 else PORN):
    recs = []
    for v in range(n_videos):
        for s in range(shots):
            recs.append(FrameRecord(f"vid{v}", s, f"frames/vid{v}_{s}.ppm", label_of(v)))
    return recs


# ---------------------------------------------------------------------------
# manifest


def test_manifest_round_trip(tmp_path):
    manifest = Manifest(_records())
    path = tmp_path / "manifest.csv"
    write_manifest(path, manifest)
    loaded = read_manifest(path)
    assert loaded.records == manifest.records
    assert loaded.fold_count == manifest.fold_count


def test_manifest_uses_lf_line_endings(tmp_path):
    path = tmp_path / "manifest.csv"
    write_manifest(path, Manifest(_records()))
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.startswith(b"video_id,shot_index,image_path,label,fold\n")


def test_duplicate_frame_rejected():
    recs = _records()
    with pytest.raises(ValueError, match="duplicate"):
        Manifest(recs + [recs[0]])


def test_inconsistent_video_label_rejected():
    recs = _records() + [FrameRecord("vid0", 99, "x.ppm", PORN)]
    with pytest.raises(ValueError, match="inconsistent"):
        Manifest(recs)


def test_bad_label_rejected():
    with pytest.raises(ValueError, match="label"):
        Manifest([FrameRecord("v", 0, "x.ppm", "spam")])


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("video,shot\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        read_manifest(path)


# ---------------------------------------------------------------------------
# folds


def test_ten_videos_five_folds_one_per_class_each():
    labels = {f"b{i}": BENIGN for i in range(5)} | {f"p{i}": PORN for i in range(5)}
    folds = make_folds(labels, k=5, seed=1)
    for f in range(5):
        members = [v for v, fold in folds.items() if fold == f]
        assert len(members) == 2
        assert {labels[v] for v in members} == {BENIGN, PORN}


def test_folds_partition_all_videos():
    rng = np.random.default_rng(2)
    labels = {f"v{i}": (BENIGN if rng.random() < 0.5 else PORN) for i in range(37)}
    folds = make_folds(labels, k=5, seed=3)
    assert set(folds) == set(labels)
    assert set(folds.values()) <= set(range(5))
    for label in (BENIGN, PORN):
        counts = [sum(1 for v in folds if folds[v] == f and labels[v] == label) for f in range(5)]
        assert max(counts) - min(counts) <= 1


def test_800_videos_give_160_per_fold():
    labels = {f"b{i}": BENIGN for i in range(400)} | {f"p{i}": PORN for i in range(400)}
    folds = make_folds(labels, k=5, seed=0)
    for f in range(5):
        assert sum(1 for v in folds.values() if v == f) == 160


def test_fewer_videos_than_folds_rejected():
    with pytest.raises(ValueError):
        make_folds({"a": BENIGN, "b": PORN}, k=5, seed=0)


def test_assign_folds_keeps_frames_with_their_video():
    manifest = assign_folds(Manifest(_records(n_videos=10, shots=4)), k=5, seed=7)
    per_video = {}
    for rec in manifest.records:
        per_video.setdefault(rec.video_id, set()).add(rec.fold)
    assert all(len(folds) == 1 for folds in per_video.values())
    assert set().union(*per_video.values()) == set(range(5))


def test_assign_folds_deterministic():
    manifest = Manifest(_records(n_videos=10, shots=2))
    a = assign_folds(manifest, k=5, seed=9)
    b = assign_folds(manifest, k=5, seed=9)
    assert a.records == b.records


# ---------------------------------------------------------------------------
# synthetic corpus


def _tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            h.update(path.relative_to(root).as_posix().encode())
            h.update(path.read_bytes())
    return h.hexdigest()


def test_synth_same_seed_is_bitwise_identical(tmp_path):
    m1 = synth_generate(tmp_path / "a", videos_per_class=3, shots_per_video=2, side=16, seed=5)
    m2 = synth_generate(tmp_path / "b", videos_per_class=3, shots_per_video=2, side=16, seed=5)
    assert m1.records == m2.records
    assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")


def test_synth_different_seed_differs(tmp_path):
    synth_generate(tmp_path / "a", 2, 2, side=16, seed=1)
    synth_generate(tmp_path / "b", 2, 2, side=16, seed=2)
    assert _tree_digest(tmp_path / "a") != _tree_digest(tmp_path / "b")


def test_synth_record_count(tmp_path):
    manifest = synth_generate(tmp_path, videos_per_class=10, shots_per_video=5, side=12, seed=0)
    assert len(manifest.records) == 100
    assert sum(1 for r in manifest.records if r.label == BENIGN) == 50


def test_synth_classes_separable_by_pixel_mean(tmp_path):
    manifest = synth_generate(tmp_path, videos_per_class=12, shots_per_video=4, side=24, seed=3)
    means, labels = [], []
    for rec in manifest.records:
        means.append(float(load_ppm(tmp_path / rec.image_path).mean()))
        labels.append(rec.label)
    means = np.array(means)
    benign = means[[l == BENIGN for l in labels]]
    porn = means[[l == PORN for l in labels]]
    threshold = (benign.mean() + porn.mean()) / 2
    correct = np.sum(benign < threshold) + np.sum(porn >= threshold)
    assert correct / len(means) > 0.70


def test_synth_rejects_bad_counts(tmp_path):
    with pytest.raises(ValueError):
        synth_generate(tmp_path, 0, 3, side=8, seed=0)
