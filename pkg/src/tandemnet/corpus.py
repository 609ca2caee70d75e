"""Corpus catalog, video-grouped fold assignment and the synthetic corpus.

A corpus is a manifest of keyframes: every record names its video, shot
index, image file and class label, plus the cross-validation fold of its
video (-1 until folds are assigned).  All frames of a video always share
one label and one fold.

The synthetic generator stands in for a real video corpus at desk scale:
two visually distinct pattern families (one per class) with per-video style
jitter and per-frame noise, so frames within a video correlate like shots
of one clip.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .imaging import save_ppm
from .labels import BENIGN, LABELS, PORN

UNASSIGNED_FOLD = -1

MANIFEST_FIELDS = ["video_id", "shot_index", "image_path", "label", "fold"]


@dataclass(frozen=True)
class FrameRecord:
    video_id: str
    shot_index: int
    image_path: str
    label: str
    fold: int = UNASSIGNED_FOLD


@dataclass
class Manifest:
    records: list[FrameRecord]
    fold_count: int = 5

    def __post_init__(self):
        validate_manifest(self)

    def videos(self) -> dict[str, str]:
        """video_id -> label, in first-appearance order."""
        out: dict[str, str] = {}
        for rec in self.records:
            out.setdefault(rec.video_id, rec.label)
        return out

    def fold_records(self, fold: int, held_out: bool) -> list[FrameRecord]:
        if held_out:
            return [r for r in self.records if r.fold == fold]
        return [r for r in self.records if r.fold != fold and r.fold != UNASSIGNED_FOLD]


def validate_manifest(manifest: Manifest) -> None:
    seen: set[tuple[str, int]] = set()
    per_video: dict[str, tuple[str, int]] = {}
    for rec in manifest.records:
        if rec.label not in LABELS:
            raise ValueError(f"record {rec.video_id}/{rec.shot_index}: bad label {rec.label!r}")
        if not (rec.fold == UNASSIGNED_FOLD or 0 <= rec.fold < manifest.fold_count):
            raise ValueError(
                f"record {rec.video_id}/{rec.shot_index}: fold {rec.fold} outside "
                f"0..{manifest.fold_count - 1}"
            )
        key = (rec.video_id, rec.shot_index)
        if key in seen:
            raise ValueError(f"duplicate frame {key} in manifest")
        seen.add(key)
        known = per_video.get(rec.video_id)
        if known is None:
            per_video[rec.video_id] = (rec.label, rec.fold)
        elif known != (rec.label, rec.fold):
            raise ValueError(
                f"video {rec.video_id!r} has inconsistent label/fold across its frames"
            )


def write_manifest(path, manifest: Manifest) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for rec in manifest.records:
            writer.writerow([rec.video_id, rec.shot_index, rec.image_path, rec.label, rec.fold])


def read_manifest(path, fold_count: int = 5) -> Manifest:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_FIELDS:
            raise ValueError(f"{path}: bad manifest header {header}")
        for row in reader:
            if len(row) != 5:
                raise ValueError(f"{path}: bad manifest row {row}")
            records.append(
                FrameRecord(row[0], int(row[1]), row[2], row[3], int(row[4]))
            )
    return Manifest(records, fold_count)


# ---------------------------------------------------------------------------
# folds


def resolve_image_paths(records: list[FrameRecord], base_dir) -> list[FrameRecord]:
    """Records with image paths resolved against the manifest's directory."""
    base = Path(base_dir)
    return [replace(r, image_path=str(base / r.image_path)) for r in records]


def make_folds(video_labels: dict[str, str], k: int = 5, seed: int = 0) -> dict[str, int]:
    """Stratified video-grouped fold assignment.

    Videos are shuffled per class (seeded) and dealt round-robin, so within
    each class the per-fold counts differ by at most one.
    """
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if len(video_labels) < k:
        raise ValueError(f"need at least {k} videos for {k} folds, got {len(video_labels)}")
    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    for label in LABELS:
        members = [v for v, l in video_labels.items() if l == label]
        order = rng.permutation(len(members))
        for pos, idx in enumerate(order):
            assignment[members[idx]] = pos % k
    unknown = set(video_labels.values()) - set(LABELS)
    if unknown:
        raise ValueError(f"unknown labels in fold input: {sorted(unknown)}")
    return assignment


def assign_folds(manifest: Manifest, k: int = 5, seed: int = 0) -> Manifest:
    folds = make_folds(manifest.videos(), k, seed)
    records = [replace(rec, fold=folds[rec.video_id]) for rec in manifest.records]
    return Manifest(records, fold_count=k)


# ---------------------------------------------------------------------------
# synthetic corpus


def synth_generate(
    out_dir,
    videos_per_class: int,
    shots_per_video: int,
    side: int = 74,
    seed: int = 0,
) -> Manifest:
    """Write a deterministic two-class corpus of PPM keyframes under out_dir.

    Class "benign" videos show smooth low-frequency waves on a darker base;
    class "porn" videos show high-frequency checker texture on a brighter
    base.  Each video carries its own style (base level, frequency, tint)
    and each frame adds phase drift plus pixel noise, so frames within a
    video correlate more than frames across videos.
    """
    if videos_per_class < 1 or shots_per_video < 1:
        raise ValueError("need at least one video per class and one shot per video")
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    try:
        frames_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ValueError(f"cannot create output directory {frames_dir}: {err}") from None

    root = np.random.SeedSequence(seed)
    video_seeds = root.spawn(2 * videos_per_class)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)

    records = []
    for c, label in enumerate(LABELS):
        for v in range(videos_per_class):
            rng = np.random.default_rng(video_seeds[c * videos_per_class + v])
            video_id = f"{label}{v:03d}"
            style = _video_style(rng, label)
            for shot in range(shots_per_video):
                img = _render_frame(rng, label, style, shot, yy, xx)
                rel = f"frames/{video_id}_{shot:03d}.ppm"
                save_ppm(out_dir / rel, img)
                records.append(FrameRecord(video_id, shot, rel, label))
    return Manifest(records)


def _video_style(rng, label):
    tint = rng.normal(0.0, 6.0, size=3)
    if label == BENIGN:
        return {
            "base": 105.0 + rng.normal(0.0, 14.0),
            "freq": rng.uniform(1.0, 2.5),
            "angle": rng.uniform(0.0, np.pi),
            "tint": tint,
        }
    return {
        "base": 150.0 + rng.normal(0.0, 14.0),
        "cell": rng.integers(3, 7),
        "angle": rng.uniform(0.0, np.pi),
        "tint": tint,
    }


def _render_frame(rng, label, style, shot, yy, xx):
    side = yy.shape[0]
    phase = 0.9 * shot + rng.normal(0.0, 0.15)
    if label == BENIGN:
        axis = np.cos(style["angle"]) * xx + np.sin(style["angle"]) * yy
        pattern = 35.0 * np.sin(2.0 * np.pi * style["freq"] * axis / side + phase)
    else:
        cell = int(style["cell"])
        shift = int(shot + round(phase))
        checker = ((xx.astype(int) + shift) // cell + yy.astype(int) // cell) % 2
        pattern = 30.0 * (2.0 * checker - 1.0)
    base = style["base"] + 4.0 * np.sin(phase)
    img = base + pattern[None, :, :] + style["tint"][:, None, None]
    img = img + rng.normal(0.0, 6.0, size=(3, side, side))
    return np.rint(np.clip(img, 0.0, 255.0))
