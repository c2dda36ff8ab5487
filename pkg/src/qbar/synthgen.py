"""Feature-level synthetic creators, videos and the two mutation attacks.

A creator is a Gaussian per modality around a creator mean. A video is K
time-ordered segments per modality, pooled with decaying position weights so
that reordering segments changes the pooled vector. Every random draw comes
from a PCG64 stream keyed on ``(seed, identifiers)``, so regenerating
anything yields identical bits.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .features import MODALITIES, ModalityEmbedding

DEFAULT_DIMS = {"text": 32, "audio": 16, "visual": 32, "meta": 8}

# stream tags for the per-video generators
_NORMAL, _SPLICE, _INJECT, _SENSATIONAL = 0, 1, 2, 3

LABELS = ("normal", "splice", "inject")


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def position_weights(k: int) -> np.ndarray:
    w = np.exp(-np.arange(k) / k)
    return w / w.sum()


def true_axis(axis_seed: int, dim: int) -> np.ndarray:
    """Ground-truth unit 'sensational' direction in text-embedding space."""
    v = _rng(axis_seed, 0xA715).standard_normal(dim)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class CreatorProfile:
    creator_id: str
    seed: int
    means: dict
    stds: dict
    segments_per_video: int = 12

    def __post_init__(self):
        if self.segments_per_video < 2:
            raise ValueError("segments_per_video must be >= 2")
        if any(s <= 0 for s in self.stds.values()):
            raise ValueError("modality std must be > 0")

    @property
    def dims(self) -> dict:
        return {m: int(v.size) for m, v in self.means.items()}

    @property
    def weights(self) -> np.ndarray:
        return position_weights(self.segments_per_video)


@dataclass(frozen=True)
class SyntheticVideo:
    creator_id: str
    index: int
    segments: dict
    label: str = "normal"
    segments_per_video: int = 12

    @property
    def weights(self) -> np.ndarray:
        return position_weights(self.segments_per_video)

    def pooled(self) -> dict:
        """Position-weighted pooling; truncated videos keep the leading weights."""
        w = self.weights
        return {m: w[: seg.shape[0]] @ seg for m, seg in self.segments.items()}

    def embeddings(self) -> list:
        return [ModalityEmbedding(m, v) for m, v in self.pooled().items()]


@dataclass(frozen=True)
class MutationSpec:
    kind: str
    seed: int = 0
    permute: bool = True
    delete_fraction: float = 0.0
    strength: float = 0.0
    axis_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("splice", "inject"):
            raise ValueError(f"unknown mutation kind {self.kind!r}")
        if not 0.0 <= self.delete_fraction <= 0.5:
            raise ValueError("delete_fraction must lie in [0, 0.5]")
        if self.strength < 0:
            raise ValueError("strength must be >= 0")

    @classmethod
    def splice(cls, seed=0, permute=True, delete_fraction=0.25):
        return cls("splice", seed=seed, permute=permute, delete_fraction=delete_fraction)

    @classmethod
    def inject(cls, seed=0, strength=2.0, axis_seed=0):
        return cls("inject", seed=seed, strength=strength, axis_seed=axis_seed)


def _profile_seed(global_seed: int, creator_index: int) -> int:
    words = np.random.SeedSequence([global_seed, creator_index]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def gen_creator(global_seed: int, creator_index: int, dims=None, *, sigma=0.5,
                prior_scale=3.0, segments_per_video=12) -> CreatorProfile:
    dims = dict(DEFAULT_DIMS if dims is None else dims)
    if any(d < 2 for d in dims.values()):
        raise ValueError(f"every modality needs dim >= 2, got {dims}")
    seed = _profile_seed(global_seed, creator_index)
    rng = _rng(seed, 0x9E37)
    means = {m: prior_scale * rng.standard_normal(dims[m]) for m in MODALITIES if m in dims}
    return CreatorProfile(
        creator_id=f"c{creator_index:03d}",
        seed=seed,
        means=means,
        stds={m: float(sigma) for m in means},
        segments_per_video=segments_per_video,
    )


def _draw_segments(profile: CreatorProfile, rng) -> dict:
    k = profile.segments_per_video
    return {
        m: mu + profile.stds[m] * rng.standard_normal((k, mu.size))
        for m, mu in profile.means.items()
    }


def sample_video(profile: CreatorProfile, index: int) -> SyntheticVideo:
    rng = _rng(profile.seed, _NORMAL, index)
    return SyntheticVideo(profile.creator_id, index, _draw_segments(profile, rng),
                          "normal", profile.segments_per_video)


def mutate_splice(video: SyntheticVideo, spec: MutationSpec) -> SyntheticVideo:
    """Reorder segments (same permutation for every modality) and drop the tail."""
    if spec.kind != "splice":
        raise ValueError("mutate_splice needs a splice spec")
    k = next(iter(video.segments.values())).shape[0]
    rng = _rng(spec.seed, _SPLICE, video.index)
    order = rng.permutation(k) if spec.permute else np.arange(k)
    keep = order[: k - math.ceil(spec.delete_fraction * k)]
    segments = {m: seg[keep].copy() for m, seg in video.segments.items()}
    return replace(video, segments=segments, label="splice")


def mutate_inject(video: SyntheticVideo, spec: MutationSpec,
                  profile: CreatorProfile) -> SyntheticVideo:
    """Replace a quarter of the text segments with draws shifted along the true axis."""
    if spec.kind != "inject":
        raise ValueError("mutate_inject needs an inject spec")
    text = video.segments["text"]
    k, dim = text.shape
    rng = _rng(spec.seed, _INJECT, video.index)
    rows = np.sort(rng.choice(k, size=math.ceil(k / 4), replace=False))
    sigma = profile.stds["text"]
    shift = profile.means["text"] + spec.strength * sigma * true_axis(spec.axis_seed, dim)
    new_text = text.copy()
    new_text[rows] = shift + sigma * rng.standard_normal((rows.size, dim))
    segments = dict(video.segments)
    segments["text"] = new_text
    return replace(video, segments=segments, label="inject")


def sensational_sample(profile: CreatorProfile, j: int, strength: float,
                       axis_seed: int) -> SyntheticVideo:
    """Held-out 'rumor' rewrite: every text segment shifted along the true axis."""
    rng = _rng(profile.seed, _SENSATIONAL, j)
    segments = _draw_segments(profile, rng)
    dim = segments["text"].shape[1]
    segments["text"] = segments["text"] + strength * profile.stds["text"] * true_axis(axis_seed, dim)
    return SyntheticVideo(profile.creator_id, j, segments, "inject", profile.segments_per_video)


@dataclass(frozen=True)
class DatasetPreset:
    creators: int = 20
    normals_per_creator: int = 20
    splice_per_creator: int = 4
    inject_per_creator: int = 4
    dims: dict = field(default_factory=lambda: dict(DEFAULT_DIMS))
    segments_per_video: int = 12
    sigma: float = 0.5
    inject_strength: float = 2.0
    splice_permute: bool = True
    splice_delete_fraction: float = 0.25
    sensational_per_creator: int = 20
    sensational_strength: float = 4.0
    axis_seed: int = 7
    train_fraction: float = 0.7
    validation_fraction: float = 0.1

    def split_counts(self) -> tuple[int, int, int]:
        n = self.normals_per_creator
        n_train = int(round(self.train_fraction * n))
        n_val = int(round(self.validation_fraction * n))
        return n_train, n_val, n - n_train - n_val


@dataclass
class VideoRecord:
    video: SyntheticVideo
    video_id: str
    split: str


def creator_videos(preset: DatasetPreset, seed: int, creator_index: int):
    """All videos of one creator in temporal order, plus its sensational corpus.

    Temporal layout: train normals, validation normals, validation mutants,
    test normals, test mutants. Mutants are built from fresh source videos at
    their own index.
    """
    profile = gen_creator(seed, creator_index, preset.dims, sigma=preset.sigma,
                          segments_per_video=preset.segments_per_video)
    n_train, n_val, n_test = preset.split_counts()
    splice = MutationSpec.splice(seed=profile.seed, permute=preset.splice_permute,
                                 delete_fraction=preset.splice_delete_fraction)
    inject = MutationSpec.inject(seed=profile.seed, strength=preset.inject_strength,
                                 axis_seed=preset.axis_seed)

    def mutant(kind, index):
        src = sample_video(profile, index)
        if kind == "splice":
            return mutate_splice(src, splice)
        return mutate_inject(src, inject, profile)

    val_kinds = [("splice", "inject")[i % 2] for i in range(n_val)]
    test_kinds = ["splice"] * preset.splice_per_creator + ["inject"] * preset.inject_per_creator
    plan = ([("normal", "train")] * n_train + [("normal", "validation")] * n_val
            + [(k, "validation") for k in val_kinds] + [("normal", "test")] * n_test
            + [(k, "test") for k in test_kinds])
    records = []
    for index, (kind, split) in enumerate(plan):
        video = sample_video(profile, index) if kind == "normal" else mutant(kind, index)
        records.append(VideoRecord(video, f"{profile.creator_id}_v{index:03d}", split))
    corpus = [sensational_sample(profile, j, preset.sensational_strength, preset.axis_seed)
              for j in range(preset.sensational_per_creator)]
    return profile, records, corpus


@dataclass
class GenResult:
    manifest_path: Path
    manifest: object
    changed: bool


def gen_dataset(preset: DatasetPreset, seed: int, out_dir) -> GenResult:
    """Write embeddings and ``manifest.json`` under ``out_dir``.

    ``changed`` is False when every file already held identical bytes.
    """
    from . import persistence

    out_dir = Path(out_dir)
    changed = False
    creators, videos, corpus_entries = [], [], []
    for ci in range(preset.creators):
        profile, records, corpus = creator_videos(preset, seed, ci)
        creators.append({"id": profile.creator_id, "profile_seed": profile.seed})
        for rec in records:
            rel = f"embeddings/{profile.creator_id}/{rec.video_id}.qbe"
            changed |= persistence.write_embedding(out_dir / rel, rec.video.segments)
            videos.append({
                "id": rec.video_id,
                "creator_id": profile.creator_id,
                "index": rec.video.index,
                "label": rec.video.label,
                "split": rec.split,
                "path": rel,
            })
        for j, sample in enumerate(corpus):
            rel = f"sensational/{profile.creator_id}/s{j:03d}.qbe"
            changed |= persistence.write_embedding(out_dir / rel, sample.segments)
            corpus_entries.append({"creator_id": profile.creator_id, "path": rel})
    manifest = persistence.DatasetManifest(
        seed=seed,
        modalities={m: preset.dims[m] for m in MODALITIES if m in preset.dims},
        segments_per_video=preset.segments_per_video,
        creators=creators,
        videos=videos,
        sensational_corpus=corpus_entries,
        generator=preset_to_dict(preset),
        root=out_dir,
    )
    path = out_dir / "manifest.json"
    changed |= persistence.write_bytes(path, persistence.dump_json(manifest.to_dict()))
    return GenResult(path, manifest, changed)


def preset_to_dict(preset: DatasetPreset) -> dict:
    return asdict(preset)
