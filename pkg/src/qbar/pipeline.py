"""Per-creator detector: training, calibration and scoring of stored videos."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import peqad, persistence, scoring
from .errors import UncalibratedModel, UnknownCreator
from .features import FusedVector, ModalityEmbedding, ProjectionSpec, fit_to_qdim, fuse
from .statevector import AnsatzConfig, StateVector, amplitude_encode
from .synthgen import position_weights


@dataclass(frozen=True)
class ScoreRecord:
    s_quant: float
    s_dir: float
    z_quant: float
    z_dir: float
    s_final: float | None
    decision: str | None

    def as_dict(self) -> dict:
        return {"s_quant": self.s_quant, "s_dir": self.s_dir, "z_quant": self.z_quant,
                "z_dir": self.z_dir, "s_final": self.s_final, "decision": self.decision}


def pool_segments(segments: dict, segments_per_video: int) -> dict:
    w = position_weights(segments_per_video)
    out = {}
    for name, seg in segments.items():
        if seg.shape[0] > segments_per_video:
            raise ValueError(f"{name}: {seg.shape[0]} segments exceed {segments_per_video}")
        out[name] = w[: seg.shape[0]] @ seg
    return out


def fuse_segments(segments: dict, segments_per_video: int, modalities) -> FusedVector:
    pooled = pool_segments(segments, segments_per_video)
    return fuse([ModalityEmbedding(m, v) for m, v in pooled.items()], tuple(modalities))


def encode(fused, projection: ProjectionSpec | None, n_qubits: int = 12) -> StateVector:
    return amplitude_encode(fit_to_qdim(fused, projection, 1 << n_qubits))


@dataclass
class Detector:
    model: peqad.PeqadModel
    axis: scoring.MutationAxis
    normalizers: tuple
    decision: scoring.DecisionConfig | None
    modalities: tuple
    segments_per_video: int
    creator_id: str

    @property
    def calibrated(self) -> bool:
        return self.decision is not None

    def fuse(self, segments: dict) -> FusedVector:
        return fuse_segments(segments, self.segments_per_video, self.modalities)

    def raw_scores(self, fused) -> tuple[float, float]:
        values = np.asarray(getattr(fused, "values", fused), dtype=np.float64)
        psi = encode(values, self.model.projection, self.model.ansatz.n_qubits)
        return peqad.distance(self.model, psi), scoring.s_dir(values, self.axis)

    def score(self, fused, *, require_calibration: bool = True) -> ScoreRecord:
        sq, sd = self.raw_scores(fused)
        nq, nd = self.normalizers
        if self.decision is None:
            if require_calibration:
                raise UncalibratedModel(f"detector for {self.creator_id} has no (gamma, tau)")
            return ScoreRecord(sq, sd, nq.normalize(sq), nd.normalize(sd), None, None)
        sf = scoring.s_final(sq, sd, self.normalizers, self.decision.gamma)
        return ScoreRecord(sq, sd, nq.normalize(sq), nd.normalize(sd), sf,
                           scoring.classify(sf, self.decision))

    def score_file(self, path) -> ScoreRecord:
        return self.score(self.fuse(persistence.read_embedding(path).segments))


def load_fused(manifest: persistence.DatasetManifest, entries) -> list:
    modalities = tuple(manifest.modalities)
    return [fuse_segments(persistence.read_embedding(manifest.resolve(e["path"])).segments,
                          manifest.segments_per_video, modalities) for e in entries]


def projection_for(dim: int, seed: int, n_qubits: int) -> ProjectionSpec | None:
    out_dim = 1 << n_qubits
    return ProjectionSpec(seed, dim, out_dim) if dim > out_dim else None


def train_detector(manifest: persistence.DatasetManifest, creator_id: str,
                   train_config: peqad.TrainConfig, ansatz: AnsatzConfig = AnsatzConfig(),
                   shrinkage: float = scoring.DEFAULT_SHRINKAGE):
    """Train on the creator's train split; fit the axis and both normalizers."""
    if creator_id not in manifest.creator_ids:
        raise UnknownCreator(f"creator {creator_id!r} not in manifest")
    train_fused = load_fused(manifest, manifest.videos_for(creator_id, "train"))
    corpus_fused = load_fused(manifest, manifest.corpus_for(creator_id))
    dim = train_fused[0].dim
    projection = projection_for(dim, train_config.seed, ansatz.n_qubits)
    states = [encode(f, projection, ansatz.n_qubits) for f in train_fused]
    model, report = peqad.train(states, train_config, ansatz, projection)
    axis = scoring.fit_mutation_axis(train_fused, corpus_fused, shrinkage)
    quant = [peqad.distance(model, s) for s in states]
    direc = [scoring.s_dir(f, axis) for f in train_fused]
    detector = Detector(model, axis,
                        (scoring.fit_normalizer(quant), scoring.fit_normalizer(direc)),
                        None, tuple(manifest.modalities), manifest.segments_per_video,
                        creator_id)
    return detector, report


def split_scores(detector: Detector, manifest: persistence.DatasetManifest, split: str,
                 noise_sigma: float = 0.0, noise_seed: int = 0):
    """``(video_ids, labels, raw (s_quant, s_dir) pairs)`` for one split of the creator.

    Optional i.i.d. Gaussian noise is added to the fused vectors before
    dimension fitting.
    """
    entries = manifest.videos_for(detector.creator_id, split)
    fused = load_fused(manifest, entries)
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([noise_seed, int(round(noise_sigma * 1e6)),
                                *detector.creator_id.encode()])))
    raw = []
    for f in fused:
        values = f.values
        if noise_sigma > 0:
            values = values + noise_sigma * rng.standard_normal(values.size)
        raw.append(detector.raw_scores(values))
    ids = [e["id"] for e in entries]
    labels = [e["label"] != "normal" for e in entries]
    return ids, labels, raw


def calibrate_detector(detector: Detector, manifest: persistence.DatasetManifest,
                       gamma_grid=scoring.GAMMA_GRID) -> Detector:
    _, labels, raw = split_scores(detector, manifest, "validation")
    decision = scoring.calibrate([(q, d, y) for (q, d), y in zip(raw, labels)],
                                 detector.normalizers, gamma_grid)
    return replace(detector, decision=decision)


def final_scores(detector: Detector, raw, gamma: float | None = None) -> list:
    gamma = detector.decision.gamma if gamma is None else gamma
    return [scoring.s_final(q, d, detector.normalizers, gamma) for q, d in raw]


