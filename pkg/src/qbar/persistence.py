"""On-disk formats: embedding files, dataset manifests, model checkpoints.

Embedding file (``.qbe``), all integers unsigned 32-bit little-endian::

    b"QBAR" | version | modality_count
    repeat modality_count times:
        name_len | name (UTF-8) | K | dim | K*dim float32 LE, row-major

Checkpoint: ``<name>.json`` header plus ``<name>.bin`` payload::

    b"QBCK" | version | n_theta | n_amp | dim
    theta   n_theta float64
    center  n_amp pairs (re, im) float64
    w_mut, mean_normal, mean_sensational   dim float64 each

Every reader validates before building any object, and every writer is
deterministic, so rerunning a command reproduces identical bytes.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    CorruptPayload,
    FormatError,
    IoFailure,
    MissingFile,
    NonFiniteValue,
    SchemaViolation,
    TemporalLeak,
    TruncatedFile,
    UnsupportedVersion,
    VersionMismatch,
)

EMBEDDING_MAGIC = b"QBAR"
EMBEDDING_VERSION = 1
MANIFEST_SCHEMA = 1
CHECKPOINT_MAGIC = b"QBCK"
CHECKPOINT_VERSION = 1

LABELS = ("normal", "splice", "inject")
SPLITS = ("train", "validation", "test")


def write_bytes(path, data: bytes) -> bool:
    """Write ``data`` unless the file already holds exactly these bytes.

    Returns True when the file was (re)written.
    """
    path = Path(path)
    try:
        if path.is_file() and path.read_bytes() == data:
            return False
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from exc
    return True


def _read(path) -> bytes:
    path = Path(path)
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise MissingFile(f"no such file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc


# --- embeddings -----------------------------------------------------------

@dataclass
class EmbeddingFile:
    segments: dict
    version: int = EMBEDDING_VERSION


def encode_embedding(segments) -> bytes:
    parts = [EMBEDDING_MAGIC, struct.pack("<II", EMBEDDING_VERSION, len(segments))]
    for name, values in segments.items():
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise ValueError(f"{name}: segments must be a K x dim matrix")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"{name}: non-finite values")
        f32 = arr.astype("<f4")
        if not np.all(np.isfinite(f32)):
            raise NonFiniteValue(f"{name}: values overflow float32")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<II", *arr.shape))
        parts.append(f32.tobytes(order="C"))
    return b"".join(parts)


def decode_embedding(data: bytes, source="<bytes>") -> EmbeddingFile:
    if len(data) < 12:
        raise TruncatedFile(f"{source}: header needs 12 bytes, got {len(data)}")
    if data[:4] != EMBEDDING_MAGIC:
        raise BadMagic(f"{source}: magic {data[:4]!r} != {EMBEDDING_MAGIC!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != EMBEDDING_VERSION:
        raise UnsupportedVersion(f"{source}: version {version}")
    pos = 12
    segments = {}

    def need(n, what):
        if pos + n > len(data):
            raise TruncatedFile(f"{source}: {what} needs {n} bytes, {len(data) - pos} remain")

    for _ in range(count):
        need(4, "name length")
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        need(name_len, "name")
        try:
            name = data[pos:pos + name_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptPayload(f"{source}: bad modality name") from exc
        pos += name_len
        need(8, "shape")
        k, dim = struct.unpack_from("<II", data, pos)
        pos += 8
        nbytes = 4 * k * dim
        need(nbytes, f"{name} payload")
        values = np.frombuffer(data, dtype="<f4", count=k * dim, offset=pos).reshape(k, dim)
        pos += nbytes
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue(f"{source}: {name} has non-finite values")
        if name in segments:
            raise CorruptPayload(f"{source}: duplicate modality {name!r}")
        segments[name] = values.astype(np.float64)
    if pos != len(data):
        raise CorruptPayload(f"{source}: {len(data) - pos} trailing bytes")
    return EmbeddingFile(segments, version)


def write_embedding(path, segments) -> bool:
    return write_bytes(path, encode_embedding(segments))


def read_embedding(path) -> EmbeddingFile:
    return decode_embedding(_read(path), str(path))


# --- JSON helpers ---------------------------------------------------------

def _float_out(x: float):
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


def _float_in(x) -> float:
    return float(x)


def dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n").encode("utf-8")


def _load_json(path):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON ({exc})") from None


# --- manifest -------------------------------------------------------------

@dataclass
class DatasetManifest:
    seed: int
    modalities: dict
    segments_per_video: int
    creators: list
    videos: list
    sensational_corpus: list = field(default_factory=list)
    generator: dict = field(default_factory=dict)
    schema_version: int = MANIFEST_SCHEMA
    root: Path = field(default=Path("."), compare=False)

    @property
    def creator_ids(self) -> list:
        return [c["id"] for c in self.creators]

    def videos_for(self, creator_id: str, split: str | None = None) -> list:
        return [v for v in self.videos
                if v["creator_id"] == creator_id and (split is None or v["split"] == split)]

    def corpus_for(self, creator_id: str) -> list:
        own = [e for e in self.sensational_corpus if e.get("creator_id") == creator_id]
        return own or [e for e in self.sensational_corpus if e.get("creator_id") is None]

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "modalities": self.modalities,
            "segments_per_video": self.segments_per_video,
            "creators": self.creators,
            "videos": self.videos,
            "sensational_corpus": self.sensational_corpus,
            "generator": self.generator,
        }


def save_manifest(manifest: DatasetManifest, path) -> Path:
    write_bytes(path, dump_json(manifest.to_dict()))
    return Path(path)


_REQUIRED = ("schema_version", "seed", "modalities", "segments_per_video", "creators", "videos")


def load_manifest(path, *, check_files: bool = True) -> DatasetManifest:
    path = Path(path)
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise SchemaViolation(f"{path}: top level must be an object")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise SchemaViolation(f"{path}: missing keys {missing}")
    if doc["schema_version"] != MANIFEST_SCHEMA:
        raise SchemaViolation(f"{path}: schema_version {doc['schema_version']} unsupported")
    manifest = DatasetManifest(
        seed=doc["seed"],
        modalities=doc["modalities"],
        segments_per_video=doc["segments_per_video"],
        creators=doc["creators"],
        videos=doc["videos"],
        sensational_corpus=doc.get("sensational_corpus", []),
        generator=doc.get("generator", {}),
        root=path.parent,
    )
    validate_manifest(manifest, check_files=check_files)
    return manifest


def validate_manifest(m: DatasetManifest, *, check_files: bool = True) -> None:
    if not isinstance(m.modalities, dict) or not m.modalities:
        raise SchemaViolation("modalities must be a non-empty mapping")
    if not isinstance(m.segments_per_video, int) or m.segments_per_video < 2:
        raise SchemaViolation("segments_per_video must be an integer >= 2")
    creator_ids = set()
    for c in m.creators:
        if not isinstance(c, dict) or "id" not in c or "profile_seed" not in c:
            raise SchemaViolation(f"bad creator entry {c!r}")
        if c["id"] in creator_ids:
            raise SchemaViolation(f"duplicate creator id {c['id']!r}")
        creator_ids.add(c["id"])
    video_ids = set()
    for v in m.videos:
        for key in ("id", "creator_id", "index", "label", "split", "path"):
            if key not in v:
                raise SchemaViolation(f"video entry missing {key!r}: {v!r}")
        if v["id"] in video_ids:
            raise SchemaViolation(f"duplicate video id {v['id']!r}")
        video_ids.add(v["id"])
        if v["creator_id"] not in creator_ids:
            raise SchemaViolation(f"video {v['id']!r} references unknown creator {v['creator_id']!r}")
        if v["label"] not in LABELS:
            raise SchemaViolation(f"video {v['id']!r}: label {v['label']!r} not in {LABELS}")
        if v["split"] not in SPLITS:
            raise SchemaViolation(f"video {v['id']!r}: split {v['split']!r} not in {SPLITS}")
        if not isinstance(v["index"], int):
            raise SchemaViolation(f"video {v['id']!r}: index must be an integer")
    for e in m.sensational_corpus:
        if "path" not in e:
            raise SchemaViolation(f"sensational entry missing path: {e!r}")
    _check_temporal(m)
    if check_files:
        for rel in [v["path"] for v in m.videos] + [e["path"] for e in m.sensational_corpus]:
            if not m.resolve(rel).is_file():
                raise MissingFile(f"referenced file missing: {m.resolve(rel)}")


def _check_temporal(m: DatasetManifest) -> None:
    for cid in m.creator_ids:
        idx = {s: [v["index"] for v in m.videos_for(cid, s)] for s in SPLITS}
        later = idx["validation"] + idx["test"]
        if idx["train"] and later and max(idx["train"]) >= min(later):
            raise TemporalLeak(
                f"creator {cid}: train index {max(idx['train'])} is not before "
                f"evaluation index {min(later)}")
        if idx["validation"] and idx["test"] and max(idx["validation"]) >= min(idx["test"]):
            raise TemporalLeak(
                f"creator {cid}: validation index {max(idx['validation'])} is not before "
                f"test index {min(idx['test'])}")


# --- checkpoints ----------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".bin")


def encode_checkpoint(detector) -> tuple[dict, bytes]:
    model, axis = detector.model, detector.axis
    theta = np.ascontiguousarray(model.theta, dtype="<f8")
    center = np.ascontiguousarray(model.center.amplitudes)
    inter = np.empty(2 * center.size, dtype="<f8")
    inter[0::2], inter[1::2] = center.real, center.imag
    vectors = [np.ascontiguousarray(v, dtype="<f8")
               for v in (axis.w_mut, axis.mean_normal, axis.mean_sensational)]
    payload = b"".join([
        CHECKPOINT_MAGIC,
        struct.pack("<IIII", CHECKPOINT_VERSION, theta.size, center.size, axis.dim),
        theta.tobytes(), inter.tobytes(), *(v.tobytes() for v in vectors),
    ])
    tc = model.train
    nq, nd = detector.normalizers
    header = {
        "format": "qbar-checkpoint",
        "version": CHECKPOINT_VERSION,
        "creator_id": detector.creator_id,
        "ansatz": {"n_qubits": model.ansatz.n_qubits, "n_layers": model.ansatz.n_layers,
                   "entanglement": model.ansatz.entanglement},
        "parameter_count": model.ansatz.parameter_count,
        "train": {"lam": tc.lam, "learning_rate": tc.learning_rate, "epochs": tc.epochs,
                  "batch_size": tc.batch_size, "seed": tc.seed, "optimizer": tc.optimizer},
        "projection": None if model.projection is None else {
            "seed": model.projection.seed, "in_dim": model.projection.in_dim,
            "out_dim": model.projection.out_dim},
        "features": {"modalities": list(detector.modalities),
                     "segments_per_video": detector.segments_per_video},
        "mutation_axis": {"dim": axis.dim, "shrinkage": axis.shrinkage},
        "normalizers": {"s_quant": {"mean": nq.mean, "std": nq.std},
                        "s_dir": {"mean": nd.mean, "std": nd.std}},
        "decision": None if detector.decision is None else {
            "gamma": detector.decision.gamma,
            "tau": _float_out(detector.decision.tau),
            "validation_f1": detector.decision.validation_f1},
        "payload": {"file": None, "sha256": hashlib.sha256(payload).hexdigest(),
                    "bytes": len(payload)},
    }
    return header, payload


def save_model(detector, path) -> bool:
    """Write ``path`` (JSON header) and its ``.bin`` sidecar; True if anything changed."""
    path = Path(path)
    header, payload = encode_checkpoint(detector)
    header["payload"]["file"] = _sidecar(path).name
    changed = write_bytes(_sidecar(path), payload)
    return write_bytes(path, dump_json(header)) or changed


def load_model(path):
    from .features import ProjectionSpec
    from .peqad import PeqadModel, TrainConfig
    from .pipeline import Detector
    from .scoring import DecisionConfig, MutationAxis, ScoreNormalizer
    from .statevector import AnsatzConfig, StateVector

    path = Path(path)
    header = _load_json(path)
    try:
        if header.get("format") != "qbar-checkpoint":
            raise CorruptPayload(f"{path}: not a qbar checkpoint header")
        if header.get("version") != CHECKPOINT_VERSION:
            raise VersionMismatch(f"{path}: checkpoint version {header.get('version')}")
        payload = _read(path.parent / header["payload"]["file"])
        if hashlib.sha256(payload).hexdigest() != header["payload"]["sha256"]:
            raise CorruptPayload(f"{path}: payload checksum mismatch")
        if payload[:4] != CHECKPOINT_MAGIC:
            raise CorruptPayload(f"{path}: bad payload magic")
        version, n_theta, n_amp, dim = struct.unpack_from("<IIII", payload, 4)
        if version != CHECKPOINT_VERSION:
            raise VersionMismatch(f"{path}: payload version {version}")
        expected = 20 + 8 * (n_theta + 2 * n_amp + 3 * dim)
        if len(payload) != expected:
            raise CorruptPayload(f"{path}: payload is {len(payload)} bytes, expected {expected}")
        arr = np.frombuffer(payload, dtype="<f8", offset=20).astype(np.float64)
        theta = arr[:n_theta].copy()
        inter = arr[n_theta:n_theta + 2 * n_amp]
        rest = arr[n_theta + 2 * n_amp:].reshape(3, dim)
        center_amps = inter[0::2] + 1j * inter[1::2]

        a = header["ansatz"]
        ansatz = AnsatzConfig(a["n_qubits"], a["n_layers"], a["entanglement"])
        if n_theta != ansatz.parameter_count or header["parameter_count"] != n_theta:
            raise CorruptPayload(
                f"{path}: {n_theta} angles stored, ansatz needs {ansatz.parameter_count}")
        if n_amp != ansatz.dim:
            raise CorruptPayload(f"{path}: center has {n_amp} amplitudes, expected {ansatz.dim}")
        norm = float(np.linalg.norm(center_amps))
        if abs(norm - 1.0) > 1e-10:
            raise CorruptPayload(f"{path}: center norm {norm!r} is not 1")
        center = StateVector(center_amps, check=False)
        t = header["train"]
        train = TrainConfig(lam=t["lam"], learning_rate=t["learning_rate"], epochs=t["epochs"],
                            batch_size=t["batch_size"], seed=t["seed"], optimizer=t["optimizer"])
        p = header["projection"]
        projection = None if p is None else ProjectionSpec(p["seed"], p["in_dim"], p["out_dim"])
        model = PeqadModel(ansatz, theta, center, projection, train)
        axis = MutationAxis(rest[0].copy(), rest[1].copy(), rest[2].copy(),
                            header["mutation_axis"]["shrinkage"])
        n = header["normalizers"]
        normalizers = (ScoreNormalizer(n["s_quant"]["mean"], n["s_quant"]["std"]),
                       ScoreNormalizer(n["s_dir"]["mean"], n["s_dir"]["std"]))
        d = header["decision"]
        decision = None if d is None else DecisionConfig(
            d["gamma"], _float_in(d["tau"]), d["validation_f1"])
        f = header["features"]
        return Detector(model=model, axis=axis, normalizers=normalizers, decision=decision,
                        modalities=tuple(f["modalities"]),
                        segments_per_video=f["segments_per_video"],
                        creator_id=header["creator_id"])
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, struct.error) as exc:
        raise CorruptPayload(f"{path}: malformed checkpoint ({exc!r})") from None
