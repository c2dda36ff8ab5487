"""Per-modality normalization, fusion, and fitting to the quantum dimension."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateModality,
    MissingModality,
    MissingProjection,
    TooShort,
)

MODALITIES = ("text", "audio", "visual", "meta")
QDIM = 4096


@dataclass(frozen=True)
class ModalityEmbedding:
    modality: str
    values: np.ndarray

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise ValueError(f"{self.modality} embedding is empty")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.modality} embedding has non-finite values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class FusedVector:
    values: np.ndarray
    source_dims: tuple[int, ...]
    modalities: tuple[str, ...] = MODALITIES
    degenerate: tuple[str, ...] = field(default=(), compare=False)

    @property
    def dim(self) -> int:
        return int(self.values.size)


def layer_normalize(v, *, return_flag: bool = False):
    """Zero-mean, unit population-std rescaling with no affine terms.

    A vector whose std is below 1e-12 maps to zeros; pass ``return_flag=True``
    to get ``(out, degenerate)``.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size < 2:
        raise TooShort(f"need at least 2 values, got {v.size}")
    # shift by v[0] first so a constant vector centers to exact zeros
    shifted = v - v[0]
    centered = shifted - shifted.mean()
    std = np.sqrt(np.mean(centered * centered))
    degenerate = bool(std < 1e-12)
    out = np.zeros_like(v) if degenerate else centered / std
    return (out, degenerate) if return_flag else out


def fuse(embeddings, modalities=MODALITIES) -> FusedVector:
    """Layer-normalize each modality and concatenate in canonical order.

    ``modalities`` declares which modalities are expected; input order does
    not matter.
    """
    by_name = {}
    for emb in embeddings:
        if emb.modality in by_name:
            raise DuplicateModality(emb.modality)
        if emb.modality not in modalities:
            raise ValueError(f"modality {emb.modality!r} not declared in {modalities}")
        by_name[emb.modality] = emb
    order = [m for m in MODALITIES if m in modalities]
    missing = [m for m in order if m not in by_name]
    if missing:
        raise MissingModality(", ".join(missing))
    parts, degenerate = [], []
    for m in order:
        out, flag = layer_normalize(by_name[m].values, return_flag=True)
        parts.append(out)
        if flag:
            degenerate.append(m)
    return FusedVector(
        values=np.concatenate(parts),
        source_dims=tuple(p.size for p in parts),
        modalities=tuple(order),
        degenerate=tuple(degenerate),
    )


@dataclass(frozen=True)
class ProjectionSpec:
    """Seeded, fixed (untrained) projection with orthonormal rows."""

    seed: int
    in_dim: int
    out_dim: int = QDIM

    def __post_init__(self):
        if self.out_dim & (self.out_dim - 1):
            raise ValueError(f"out_dim {self.out_dim} is not a power of two")
        if self.in_dim <= self.out_dim:
            raise ValueError("projection only applies when in_dim > out_dim")

    def matrix(self) -> np.ndarray:
        return _projection_matrix(self.seed, self.in_dim, self.out_dim)


@functools.lru_cache(maxsize=4)
def _projection_matrix(seed: int, in_dim: int, out_dim: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    gauss = rng.standard_normal((in_dim, out_dim))
    q, r = np.linalg.qr(gauss)
    # fix column signs so the result is a function of the seed alone
    q *= np.sign(np.diag(r))
    p = np.ascontiguousarray(q.T)
    p.setflags(write=False)
    return p


def fit_to_qdim(x, spec: ProjectionSpec | None = None, out_dim: int = QDIM) -> np.ndarray:
    """Zero-pad (D < out_dim), pass through (D == out_dim) or project (D > out_dim)."""
    values = x.values if isinstance(x, FusedVector) else np.asarray(x, dtype=np.float64)
    d = values.size
    if d < out_dim:
        out = np.zeros(out_dim)
        out[:d] = values
        return out
    if d == out_dim:
        return values.copy()
    if spec is None:
        raise MissingProjection(f"fused dimension {d} exceeds {out_dim}; a ProjectionSpec is required")
    if spec.in_dim != d or spec.out_dim != out_dim:
        raise ValueError(f"projection is {spec.out_dim}x{spec.in_dim}, input needs {out_dim}x{d}")
    return spec.matrix() @ values
