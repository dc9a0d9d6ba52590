"""Patch embedding backends and the cosine-similarity timeline.

Three interchangeable backends map a tube slice to a unit feature vector:

* builtin: a deterministic 704-dim grid descriptor (8x8 cells, per-cell
  mean RGB plus an 8-bin gradient-orientation histogram on luminance).
  Self-contained stand-in for a pretrained CNN.
* import: precomputed vectors (e.g. CNN penultimate features exported
  offline) loaded from the binary embedding table format.
* external: a child process that embeds raw RGB8 windows over a simple
  binary stdin/stdout protocol.

All vectors are L2-normalized; zero vectors raise instead of being
silently normalized.
"""

from __future__ import annotations

import logging
import struct
import subprocess
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, MissingEmbedding, ZeroVector
from .tubes import TubeSlice

log = logging.getLogger("jva.embedding")

GRID = 8
ORIENTATION_BINS = 8
BUILTIN_DIM = GRID * GRID * (3 + ORIENTATION_BINS)  # 704

# Rec. 601 luma weights for the gradient channel.
_LUMA = np.array([0.299, 0.587, 0.114])

EMBEDDING_MAGIC = b"JVAE"
EMBEDDING_VERSION = 1


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray  # float64, unit L2 norm
    dim: int
    backend_id: str


@dataclass(frozen=True)
class SimilarityTimeline:
    entries: list[tuple[int, int, float]]  # (tsA, tsB, score), ordered by tsA
    backend_id: str
    pair_count: int


def _normalize(values: np.ndarray, backend_id: str) -> FeatureVector:
    v = np.asarray(values, dtype=np.float64).ravel()
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ZeroVector(f"zero vector from backend {backend_id!r}")
    return FeatureVector(values=v / norm, dim=v.size, backend_id=backend_id)


def embed_builtin(slice: TubeSlice) -> FeatureVector:
    """Compute the builtin grid descriptor for one slice.

    The window is partitioned into an 8x8 cell grid. Per cell: mean R, G,
    B (192 values overall) and a magnitude-weighted 8-bin histogram of
    unsigned gradient orientation on luminance, central differences (512
    values). Concatenated and L2-normalized; 704 dimensions.
    """
    return _normalize(grid_descriptor(slice.window), "builtin")


def grid_descriptor(
    window: np.ndarray, grid: int = GRID, bins: int = ORIENTATION_BINS
) -> np.ndarray:
    """Raw (unnormalized) descriptor for an RGB8 window."""
    win = np.asarray(window)
    if win.ndim != 3 or win.shape[2] != 3:
        raise ValueError("window must be (H, W, 3) RGB8")
    h, w = win.shape[:2]
    if h < grid or w < grid:
        raise ValueError(f"window {h}x{w} smaller than the {grid}x{grid} cell grid")
    pix = win.astype(np.float64)

    row_cell = _cell_ids(h, grid)
    col_cell = _cell_ids(w, grid)
    cell = row_cell[:, None] * grid + col_cell[None, :]

    counts = np.bincount(cell.ravel(), minlength=grid * grid).astype(np.float64)
    means = np.empty((grid * grid, 3))
    flat_cell = cell.ravel()
    for c in range(3):
        sums = np.bincount(flat_cell, weights=pix[:, :, c].ravel(), minlength=grid * grid)
        means[:, c] = sums / counts

    hist = np.zeros(grid * grid * bins)
    if h >= 3 and w >= 3:
        luma = pix @ _LUMA
        gx = (luma[1:-1, 2:] - luma[1:-1, :-2]) / 2.0
        gy = (luma[2:, 1:-1] - luma[:-2, 1:-1]) / 2.0
        mag = np.hypot(gx, gy)
        # Unsigned orientation in [0, pi), robust to contrast polarity.
        theta = np.mod(np.arctan2(gy, gx), np.pi)
        bin_idx = np.minimum((theta * (bins / np.pi)).astype(np.intp), bins - 1)
        interior_cell = cell[1:-1, 1:-1]
        flat = interior_cell.ravel() * bins + bin_idx.ravel()
        hist = np.bincount(flat, weights=mag.ravel(), minlength=grid * grid * bins)

    return np.concatenate([means.ravel(), hist])


def _cell_ids(length: int, grid: int) -> np.ndarray:
    # Pixel i belongs to cell k iff k*length//grid <= i < (k+1)*length//grid.
    bounds = (np.arange(1, grid) * length) // grid
    return np.searchsorted(bounds, np.arange(length), side="right").astype(np.intp)


def embed_import(timestamp: int, table: "EmbeddingTable") -> FeatureVector:
    """Look up a precomputed vector by timestamp and L2-normalize it."""
    return table.embed_timestamp(timestamp)


def cosine_similarity(a: FeatureVector, b: FeatureVector) -> float:
    """dot(a,b) / (|a||b|), clamped to [-1, 1]. Symmetric by construction."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dims {a.dim} != {b.dim}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine of a zero vector is undefined")
    score = float(np.dot(a.values, b.values) / (na * nb))
    return max(-1.0, min(1.0, score))


class BuiltinBackend:
    id = "builtin"

    def embed(self, slice: TubeSlice) -> FeatureVector:
        return embed_builtin(slice)

    def embed_tube(self, slices: Sequence[TubeSlice]) -> dict[int, FeatureVector]:
        return {s.timestamp: self.embed(s) for s in slices}


class EmbeddingTable:
    """Timestamp -> vector store backing the import backend."""

    def __init__(self, vectors: dict[int, np.ndarray], backend_id: str = "import"):
        dims = {np.asarray(v).size for v in vectors.values()}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed vector dimensions in table: {sorted(dims)}")
        self.vectors = {int(t): np.asarray(v, dtype=np.float64) for t, v in vectors.items()}
        self.dim = dims.pop() if dims else 0
        self.backend_id = backend_id

    def __len__(self) -> int:
        return len(self.vectors)

    def embed_timestamp(self, timestamp: int) -> FeatureVector:
        vec = self.vectors.get(int(timestamp))
        if vec is None:
            raise MissingEmbedding(int(timestamp))
        return _normalize(vec, self.backend_id)


class ImportBackend:
    id = "import"

    def __init__(self, table: EmbeddingTable):
        self.table = table

    def embed(self, slice: TubeSlice) -> FeatureVector:
        return self.table.embed_timestamp(slice.timestamp)

    def embed_tube(self, slices: Sequence[TubeSlice]) -> dict[int, FeatureVector]:
        return {s.timestamp: self.embed(s) for s in slices}


class ExternalBackend:
    """Embed via a child process.

    Wire contract (all little-endian): the parent writes one record per
    slice to the child's stdin, u64 timestamp followed by W*W*3 raw RGB8
    bytes, then closes stdin. The child writes one record per slice to
    stdout: u64 timestamp, u32 dim, dim float32 values. Record order on
    output need not match input.
    """

    id = "external"

    def __init__(self, command: Sequence[str]):
        self.command = list(command)

    def embed_tube(self, slices: Sequence[TubeSlice]) -> dict[int, FeatureVector]:
        proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        chunks: list[bytes] = []

        def _drain():
            chunks.append(proc.stdout.read())

        reader = threading.Thread(target=_drain)
        reader.start()
        try:
            for s in slices:
                proc.stdin.write(struct.pack("<Q", s.timestamp))
                proc.stdin.write(np.ascontiguousarray(s.window, dtype=np.uint8).tobytes())
        finally:
            proc.stdin.close()
            reader.join()
            code = proc.wait()
        if code != 0:
            raise RuntimeError(f"external embedder exited with status {code}")

        table = _parse_external_records(b"".join(chunks))
        return {s.timestamp: table.embed_timestamp(s.timestamp) for s in slices}

    def embed(self, slice: TubeSlice) -> FeatureVector:
        return self.embed_tube([slice])[slice.timestamp]


def _parse_external_records(data: bytes) -> EmbeddingTable:
    vectors: dict[int, np.ndarray] = {}
    pos = 0
    while pos < len(data):
        if pos + 12 > len(data):
            raise DimensionMismatch("truncated external embedder record header")
        ts, dim = struct.unpack_from("<QI", data, pos)
        pos += 12
        end = pos + 4 * dim
        if end > len(data):
            raise DimensionMismatch("truncated external embedder record payload")
        vectors[ts] = np.frombuffer(data[pos:end], dtype="<f4").astype(np.float64)
        pos = end
    return EmbeddingTable(vectors, backend_id="external")


def write_embedding_table(path, vectors: dict[int, np.ndarray], version: int = EMBEDDING_VERSION) -> None:
    """Serialize timestamp -> vector pairs to the binary table format.

    Layout: magic ``JVAE``, u32 version, u32 dim, u64 count, then count
    records of (u64 timestamp_ns, dim x f32), all little-endian. Records
    are written in timestamp order so identical tables are byte-identical.
    """
    dims = {np.asarray(v).size for v in vectors.values()}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed vector dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "wb") as f:
        f.write(EMBEDDING_MAGIC)
        f.write(struct.pack("<IIQ", version, dim, len(vectors)))
        for ts in sorted(vectors):
            f.write(struct.pack("<Q", int(ts)))
            f.write(np.asarray(vectors[ts], dtype="<f4").tobytes())


def read_embedding_table(path) -> EmbeddingTable:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != EMBEDDING_MAGIC:
        raise DimensionMismatch(f"not an embedding table: bad magic {data[:4]!r}")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != EMBEDDING_VERSION:
        raise DimensionMismatch(f"unsupported embedding table version {version}")
    pos = 4 + struct.calcsize("<IIQ")
    record = 8 + 4 * dim
    if len(data) - pos != count * record:
        raise DimensionMismatch(
            f"embedding table size mismatch: {len(data) - pos} bytes for "
            f"{count} records of {record}"
        )
    vectors: dict[int, np.ndarray] = {}
    for _ in range(count):
        (ts,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        vectors[ts] = np.frombuffer(data[pos : pos + 4 * dim], dtype="<f4").astype(
            np.float64
        )
        pos += 4 * dim
    return EmbeddingTable(vectors)


def similarity_timeline(
    tubeA: Sequence[TubeSlice],
    tubeB: Sequence[TubeSlice],
    pairs: Iterable,
    backend,
    on_error: str = "raise",
    backend_b=None,
) -> SimilarityTimeline:
    """Score every aligned pair of slices with the given backend.

    ``pairs`` are AlignedPair records whose tsA/tsB reference slice
    timestamps in tubeA/tubeB. ``on_error`` is ``raise`` (default) or
    ``skip``, which logs the failing pair and drops its entry. Pass
    ``backend_b`` when the streams come from separate stores (e.g. one
    imported table per participant, where timestamps may collide).
    """
    if on_error not in ("raise", "skip"):
        raise ValueError(f"unknown error policy {on_error!r}")
    pairs = list(pairs)
    want_a = {p.tsA for p in pairs}
    want_b = {p.tsB for p in pairs}
    second = backend_b if backend_b is not None else backend
    vecs_a = _embed_map(backend, [s for s in tubeA if s.timestamp in want_a], on_error)
    vecs_b = _embed_map(second, [s for s in tubeB if s.timestamp in want_b], on_error)

    entries: list[tuple[int, int, float]] = []
    for p in pairs:
        try:
            va = vecs_a.get(p.tsA)
            vb = vecs_b.get(p.tsB)
            if va is None or vb is None:
                raise MissingEmbedding(p.tsA if va is None else p.tsB)
            entries.append((p.tsA, p.tsB, cosine_similarity(va, vb)))
        except Exception:
            if on_error == "raise":
                raise
            log.warning("skipping pair (%d, %d)", p.tsA, p.tsB, exc_info=True)
    entries.sort(key=lambda e: (e[0], e[1]))
    return SimilarityTimeline(entries=entries, backend_id=backend.id, pair_count=len(entries))


def _embed_map(backend, slices: Sequence[TubeSlice], on_error: str) -> dict[int, FeatureVector]:
    if on_error == "raise":
        return backend.embed_tube(slices)
    out: dict[int, FeatureVector] = {}
    for s in slices:
        try:
            out[s.timestamp] = backend.embed(s)
        except Exception:
            log.warning("embedding failed at %d", s.timestamp, exc_info=True)
    return out
