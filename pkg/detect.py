"""
Typo-squatting detection by nearest-neighbour search over checking-list embeddings.

A query is flagged when its embedding lies strictly closer than `threshold`
(Euclidean) to some checking-list embedding; the closest one is the match.

"TSI1" index layout:
    b"TSI1" | uint32 LE manifest length | UTF-8 JSON manifest
    | float32 LE vectors (count x dim) | count x (uint32 LE length, UTF-8 domain)
"""

import json
import struct
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from swype import RenderConfig, render_batch
from utils.encoder import forward_batch, weights_fingerprint
from utils.errors import EmptyDataset, FingerprintMismatch, FormatError
from utils.io import atomic_write
from utils.logger import logger

MAGIC = b"TSI1"
DEFAULT_THRESHOLD = 0.6
RUNNER_UPS = 5


@dataclass
class EmbeddingIndex:
    domains: list
    vectors: np.ndarray
    model_fingerprint: str
    threshold: float = DEFAULT_THRESHOLD
    render_seed: int = 0

    def __post_init__(self):
        if not 0 < self.threshold <= 2:
            raise ValueError(f"threshold must be in (0, 2], got {self.threshold}")
        if len(self.domains) != len(self.vectors):
            raise FormatError(f"{len(self.domains)} domains but {len(self.vectors)} vectors")

    def __len__(self):
        return len(self.domains)


@dataclass
class DetectionResult:
    query: str
    flagged: bool
    match: Optional[str]
    distance: float
    runner_ups: list = field(default_factory=list)

    def to_dict(self):
        return {
            "query": self.query,
            "flagged": self.flagged,
            "match": self.match,
            "distance": self.distance,
            "runner_ups": [[domain, distance] for domain, distance in self.runner_ups],
        }


def build_index(checking_list, model, threshold=DEFAULT_THRESHOLD, render_config=RenderConfig()):
    """
    Embed the checking list with canonical noise into a frozen index.

    Args:
        checking_list (list[str]): Protected domains, order preserved
        model (SwypeEncoder): Trained encoder
        threshold (float): Flagging distance, strict
        render_config (RenderConfig): Rendering parameters (seed_mode forced to canonical)

    Returns:
        EmbeddingIndex
    """
    if len(checking_list) == 0:
        raise EmptyDataset("Checking list is empty")
    canonical = replace(render_config, seed_mode="canonical")
    vectors = forward_batch(render_batch(checking_list, canonical), model)
    index = EmbeddingIndex(
        domains=list(checking_list),
        vectors=vectors.astype(np.float32),
        model_fingerprint=weights_fingerprint(model),
        threshold=threshold,
        render_seed=canonical.seed,
    )
    logger.info(f"Built index of {len(index)} domains (threshold {threshold})")
    return index


def _check_fingerprint(index, model):
    fingerprint = weights_fingerprint(model)
    if fingerprint != index.model_fingerprint:
        logger.error("Index was built with different encoder weights")
        raise FingerprintMismatch(
            f"Index fingerprint {index.model_fingerprint[:12]} != model {fingerprint[:12]}"
        )


def _nearest(query, embedding, index, top_k):
    distances = np.linalg.norm(
        index.vectors.astype(np.float64) - embedding.astype(np.float64), axis=1
    )
    order = np.argsort(distances, kind="stable")
    best = int(order[0])
    runner_ups = [(index.domains[i], float(distances[i])) for i in order[1 : 1 + top_k]]
    distance = float(distances[best])
    return DetectionResult(
        query=query,
        flagged=distance < index.threshold,
        match=index.domains[best],
        distance=distance,
        runner_ups=runner_ups,
    )


def query_batch(domains, index, model, top_k=RUNNER_UPS, render_config=None):
    """
    Detect typo-squatting for several domains at once.

    Returns:
        list[DetectionResult]: one per domain, in order
    """
    _check_fingerprint(index, model)
    if len(domains) == 0:
        return []
    config = render_config or RenderConfig(seed=index.render_seed)
    config = replace(config, seed_mode="canonical")
    embeddings = forward_batch(render_batch(domains, config), model)
    return [_nearest(d, e, index, top_k) for d, e in zip(domains, embeddings)]


def query(domain, index, model, top_k=RUNNER_UPS, render_config=None):
    """Detect typo-squatting for one domain."""
    return query_batch([domain], index, model, top_k, render_config)[0]


def save_index(index, path):
    manifest = {
        "format": "TSI1",
        "fingerprint": index.model_fingerprint,
        "count": len(index),
        "dim": int(index.vectors.shape[1]),
        "threshold": index.threshold,
        "render_seed": index.render_seed,
        "dtype": "float32",
        "byte_order": "little",
    }
    header = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with atomic_write(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(index.vectors, dtype="<f4").tobytes())
        for domain in index.domains:
            encoded = domain.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
    logger.success(f"Saved index of {len(index)} domains to {path}")


def load_index(path):
    """
    Load a TSI1 index file.

    Raises:
        FileNotFoundError: if the file is missing
        FormatError: bad magic, inconsistent manifest or truncated payload
    """
    try:
        with open(path, "rb") as f:
            data = f.read()
    except FileNotFoundError:
        logger.error(f"File not found: {path}")
        raise

    if len(data) < 8 or data[:4] != MAGIC:
        raise FormatError(f"{path} is not a TSI1 index (bad magic)")
    (header_len,) = struct.unpack("<I", data[4:8])
    try:
        manifest = json.loads(data[8 : 8 + header_len].decode("utf-8"))
        count, dim = int(manifest["count"]), int(manifest["dim"])
        fingerprint = manifest["fingerprint"]
        threshold = float(manifest["threshold"])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"Invalid TSI1 manifest in {path}: {e}") from e

    offset = 8 + header_len
    nbytes = count * dim * 4
    if offset + nbytes > len(data):
        raise FormatError(f"Truncated TSI1 vectors in {path}")
    vectors = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset).reshape(count, dim)
    offset += nbytes

    domains = []
    for _ in range(count):
        if offset + 4 > len(data):
            raise FormatError(f"Truncated TSI1 domain table in {path}")
        (length,) = struct.unpack("<I", data[offset : offset + 4])
        offset += 4
        if offset + length > len(data):
            raise FormatError(f"Truncated TSI1 domain table in {path}")
        try:
            domains.append(data[offset : offset + length].decode("utf-8"))
        except UnicodeDecodeError as e:
            raise FormatError(f"Undecodable domain in {path}: {e}") from e
        offset += length
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes in {path}")

    try:
        index = EmbeddingIndex(
            domains=domains,
            vectors=vectors.astype(np.float32),
            model_fingerprint=fingerprint,
            threshold=threshold,
            render_seed=int(manifest.get("render_seed", 0)),
        )
    except ValueError as e:
        raise FormatError(f"Invalid TSI1 manifest in {path}: {e}") from e
    logger.info(f"Loaded index of {count} domains from {path}")
    return index
