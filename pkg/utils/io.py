import hashlib
import json
import os
import sys
import tempfile
from contextlib import contextmanager

from utils import __version__
from utils.logger import logger


def get_file_hash(file_path, algorithm="sha256"):
    """
    Calculate the hex digest of a file.

    Args:
        file_path (str): Path to the file
        algorithm (str): Any hashlib algorithm name

    Returns:
        str: Hex digest of the file
    """
    digest = hashlib.new(algorithm)
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def ensure_parent_dir(path):
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)


@contextmanager
def atomic_path(path):
    """
    Yield a temporary path next to `path`; on success it is renamed over `path`.

    The temporary name keeps the target's extension so format-sniffing writers
    (imageio) still pick the right encoder.
    """
    ensure_parent_dir(path)
    directory = os.path.dirname(os.path.abspath(path))
    suffix = os.path.splitext(path)[1]
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", suffix=suffix, dir=directory)
    os.close(fd)
    try:
        yield tmp_path
        os.replace(tmp_path, path)
    finally:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)


@contextmanager
def atomic_write(path, mode="w", encoding="utf-8"):
    """Open a temporary file for writing; rename it over `path` on success."""
    with atomic_path(path) as tmp_path:
        if "b" in mode:
            with open(tmp_path, mode) as f:
                yield f
        else:
            with open(tmp_path, mode, encoding=encoding, newline="\n") as f:
                yield f


def save_json(path, data):
    with atomic_write(path) as f:
        json.dump(data, f, indent=4, ensure_ascii=False, sort_keys=True)
        f.write("\n")


def write_metadata(artifact_path, seed=None, inputs=(), params=None):
    """
    Write the `<artifact>.meta.json` sidecar describing how an artifact was made.

    Args:
        artifact_path (str): Path of the artifact being described
        seed (int, optional): Seed controlling all randomness of the run
        inputs (iterable of str): Input files; their sha256 digests are recorded
        params (dict, optional): Flags / parameters used

    Returns:
        str: Path of the sidecar file
    """
    meta_path = f"{artifact_path}.meta.json"
    metadata = {
        "tool": "typoswype",
        "version": __version__,
        "python": sys.version.split()[0],
        "artifact": os.path.basename(artifact_path),
        "seed": seed,
        "inputs": {
            os.path.basename(p): get_file_hash(p) for p in inputs if p and os.path.isfile(p)
        },
        "params": params or {},
    }
    save_json(meta_path, metadata)
    logger.debug(f"Wrote metadata sidecar {meta_path}")
    return meta_path
