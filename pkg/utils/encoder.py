"""
Swype-image encoder: the ten-layer CNN that maps a 40x100x3 trace to a
256-dim unit vector, plus the portable "TSW1" weight container.

TSW1 layout:
    b"TSW1" | uint32 LE manifest length | UTF-8 JSON manifest | float32 LE tensors

Tensors are stored in manifest order, conv kernels as H x W x Cin x Cout and
dense matrices as in x out. The dense input is flattened row-major
(row, col, channel).
"""

import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from utils.errors import DegenerateNorm, FormatError, NonFiniteActivation, ShapeMismatch
from utils.io import atomic_write
from utils.logger import logger

MAGIC = b"TSW1"
NORM_EPS = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv" | "dense"
    filters: int
    stride: tuple = (1, 1)
    kernel: tuple = (1, 1)
    padding: str = "valid"  # "same" | "valid"; ignored for dense
    activation: str = "leaky_relu"  # "leaky_relu" | "tanh" | "linear"


TABLE_LAYERS = (
    LayerSpec("conv", 8, (1, 1), (3, 3), "same"),
    LayerSpec("conv", 16, (1, 1), (3, 3), "same"),
    LayerSpec("conv", 64, (1, 1), (3, 5), "valid"),
    LayerSpec("conv", 64, (1, 2), (3, 5), "valid"),
    LayerSpec("conv", 128, (2, 2), (3, 5), "valid"),
    LayerSpec("conv", 128, (2, 2), (3, 5), "valid"),
    LayerSpec("conv", 128, (2, 2), (3, 5), "valid"),
    LayerSpec("dense", 1024, activation="tanh"),
    LayerSpec("dense", 512, activation="leaky_relu"),
    # followed by L2 normalisation
    LayerSpec("dense", 256, activation="linear"),
)


def _conv_output(size, kernel, stride, padding):
    if padding == "same":
        return (size + stride - 1) // stride
    return (size - kernel) // stride + 1


@dataclass(frozen=True)
class EncoderConfig:
    layers: tuple = TABLE_LAYERS
    input_shape: tuple = (40, 100, 3)
    leaky_slope: float = 0.01
    embedding_dim: int = 256

    def __post_init__(self):
        if not self.layers or self.layers[-1].kind != "dense":
            raise ValueError("The encoder must end with a dense layer")
        if self.layers[-1].filters != self.embedding_dim:
            raise ValueError(
                f"Last layer width {self.layers[-1].filters} != embedding_dim {self.embedding_dim}"
            )
        seen_dense = False
        for spec in self.layers:
            if spec.kind not in ("conv", "dense"):
                raise ValueError(f"Unknown layer kind {spec.kind!r}")
            if spec.kind == "conv" and seen_dense:
                raise ValueError("Convolutions cannot follow dense layers")
            seen_dense = seen_dense or spec.kind == "dense"

    def shape_trace(self):
        """
        Output shape after every layer, starting from the flatten point.

        Returns:
            list[tuple]: (H, W, C) for convs, (width,) for the flatten step and
            every dense layer
        """
        height, width, channels = self.input_shape
        trace = []
        flattened = False
        for spec in self.layers:
            if spec.kind == "conv":
                height = _conv_output(height, spec.kernel[0], spec.stride[0], spec.padding)
                width = _conv_output(width, spec.kernel[1], spec.stride[1], spec.padding)
                channels = spec.filters
                if height < 1 or width < 1:
                    raise ShapeMismatch(f"Layer {spec} collapses the feature map")
                trace.append((height, width, channels))
            else:
                if not flattened:
                    trace.append((height * width * channels,))
                    flattened = True
                trace.append((spec.filters,))
        return trace

    @property
    def flatten_width(self):
        for shape in self.shape_trace():
            if len(shape) == 1:
                return shape[0]
        raise ShapeMismatch("Encoder has no dense layers")

    def to_manifest(self):
        return {
            "layers": [asdict(spec) for spec in self.layers],
            "input_shape": list(self.input_shape),
            "leaky_slope": self.leaky_slope,
            "embedding_dim": self.embedding_dim,
        }

    @classmethod
    def from_manifest(cls, manifest):
        layers = tuple(
            LayerSpec(
                kind=spec["kind"],
                filters=int(spec["filters"]),
                stride=tuple(spec["stride"]),
                kernel=tuple(spec["kernel"]),
                padding=spec["padding"],
                activation=spec["activation"],
            )
            for spec in manifest["layers"]
        )
        return cls(
            layers=layers,
            input_shape=tuple(manifest["input_shape"]),
            leaky_slope=float(manifest["leaky_slope"]),
            embedding_dim=int(manifest["embedding_dim"]),
        )


class SwypeEncoder(nn.Module):
    """CNN encoder E: swype image batch (B, H, W, 3) -> unit embeddings (B, 256)."""

    def __init__(self, config=EncoderConfig()):
        super().__init__()
        self.config = config
        self.blocks = nn.ModuleList()
        in_channels = config.input_shape[2]
        in_features = config.flatten_width
        for spec in config.layers:
            if spec.kind == "conv":
                padding = (
                    (spec.kernel[0] // 2, spec.kernel[1] // 2) if spec.padding == "same" else 0
                )
                self.blocks.append(
                    nn.Conv2d(in_channels, spec.filters, spec.kernel, spec.stride, padding)
                )
                in_channels = spec.filters
            else:
                self.blocks.append(nn.Linear(in_features, spec.filters))
                in_features = spec.filters
        self._check_shapes()

    def _activate(self, x, activation):
        if activation == "leaky_relu":
            return F.leaky_relu(x, self.config.leaky_slope)
        if activation == "tanh":
            return torch.tanh(x)
        return x

    def features(self, x, trace=None):
        """Pre-normalisation output. `x` is (B, H, W, C)."""
        x = x.permute(0, 3, 1, 2)
        flattened = False
        for spec, block in zip(self.config.layers, self.blocks):
            if spec.kind == "dense" and not flattened:
                # row-major (row, col, channel)
                x = x.permute(0, 2, 3, 1).reshape(x.shape[0], -1)
                flattened = True
                if trace is not None:
                    trace.append(tuple(x.shape[1:]))
            x = self._activate(block(x), spec.activation)
            if trace is not None:
                shape = x.shape[1:]
                trace.append((shape[1], shape[2], shape[0]) if x.dim() == 4 else tuple(shape))
        return x

    def forward(self, x):
        x = self.features(x)
        if not torch.isfinite(x).all():
            raise NonFiniteActivation("Encoder produced non-finite activations")
        norms = torch.linalg.vector_norm(x, dim=1, keepdim=True)
        if (norms <= NORM_EPS).any():
            raise DegenerateNorm("Encoder output has zero norm; cannot L2-normalise")
        return x / norms

    def _check_shapes(self):
        expected = self.config.shape_trace()
        observed = []
        with torch.no_grad():
            blank = torch.zeros((1, *self.config.input_shape))
            self.features(blank, trace=observed)
        if observed != expected:
            raise ShapeMismatch(f"Shape trace {observed} != expected {expected}")


def init_weights(config=EncoderConfig(), seed=0):
    """
    Build an encoder with deterministic initial weights.

    He-uniform for leaky-relu layers, Xavier-uniform for tanh and linear
    layers, zero biases.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = SwypeEncoder(config)
        for spec, block in zip(config.layers, model.blocks):
            if spec.activation == "leaky_relu":
                nn.init.kaiming_uniform_(
                    block.weight, a=config.leaky_slope, nonlinearity="leaky_relu"
                )
            elif spec.activation == "tanh":
                nn.init.xavier_uniform_(block.weight, gain=nn.init.calculate_gain("tanh"))
            else:
                nn.init.xavier_uniform_(block.weight)
            nn.init.zeros_(block.bias)
    return model


def _as_batch(images, model):
    dtype = next(model.parameters()).dtype
    batch = torch.as_tensor(np.asarray(images), dtype=dtype)
    if batch.dim() == 3:
        batch = batch.unsqueeze(0)
    if tuple(batch.shape[1:]) != tuple(model.config.input_shape):
        raise ShapeMismatch(
            f"Expected images of shape {model.config.input_shape}, got {tuple(batch.shape[1:])}"
        )
    return batch


def forward(image, model):
    """Embed one swype image; returns a (256,) unit vector as numpy."""
    return forward_batch([image], model)[0]


def forward_batch(images, model, chunk_size=256):
    """
    Embed a list of swype images, preserving order.

    Returns:
        np.ndarray: (len(images), embedding_dim) unit rows
    """
    if len(images) == 0:
        return np.zeros((0, model.config.embedding_dim), dtype=np.float32)
    outputs = []
    with torch.no_grad():
        for start in range(0, len(images), chunk_size):
            chunk = images[start : start + chunk_size]
            try:
                outputs.append(model(_as_batch(chunk, model)).cpu().numpy())
            except (NonFiniteActivation, DegenerateNorm) as e:
                raise e.at_index(start + _first_bad_row(chunk, model))
    return np.concatenate(outputs, axis=0)


def _first_bad_row(chunk, model):
    for offset, image in enumerate(chunk):
        try:
            model(_as_batch([image], model))
        except (NonFiniteActivation, DegenerateNorm):
            return offset
    return 0


def _tensor_layout(model):
    """(name, numpy array) pairs in container order and layout."""
    tensors = []
    for i, (spec, block) in enumerate(zip(model.config.layers, model.blocks)):
        weight = block.weight.detach().cpu().to(torch.float32).numpy()
        if spec.kind == "conv":
            weight = weight.transpose(2, 3, 1, 0)
        else:
            weight = weight.T
        tensors.append((f"layer{i}.weight", weight))
        tensors.append((f"layer{i}.bias", block.bias.detach().cpu().to(torch.float32).numpy()))
    return tensors


def serialize_weights(model):
    """Encode `model` as TSW1 bytes."""
    tensors = _tensor_layout(model)
    manifest = {
        "format": "TSW1",
        "dtype": "float32",
        "byte_order": "little",
        "flatten_order": "row,col,channel",
        "config": model.config.to_manifest(),
        "tensors": [{"name": name, "shape": list(array.shape)} for name, array in tensors],
    }
    header = json.dumps(manifest, sort_keys=True).encode("utf-8")
    buffer = io.BytesIO()
    buffer.write(MAGIC)
    buffer.write(struct.pack("<I", len(header)))
    buffer.write(header)
    for _, array in tensors:
        buffer.write(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return buffer.getvalue()


def weights_fingerprint(model):
    """sha256 of the TSW1 encoding; equals the digest of a saved weight file."""
    return hashlib.sha256(serialize_weights(model)).hexdigest()


def save_weights(model, path):
    with atomic_write(path, "wb") as f:
        f.write(serialize_weights(model))
    logger.success(f"Saved encoder weights to {path}")


def deserialize_weights(data):
    """Decode TSW1 bytes into a SwypeEncoder."""
    if len(data) < 8 or data[:4] != MAGIC:
        raise FormatError("Not a TSW1 weight file (bad magic)")
    (header_len,) = struct.unpack("<I", data[4:8])
    if 8 + header_len > len(data):
        raise FormatError("Truncated TSW1 manifest")
    try:
        manifest = json.loads(data[8 : 8 + header_len].decode("utf-8"))
        config = EncoderConfig.from_manifest(manifest["config"])
        entries = manifest["tensors"]
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"Invalid TSW1 manifest: {e}") from e
    if manifest.get("dtype") != "float32" or manifest.get("byte_order") != "little":
        raise FormatError("TSW1 tensors must be little-endian float32")

    with torch.random.fork_rng(devices=[]):
        model = SwypeEncoder(config)
    expected = _tensor_layout(model)
    if [e["name"] for e in entries] != [name for name, _ in expected]:
        raise FormatError("TSW1 tensor list does not match the encoder layout")

    offset = 8 + header_len
    arrays = []
    for entry, (name, template) in zip(entries, expected):
        shape = tuple(entry["shape"])
        if shape != template.shape:
            raise FormatError(f"{name}: manifest shape {shape} != layout shape {template.shape}")
        nbytes = int(np.prod(shape)) * 4
        if offset + nbytes > len(data):
            raise FormatError(f"Truncated TSW1 payload at tensor {name}")
        arrays.append(np.frombuffer(data, dtype="<f4", count=int(np.prod(shape)), offset=offset).reshape(shape))
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after TSW1 payload")

    with torch.no_grad():
        for i, (spec, block) in enumerate(zip(config.layers, model.blocks)):
            weight, bias = arrays[2 * i], arrays[2 * i + 1]
            weight = weight.transpose(3, 2, 0, 1) if spec.kind == "conv" else weight.T
            if not (np.isfinite(weight).all() and np.isfinite(bias).all()):
                raise FormatError(f"layer{i} contains non-finite values")
            block.weight.copy_(torch.from_numpy(np.ascontiguousarray(weight, dtype=np.float32)))
            block.bias.copy_(torch.from_numpy(np.ascontiguousarray(bias, dtype=np.float32)))
    return model


def load_weights(path):
    """
    Load a TSW1 weight file.

    Raises:
        FileNotFoundError: if the file is missing
        FormatError: bad magic, truncated payload or shape mismatch
    """
    try:
        with open(path, "rb") as f:
            data = f.read()
    except FileNotFoundError:
        logger.error(f"File not found: {path}")
        raise
    model = deserialize_weights(data)
    logger.info(f"Loaded encoder weights from {path}")
    return model


def read_manifest(path):
    """Return the JSON manifest of a TSW1 file without decoding the tensors."""
    with open(path, "rb") as f:
        head = f.read(8)
        if len(head) < 8 or head[:4] != MAGIC:
            raise FormatError(f"{path} is not a TSW1 weight file")
        (header_len,) = struct.unpack("<I", head[4:8])
        return json.loads(f.read(header_len).decode("utf-8"))
