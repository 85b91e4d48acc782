"""Encoder configuration, parameter containers, and checkpoint files."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..errors import CheckpointFormatError, DimensionMismatchError

#: Gate-block order along the packed 4H axis.
GATE_ORDER = ("input", "forget", "cell", "output")

CHECKPOINT_MAGIC = b"DRUGENC-CKPT v1\n"


@dataclass(frozen=True)
class EncoderConfig:
    """Shape and training hyper-parameters of one column encoder."""

    vocab_size: int
    label_count: int
    embed_dim: int
    hidden_size: int
    num_layers: int
    max_len: int
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("vocab_size", "label_count", "embed_dim", "hidden_size",
                     "num_layers", "max_len", "batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_len < 2:
            raise ValueError(f"max_len must be >= 2, got {self.max_len}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")

    @property
    def encoding_dim(self) -> int:
        return 2 * self.hidden_size

    @property
    def pair_dim(self) -> int:
        return 4 * self.hidden_size

    def layer_input_dim(self, layer: int) -> int:
        return self.embed_dim if layer == 0 else 2 * self.hidden_size


@dataclass
class LstmDirectionParams:
    """Weights of one recurrence direction, gate blocks packed per GATE_ORDER."""

    w_ih: np.ndarray  # (4H, input_dim)
    w_hh: np.ndarray  # (4H, H)
    b_ih: np.ndarray  # (4H,)
    b_hh: np.ndarray  # (4H,)


@dataclass
class LstmLayerParams:
    forward: LstmDirectionParams
    backward: LstmDirectionParams


@dataclass
class EncoderModel:
    config: EncoderConfig
    embedding: np.ndarray  # (vocab_size, embed_dim)
    layers: list[LstmLayerParams]
    head_weight: np.ndarray  # (label_count, 4H)
    head_bias: np.ndarray  # (label_count,)


def named_parameters(model: EncoderModel) -> list[tuple[str, np.ndarray]]:
    """Flat, fixed-order view of every trainable tensor.

    The order defines the checkpoint layout and the optimizer update order.
    """
    out: list[tuple[str, np.ndarray]] = [("embedding", model.embedding)]
    for i, layer in enumerate(model.layers):
        for direction in ("forward", "backward"):
            params: LstmDirectionParams = getattr(layer, direction)
            for name in ("w_ih", "w_hh", "b_ih", "b_hh"):
                out.append((f"layers.{i}.{direction}.{name}", getattr(params, name)))
    out.append(("head.weight", model.head_weight))
    out.append(("head.bias", model.head_bias))
    return out


def param_count(model: EncoderModel) -> int:
    return sum(arr.size for _, arr in named_parameters(model))


def init_model(config: EncoderConfig) -> EncoderModel:
    """Seeded initialization.

    Embeddings draw from U(-0.5/d, 0.5/d); recurrent and head weights from
    U(-1/sqrt(h), 1/sqrt(h)); biases start at zero. Draws happen in
    named-parameter order so the result is a pure function of the config.
    """
    rng = np.random.default_rng(config.seed)
    h = config.hidden_size
    bound = 1.0 / np.sqrt(h)
    embed_bound = 0.5 / config.embed_dim

    embedding = rng.uniform(-embed_bound, embed_bound, size=(config.vocab_size, config.embed_dim))
    layers = []
    for layer in range(config.num_layers):
        input_dim = config.layer_input_dim(layer)
        directions = []
        for _ in range(2):
            directions.append(
                LstmDirectionParams(
                    w_ih=rng.uniform(-bound, bound, size=(4 * h, input_dim)),
                    w_hh=rng.uniform(-bound, bound, size=(4 * h, h)),
                    b_ih=np.zeros(4 * h),
                    b_hh=np.zeros(4 * h),
                )
            )
        layers.append(LstmLayerParams(forward=directions[0], backward=directions[1]))
    head_weight = rng.uniform(-bound, bound, size=(config.label_count, config.pair_dim))
    head_bias = np.zeros(config.label_count)
    return EncoderModel(
        config=config,
        embedding=embedding,
        layers=layers,
        head_weight=head_weight,
        head_bias=head_bias,
    )


def copy_model(model: EncoderModel) -> EncoderModel:
    return EncoderModel(
        config=model.config,
        embedding=model.embedding.copy(),
        layers=[
            LstmLayerParams(
                forward=LstmDirectionParams(
                    w_ih=l.forward.w_ih.copy(), w_hh=l.forward.w_hh.copy(),
                    b_ih=l.forward.b_ih.copy(), b_hh=l.forward.b_hh.copy(),
                ),
                backward=LstmDirectionParams(
                    w_ih=l.backward.w_ih.copy(), w_hh=l.backward.w_hh.copy(),
                    b_ih=l.backward.b_ih.copy(), b_hh=l.backward.b_hh.copy(),
                ),
            )
            for l in model.layers
        ],
        head_weight=model.head_weight.copy(),
        head_bias=model.head_bias.copy(),
    )


def expected_shapes(config: EncoderConfig) -> list[tuple[str, tuple[int, ...]]]:
    h = config.hidden_size
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("embedding", (config.vocab_size, config.embed_dim))
    ]
    for i in range(config.num_layers):
        input_dim = config.layer_input_dim(i)
        for direction in ("forward", "backward"):
            shapes.append((f"layers.{i}.{direction}.w_ih", (4 * h, input_dim)))
            shapes.append((f"layers.{i}.{direction}.w_hh", (4 * h, h)))
            shapes.append((f"layers.{i}.{direction}.b_ih", (4 * h,)))
            shapes.append((f"layers.{i}.{direction}.b_hh", (4 * h,)))
    shapes.append(("head.weight", (config.label_count, config.pair_dim)))
    shapes.append(("head.bias", (config.label_count,)))
    return shapes


def save_checkpoint(model: EncoderModel, path: str | Path) -> None:
    """Binary checkpoint: text header, raw little-endian float64 tensors,
    trailing sha256 line over everything before it."""
    tensors = named_parameters(model)
    header = {
        "config": asdict(model.config),
        "tensors": [[name, list(arr.shape)] for name, arr in tensors],
    }
    payload = bytearray()
    payload += CHECKPOINT_MAGIC
    payload += json.dumps(header, sort_keys=True).encode() + b"\n"
    for _, arr in tensors:
        payload += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    digest = hashlib.sha256(bytes(payload)).hexdigest()
    payload += b"sha256:" + digest.encode() + b"\n"
    Path(path).write_bytes(bytes(payload))


def load_checkpoint(path: str | Path) -> EncoderModel:
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointFormatError(f"{path}: bad magic")
    trailer_at = raw.rfind(b"sha256:")
    if trailer_at < 0 or not raw.endswith(b"\n"):
        raise CheckpointFormatError(f"{path}: missing checksum trailer")
    digest = raw[trailer_at + len(b"sha256:"):-1].decode()
    if hashlib.sha256(raw[:trailer_at]).hexdigest() != digest:
        raise CheckpointFormatError(f"{path}: checksum mismatch")

    header_end = raw.index(b"\n", len(CHECKPOINT_MAGIC))
    header = json.loads(raw[len(CHECKPOINT_MAGIC):header_end].decode())
    known = {f.name for f in fields(EncoderConfig)}
    unknown = set(header["config"]) - known
    if unknown:
        raise CheckpointFormatError(f"{path}: unknown config fields {sorted(unknown)}")
    config = EncoderConfig(**header["config"])

    stored = [(name, tuple(shape)) for name, shape in header["tensors"]]
    if stored != expected_shapes(config):
        raise DimensionMismatchError(f"{path}: tensor layout does not match config")

    blob = raw[header_end + 1:trailer_at]
    expected_bytes = sum(int(np.prod(s)) * 8 for _, s in stored)
    if len(blob) != expected_bytes:
        raise CheckpointFormatError(
            f"{path}: expected {expected_bytes} tensor bytes, found {len(blob)}"
        )
    values: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in stored:
        size = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=offset).astype(
            np.float64
        ).reshape(shape)
        values[name] = arr
        offset += size * 8

    layers = []
    for i in range(config.num_layers):
        directions = {}
        for direction in ("forward", "backward"):
            directions[direction] = LstmDirectionParams(
                **{
                    name: values[f"layers.{i}.{direction}.{name}"]
                    for name in ("w_ih", "w_hh", "b_ih", "b_hh")
                }
            )
        layers.append(LstmLayerParams(**directions))
    return EncoderModel(
        config=config,
        embedding=values["embedding"],
        layers=layers,
        head_weight=values["head.weight"],
        head_bias=values["head.bias"],
    )
