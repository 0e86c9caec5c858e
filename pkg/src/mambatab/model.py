"""The full network: embedding -> layer norm -> ReLU -> residual blocks -> head.

The embedding learner maps any feature cardinality to a fixed width, so
every non-embedding tensor keeps its shape when features are added over
time; `transfer_weights` exploits that to continue training after the
schema grows. Classification heads emit raw logits (the sigmoid lives
with the loss and metrics), reconstruction heads emit one value per
input feature.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from . import ssm, tensor as T
from .tensor import Tensor

CHECKPOINT_MAGIC = b"MTCK"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Checkpoint file is missing, truncated, corrupt, or wrong version."""


@dataclass
class ModelConfig:
    n_features: int
    embed_dim: int = 32
    state_size: int = 32
    expand: int = 2
    d_conv: int = 4
    n_blocks: int = 1
    seq_len: int = 1
    head: str = "classification"
    use_layer_norm: bool = True

    def __post_init__(self):
        for name in ("n_features", "embed_dim", "state_size", "expand", "d_conv", "n_blocks"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.seq_len != 1:
            raise ValueError("only seq_len == 1 is supported; the embedding forms one token")
        if self.head not in ("classification", "reconstruction"):
            raise ValueError(f"unknown head kind '{self.head}'")

    @property
    def dt_rank(self) -> int:
        return ssm.dt_rank_for(self.embed_dim)

    @property
    def head_out(self) -> int:
        return 1 if self.head == "classification" else self.n_features

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "embed_dim": self.embed_dim,
            "state_size": self.state_size,
            "expand": self.expand,
            "d_conv": self.d_conv,
            "n_blocks": self.n_blocks,
            "seq_len": self.seq_len,
            "head": self.head,
            "use_layer_norm": self.use_layer_norm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class MambaTabModel:
    def __init__(self, config: ModelConfig, rng: np.random.Generator | int = 0):
        rng = np.random.default_rng(rng)
        self.config = config
        d = config.embed_dim
        bound = 1.0 / math.sqrt(config.n_features)
        self.embed_w = Tensor(rng.uniform(-bound, bound, size=(config.n_features, d)),
                              requires_grad=True)
        self.embed_b = Tensor(np.zeros(d), requires_grad=True)
        self.ln_gamma = Tensor(np.ones(d), requires_grad=True)
        self.ln_beta = Tensor(np.zeros(d), requires_grad=True)
        self.blocks = [
            ssm.init_mamba_block(d, config.expand, config.state_size, config.d_conv, rng)
            for _ in range(config.n_blocks)
        ]
        self.head_w, self.head_b = _init_head(config, rng)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        params = [
            ("embed.w", self.embed_w),
            ("embed.b", self.embed_b),
            ("ln.gamma", self.ln_gamma),
            ("ln.beta", self.ln_beta),
        ]
        for i, block in enumerate(self.blocks):
            params += [(f"blocks.{i}.{n}", p) for n, p in block.named_parameters()]
        params += [("head.w", self.head_w), ("head.b", self.head_b)]
        return params

    def zero_grad(self) -> None:
        for _, p in self.named_parameters():
            p.zero_grad()

    def forward(self, x) -> Tensor:
        """Logits [B, 1] (classification) or reconstruction [B, n_features].

        ``x`` is a [B, n_features] array of values in [0, 1], or a Tensor.
        """
        if not isinstance(x, Tensor):
            x = Tensor(x)
        if x.shape[-1] != self.config.n_features:
            raise ValueError(
                f"input has {x.shape[-1]} features, model expects {self.config.n_features}")
        h = T.linear(x, self.embed_w, self.embed_b)
        if self.config.use_layer_norm:
            h = T.layer_norm(h, self.ln_gamma, self.ln_beta)
        h = T.relu(h)
        h = T.reshape(h, (x.shape[0], self.config.seq_len, self.config.embed_dim))
        for block in self.blocks:
            h = ssm.mamba_block_forward(block, h) + h
        flat = T.reshape(h, (x.shape[0], self.config.seq_len * self.config.embed_dim))
        return T.linear(flat, self.head_w, self.head_b)

    def predict_proba(self, values: np.ndarray, batch_size: int = 1024) -> np.ndarray:
        """Classification probabilities for [m, n_features] rows, chunked."""
        if self.config.head != "classification":
            raise ValueError("predict_proba requires a classification head")
        chunks = [
            expit(self.forward(values[i:i + batch_size]).data[:, 0])
            for i in range(0, len(values), batch_size)
        ]
        return np.concatenate(chunks)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        if set(own) != set(state):
            raise ValueError(f"state dict keys mismatch: {sorted(set(own) ^ set(state))}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for '{name}': {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()

    def clone(self) -> "MambaTabModel":
        out = MambaTabModel(self.config, rng=0)
        out.load_state_dict(self.state_dict())
        return out


def _init_head(config: ModelConfig, rng: np.random.Generator):
    fan_in = config.seq_len * config.embed_dim
    bound = 1.0 / math.sqrt(fan_in)
    w = Tensor(rng.uniform(-bound, bound, size=(fan_in, config.head_out)), requires_grad=True)
    b = Tensor(np.zeros(config.head_out), requires_grad=True)
    return w, b


def count_parameters(model: MambaTabModel) -> int:
    return sum(p.size for _, p in model.named_parameters())


def transfer_weights(old: MambaTabModel, new_config: ModelConfig,
                     column_mapping: list[int]) -> MambaTabModel:
    """Grow a model to a larger feature set, keeping everything it learned.

    ``column_mapping[i]`` is the new index of old feature i. Embedding
    rows for retained features are copied, rows for new features start
    at zero (so, fed zeros or with untouched inputs, the grown model
    reproduces the old one exactly); all other tensors copy verbatim.
    """
    if len(column_mapping) != old.config.n_features:
        raise ValueError("column_mapping must cover every old feature")
    if len(set(column_mapping)) != len(column_mapping):
        raise ValueError("column_mapping must be injective")
    if any(j < 0 or j >= new_config.n_features for j in column_mapping):
        raise ValueError("column_mapping index out of range")
    if replace(old.config, n_features=new_config.n_features) != new_config:
        raise ValueError("only n_features may change across a transfer")
    new = MambaTabModel(new_config, rng=0)
    state = old.state_dict()
    embed_w = np.zeros((new_config.n_features, new_config.embed_dim))
    embed_w[column_mapping, :] = state.pop("embed.w")
    state["embed.w"] = embed_w
    if new_config.head == "reconstruction":
        raise ValueError("transfer with a reconstruction head is not supported")
    new.load_state_dict(state)
    return new


def swap_head(model: MambaTabModel, head: str, rng: np.random.Generator | int) -> MambaTabModel:
    """Same body, freshly initialized head of the requested kind."""
    config = replace(model.config, head=head)
    new = MambaTabModel(config, rng=0)
    state = model.state_dict()
    new_w, new_b = _init_head(config, np.random.default_rng(rng))
    state["head.w"] = new_w.data
    state["head.b"] = new_b.data
    new.load_state_dict(state)
    return new


# -- checkpoint container -----------------------------------------------------
#
# Layout: magic, u32 version, u64-length JSON header (config, metadata,
# tensor names/shapes in order), then raw little-endian float64 tensor
# payloads back to back. Everything is a pure function of the content,
# so identical models produce identical bytes.

def save(model: MambaTabModel, path, metadata: dict | None = None) -> None:
    state = model.state_dict()
    header = {
        "config": model.config.to_dict(),
        "metadata": metadata or {},
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in state.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for name, arr in state.items():
            fh.write(arr.astype("<f8").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load(path) -> MambaTabModel:
    model, _ = load_with_metadata(path)
    return model


def load_with_metadata(path) -> tuple[MambaTabModel, dict]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a model checkpoint")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<Q", _read_exact(fh, 8, "header length"))
        try:
            header = json.loads(_read_exact(fh, header_len, "header"))
        except json.JSONDecodeError as e:
            raise CheckpointError(f"corrupt checkpoint header: {e}") from None
        config = ModelConfig.from_dict(header["config"])
        state = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            n_bytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
            raw = _read_exact(fh, n_bytes, f"tensor '{entry['name']}'")
            state[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape)
        if fh.read(1):
            raise CheckpointError("trailing bytes after checkpoint payload")
    model = MambaTabModel(config, rng=0)
    try:
        model.load_state_dict(state)
    except ValueError as e:
        raise CheckpointError(str(e)) from None
    return model, header["metadata"]
