"""Model parameter containers.

All parameters are 2-D float64 tensors addressed by dotted names. The list
returned by ``model_specs`` is the single source of truth for names, shapes
and declaration order; the typed views below are read from a bundle by name.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass

import numpy as np

from pttreg.config import ModelConfig
from pttreg.constants import STREAM_WEIGHTS
from pttreg.numerics.linalg import Matrix, layer_norm, mlp2
from pttreg.numerics.rng import make_rng, uniform_init
from pttreg.utils.exceptions import ContractViolationError, WeightsFormatError

TensorSpec = tuple[str, tuple[int, int]]


def mha_specs(prefix: str, d_model: int) -> list[TensorSpec]:
    return [(f"{prefix}.{n}", (d_model, d_model)) for n in ("w_q", "w_k", "w_v", "w_o")]


def mlp_specs(prefix: str, d_in: int, d_hidden: int, d_out: int) -> list[TensorSpec]:
    return [
        (f"{prefix}.w1", (d_in, d_hidden)),
        (f"{prefix}.b1", (1, d_hidden)),
        (f"{prefix}.w2", (d_hidden, d_out)),
        (f"{prefix}.b2", (1, d_out)),
    ]


def norm_specs(prefix: str, d_model: int) -> list[TensorSpec]:
    return [(f"{prefix}.gamma", (1, d_model)), (f"{prefix}.beta", (1, d_model))]


def attention_prefixes(prefix: str, cfg: ModelConfig, tree_layers: int) -> list[str]:
    """One MHA prefix when parameters are shared, else one per tree layer."""
    if cfg.shared_params:
        return [prefix]
    return [f"{prefix}.l{layer}" for layer in range(tree_layers)]


def model_specs(cfg: ModelConfig, tree_layers: int) -> list[TensorSpec]:
    """Names and shapes of every model tensor, in declaration order."""
    d = cfg.d_model
    specs: list[TensorSpec] = mlp_specs("embed", 3, d, d)
    for i in range(cfg.encoder_layers):
        p = f"encoder.{i}"
        for branch in ("self", "cross"):
            specs += norm_specs(f"{p}.{branch}.norm", d)
            specs += mlp_specs(f"{p}.{branch}.pool", d + 3, d, d)
            for mha in attention_prefixes(f"{p}.{branch}.attn", cfg, tree_layers):
                specs += mha_specs(mha, d)
        specs += norm_specs(f"{p}.ffn.norm", d)
        specs += mlp_specs(f"{p}.ffn", d, 2 * d, d)
    specs += mlp_specs("decoder.coords", d, d, 3)
    specs += [("decoder.overlap.w", (d, 1)), ("decoder.overlap.b", (1, 1))]
    specs += [("loss.w_f", (d, d))]
    return specs


@dataclass(frozen=True, slots=True)
class ParameterBundle(Mapping[str, Matrix]):
    """Ordered, read-only collection of named tensors."""

    tensors: dict[str, Matrix]

    def __getitem__(self, name: str) -> Matrix:
        try:
            return self.tensors[name]
        except KeyError:
            raise WeightsFormatError("missing tensor", name) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def check_specs(self, specs: list[TensorSpec]) -> None:
        """Raise WeightsFormatError naming the first tensor that differs from specs."""
        declared = dict(specs)
        for name, shape in specs:
            if name not in self.tensors:
                raise WeightsFormatError("missing tensor", name)
            if self.tensors[name].shape != shape:
                raise WeightsFormatError(
                    f"shape {self.tensors[name].shape} does not match config {shape}", name
                )
        for name in self.tensors:
            if name not in declared:
                raise WeightsFormatError("tensor not declared by the config", name)


def init_bundle(cfg: ModelConfig, tree_layers: int, seed: int) -> ParameterBundle:
    """Seeded initialisation: uniform weights, unit gamma and zero beta for norms."""
    rng = make_rng(seed, STREAM_WEIGHTS)
    tensors: dict[str, Matrix] = {}
    for name, (rows, cols) in model_specs(cfg, tree_layers):
        if name.endswith(".gamma"):
            value = np.ones((rows, cols))
        elif name.endswith(".beta"):
            value = np.zeros((rows, cols))
        else:
            value = uniform_init(rng, rows, cols, cfg.d_model)
        value.flags.writeable = False
        tensors[name] = value
    return ParameterBundle(tensors)


@dataclass(frozen=True, slots=True)
class MhaWeights:
    """Multi-head projections stored head-blocked along columns.

    Head h uses columns ``h*d_k:(h+1)*d_k`` of w_q/w_k/w_v and rows
    ``h*d_k:(h+1)*d_k`` of w_o.
    """

    w_q: Matrix
    w_k: Matrix
    w_v: Matrix
    w_o: Matrix
    heads: int

    def __post_init__(self) -> None:
        d = self.w_q.shape[0]
        if self.heads < 1 or self.w_q.shape[1] % self.heads != 0:
            raise ContractViolationError(f"{self.w_q.shape[1]} columns cannot split into {self.heads} heads")
        width = self.w_q.shape[1]
        for name, w in (("w_q", self.w_q), ("w_k", self.w_k), ("w_v", self.w_v)):
            if w.shape != (d, width):
                raise ContractViolationError(f"{name} has shape {w.shape}, expected {(d, width)}")
        if self.w_o.shape != (width, d):
            raise ContractViolationError(f"w_o has shape {self.w_o.shape}, expected {(width, d)}")

    @classmethod
    def from_bundle(cls, bundle: Mapping[str, Matrix], prefix: str, heads: int) -> MhaWeights:
        return cls(
            bundle[f"{prefix}.w_q"],
            bundle[f"{prefix}.w_k"],
            bundle[f"{prefix}.w_v"],
            bundle[f"{prefix}.w_o"],
            heads,
        )

    @classmethod
    def random(cls, d_model: int, heads: int, seed: int) -> MhaWeights:
        """Stand-alone seeded weights, used by tests and the benchmark."""
        rng = make_rng(seed, STREAM_WEIGHTS)
        mats = [uniform_init(rng, d_model, d_model, d_model) for _ in range(4)]
        return cls(*mats, heads=heads)

    @property
    def d_model(self) -> int:
        return int(self.w_q.shape[0])

    @property
    def head_dim(self) -> int:
        return int(self.w_q.shape[1]) // self.heads


@dataclass(frozen=True, slots=True)
class MlpWeights:
    """Two-layer perceptron relu(x w1 + b1) w2 + b2."""

    w1: Matrix
    b1: Matrix
    w2: Matrix
    b2: Matrix

    @classmethod
    def from_bundle(cls, bundle: Mapping[str, Matrix], prefix: str) -> MlpWeights:
        return cls(
            bundle[f"{prefix}.w1"], bundle[f"{prefix}.b1"], bundle[f"{prefix}.w2"], bundle[f"{prefix}.b2"]
        )

    def __call__(self, x: Matrix) -> Matrix:
        return mlp2(x, self.w1, self.b1, self.w2, self.b2)


@dataclass(frozen=True, slots=True)
class NormWeights:
    gamma: Matrix
    beta: Matrix

    @classmethod
    def from_bundle(cls, bundle: Mapping[str, Matrix], prefix: str) -> NormWeights:
        return cls(bundle[f"{prefix}.gamma"], bundle[f"{prefix}.beta"])

    def __call__(self, x: Matrix) -> Matrix:
        return layer_norm(x, self.gamma, self.beta)


@dataclass(frozen=True, slots=True)
class BranchWeights:
    """Pooling + PTA sub-layer pair (self or cross) of one encoder layer."""

    norm: NormWeights
    pool: MlpWeights
    attn: tuple[MhaWeights, ...]


@dataclass(frozen=True, slots=True)
class EncoderLayerWeights:
    self_branch: BranchWeights
    cross_branch: BranchWeights
    ffn_norm: NormWeights
    ffn: MlpWeights


@dataclass(frozen=True, slots=True)
class DecoderWeights:
    """Correspondence head (two-layer MLP) and overlap head (single FC)."""

    coords: MlpWeights
    overlap_w: Matrix
    overlap_b: Matrix


@dataclass(frozen=True, slots=True)
class ModelWeights:
    """Typed view over a full parameter bundle."""

    embed: MlpWeights
    encoder: tuple[EncoderLayerWeights, ...]
    decoder: DecoderWeights
    w_f: Matrix

    @classmethod
    def from_bundle(cls, bundle: ParameterBundle, cfg: ModelConfig, tree_layers: int) -> ModelWeights:
        bundle.check_specs(model_specs(cfg, tree_layers))

        def branch(prefix: str) -> BranchWeights:
            return BranchWeights(
                NormWeights.from_bundle(bundle, f"{prefix}.norm"),
                MlpWeights.from_bundle(bundle, f"{prefix}.pool"),
                tuple(
                    MhaWeights.from_bundle(bundle, p, cfg.heads)
                    for p in attention_prefixes(f"{prefix}.attn", cfg, tree_layers)
                ),
            )

        layers = tuple(
            EncoderLayerWeights(
                branch(f"encoder.{i}.self"),
                branch(f"encoder.{i}.cross"),
                NormWeights.from_bundle(bundle, f"encoder.{i}.ffn.norm"),
                MlpWeights.from_bundle(bundle, f"encoder.{i}.ffn"),
            )
            for i in range(cfg.encoder_layers)
        )
        return cls(
            embed=MlpWeights.from_bundle(bundle, "embed"),
            encoder=layers,
            decoder=DecoderWeights(
                MlpWeights.from_bundle(bundle, "decoder.coords"),
                bundle["decoder.overlap.w"],
                bundle["decoder.overlap.b"],
            ),
            w_f=bundle["loss.w_f"],
        )
