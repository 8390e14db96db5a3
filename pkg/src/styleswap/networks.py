"""The five convolutional networks of the adaptation pipeline.

Encoder E maps images to a shared feature space; separator S splits each
feature map into content plus a residual style (content + style equals
the feature map exactly, which is what makes the cross-domain style swap
well defined); generator G decodes a content/style recombination back to
an image; one patch discriminator per domain judges realism.  A fixed,
seeded, orthogonally initialized perceptual net P supplies the multi-layer
features that the content and style losses compare.

All parameters live in a flat name->Tensor map so the optimizer and the
checkpoint format can treat them uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

DOMAINS = ("X", "Y")

# Initial scale of the separator's correction head relative to He init.
# Small values start training with content ~= features and style ~= 0,
# which keeps swapped generations structure-preserving from the outset.
SEPARATOR_HEAD_INIT_SCALE = 0.1

GENERATOR_SIDE_PREFIXES = ("encoder", "separator", "generator")
DISCRIMINATOR_PREFIXES = ("disc_x", "disc_y")


@dataclass(frozen=True)
class NetConfig:
    """Architecture sizes; the defaults are the desk-scale shapes, and a
    4x4 miniature of the same topology serves the end-to-end gradient check."""

    image_size: int = 32
    image_channels: int = 3
    enc_channels: tuple[int, int, int] = (16, 32, 64)
    sep_hidden: int = 16
    gen_channels: tuple[int, int] = (32, 16)
    disc_channels: tuple[int, int] = (16, 32)
    percept_channels: tuple[int, int, int, int] = (4, 8, 16, 32)
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.image_size < 4 or self.image_size % 4 != 0:
            raise ValueError(f"image_size must be a positive multiple of 4, "
                             f"got {self.image_size}")
        for name in ("enc_channels", "gen_channels", "disc_channels",
                     "percept_channels"):
            if any(c < 1 for c in getattr(self, name)):
                raise ValueError(f"{name} entries must be positive")

    @property
    def feature_channels(self) -> int:
        return self.enc_channels[-1]

    @property
    def feature_size(self) -> int:
        # two stride-2 encoder layers
        return self.image_size // 4

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "image_channels": self.image_channels,
            "enc_channels": list(self.enc_channels),
            "sep_hidden": self.sep_hidden,
            "gen_channels": list(self.gen_channels),
            "disc_channels": list(self.disc_channels),
            "percept_channels": list(self.percept_channels),
            "leaky_slope": self.leaky_slope,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown net config keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("enc_channels", "gen_channels", "disc_channels",
                    "percept_channels"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


@dataclass
class LatentSplit:
    """One domain's feature decomposition; content + style == features."""

    content: Tensor
    style: Tensor
    domain: str


def _he_kernel(rng: np.random.Generator, out_ch: int, in_ch: int, k: int,
               gain: float) -> np.ndarray:
    std = gain / math.sqrt(in_ch * k * k)
    return rng.normal(0.0, std, size=(out_ch, in_ch, k, k)).astype(np.float32)


def _orthogonal_kernel(rng: np.random.Generator, out_ch: int, in_ch: int,
                       k: int, gain: float) -> np.ndarray:
    """Rows of the flattened kernel are orthonormal (QR with sign fix)."""
    rows, cols = out_ch, in_ch * k * k
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return (gain * q[:rows, :cols]).reshape(out_ch, in_ch, k, k).astype(np.float32)


def _lrelu_gain(slope: float) -> float:
    return math.sqrt(2.0 / (1.0 + slope * slope))


def init_params(cfg: NetConfig, seed: int) -> dict[str, Tensor]:
    """Deterministic trainable-parameter map for E, S, G, D_X, D_Y."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    params: dict[str, Tensor] = {}
    gain = _lrelu_gain(cfg.leaky_slope)

    def add_conv(name: str, in_ch: int, out_ch: int, head: bool = False,
                 scale: float = 1.0):
        g = (1.0 if head else gain) * scale
        params[f"{name}/kernel"] = Tensor(_he_kernel(rng, out_ch, in_ch, 3, g),
                                          requires_grad=True)
        params[f"{name}/bias"] = Tensor(np.zeros((out_ch, 1, 1), dtype=np.float32),
                                        requires_grad=True)

    c_img = cfg.image_channels
    e1, e2, e3 = cfg.enc_channels
    add_conv("encoder/conv0", c_img, e1)
    add_conv("encoder/conv1", e1, e2)
    add_conv("encoder/conv2", e2, e3)

    add_conv("separator/conv0", e3, cfg.sep_hidden)
    # damped head keeps the initial content/style split content-dominant
    add_conv("separator/conv1", cfg.sep_hidden, e3, head=True,
             scale=SEPARATOR_HEAD_INIT_SCALE)

    g1, g2 = cfg.gen_channels
    add_conv("generator/conv0", e3, g1)
    add_conv("generator/conv1", g1, g2)
    add_conv("generator/conv2", g2, c_img, head=True)

    d1, d2 = cfg.disc_channels
    for disc in DISCRIMINATOR_PREFIXES:
        add_conv(f"{disc}/conv0", c_img, d1)
        add_conv(f"{disc}/conv1", d1, d2)
        add_conv(f"{disc}/conv2", d2, 1, head=True)

    return params


def param_names(cfg: NetConfig) -> list[str]:
    """Canonical parameter ordering (the checkpoint payload order)."""
    return sorted(init_params(cfg, seed=0))


def parameters_with_prefix(params: dict[str, Tensor],
                           prefixes: Iterable[str]) -> dict[str, Tensor]:
    prefixes = tuple(prefixes)
    return {name: t for name, t in params.items()
            if name.split("/", 1)[0] in prefixes}


def parameter_count(params: dict[str, Tensor]) -> int:
    return sum(t.size for t in params.values())


def _conv_block(params: dict[str, Tensor], name: str, x: Tensor, stride: int,
                slope: float, activation: str) -> Tensor:
    out = ad.conv2d(x, params[f"{name}/kernel"], stride=stride, pad=1)
    out = ad.elementwise("add", out, params[f"{name}/bias"])
    if activation == "lrelu":
        return ad.leaky_relu(out, slope)
    if activation == "tanh":
        return ad.tanh(out)
    return out


def _check_image(image: Tensor, cfg: NetConfig, what: str) -> None:
    n = cfg.image_size
    if image.data.ndim != 4 or image.shape[2:] != (n, n) or \
            image.shape[1] != cfg.image_channels:
        raise ShapeError(
            f"{what} expects (N,{cfg.image_channels},{n},{n}), got {image.shape}")


def encode(params: dict[str, Tensor], image: Tensor, cfg: NetConfig) -> Tensor:
    """Image -> shared feature map at quarter resolution."""
    _check_image(image, cfg, "encode")
    s = cfg.leaky_slope
    h = _conv_block(params, "encoder/conv0", image, 2, s, "lrelu")
    h = _conv_block(params, "encoder/conv1", h, 2, s, "lrelu")
    return _conv_block(params, "encoder/conv2", h, 1, s, "lrelu")


def separate(params: dict[str, Tensor], features: Tensor, domain: str,
             cfg: NetConfig) -> LatentSplit:
    """Split features into content (learned) and style (the residual)."""
    expect = (cfg.feature_channels, cfg.feature_size, cfg.feature_size)
    if features.data.ndim != 4 or features.shape[1:] != expect:
        raise ShapeError(f"separate expects (N,{expect[0]},{expect[1]},{expect[2]}), "
                         f"got {features.shape}")
    if domain not in DOMAINS:
        raise ValueError(f"unknown domain {domain!r}")
    s = cfg.leaky_slope
    h = _conv_block(params, "separator/conv0", features, 1, s, "lrelu")
    correction = _conv_block(params, "separator/conv1", h, 1, s, "linear")
    # The correction head is pooled over the spatial grid before it becomes
    # the style code, so style is a per-channel statistic with no room for
    # scene geometry; everything spatial stays in content and a swap can only
    # move appearance.  The damped head init keeps the split content-dominant
    # from the first step.
    n, c = correction.shape[0], correction.shape[1]
    pooled = ad.reshape(ad.mean(correction, axes=(2, 3)), (n, c, 1, 1))
    field = ad.upsample_nearest(pooled, cfg.feature_size)
    content = ad.elementwise("sub", features, field)
    style = ad.elementwise("sub", features, content)
    return LatentSplit(content=content, style=style, domain=domain)


def generate(params: dict[str, Tensor], content: Tensor, style: Tensor,
             cfg: NetConfig) -> Tensor:
    """Decode content + style back to an image in [-1, 1]."""
    if content.shape != style.shape:
        raise ShapeError(f"content {content.shape} and style {style.shape} differ")
    s = cfg.leaky_slope
    h = ad.elementwise("add", content, style)
    h = _conv_block(params, "generator/conv0", h, 1, s, "lrelu")
    h = ad.upsample_nearest(h, 2)
    h = _conv_block(params, "generator/conv1", h, 1, s, "lrelu")
    h = ad.upsample_nearest(h, 2)
    return _conv_block(params, "generator/conv2", h, 1, s, "tanh")


def discriminate(params: dict[str, Tensor], image: Tensor, domain: str,
                 cfg: NetConfig) -> Tensor:
    """Per-patch realism logits from the chosen domain's discriminator."""
    _check_image(image, cfg, "discriminate")
    if domain == "X":
        prefix = "disc_x"
    elif domain == "Y":
        prefix = "disc_y"
    else:
        raise ValueError(f"unknown domain {domain!r}")
    s = cfg.leaky_slope
    h = _conv_block(params, f"{prefix}/conv0", image, 2, s, "lrelu")
    h = _conv_block(params, f"{prefix}/conv1", h, 2, s, "lrelu")
    return _conv_block(params, f"{prefix}/conv2", h, 1, s, "linear")


class PerceptualNet:
    """Fixed feature extractor: four stride-2 convs, orthogonal seeded
    weights, leaky-relu activations exposed per layer (shallow to deep).

    Weights are immutable; gradients flow through the features to the
    images but never into the weights.
    """

    def __init__(self, cfg: NetConfig, seed: int):
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        gain = _lrelu_gain(cfg.leaky_slope)
        self.cfg = cfg
        self.seed = seed
        self.kernels: list[Tensor] = []
        in_ch = cfg.image_channels
        for out_ch in cfg.percept_channels:
            kern = Tensor(_orthogonal_kernel(rng, out_ch, in_ch, 3, gain))
            kern.data.setflags(write=False)
            self.kernels.append(kern)
            in_ch = out_ch

    @property
    def num_layers(self) -> int:
        return len(self.kernels)

    def features(self, image: Tensor) -> list[Tensor]:
        _check_image(image, self.cfg, "perceptual features")
        out = []
        h = image
        for kern in self.kernels:
            h = ad.leaky_relu(ad.conv2d(h, kern, stride=2, pad=1),
                              self.cfg.leaky_slope)
            out.append(h)
        return out
