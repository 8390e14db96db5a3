"""Training objectives: reconstruction, latent consistency, adversarial,
and the two interchangeable style losses (Gram matrix vs sliced 1-D
optimal transport), plus the perceptual combination and the weighted total.

Conventions shared by every loss here:

- all squared norms are means over elements, so magnitudes do not scale
  with resolution or batch size;
- losses are means over batch elements;
- every function builds on the tensor core, so gradients flow whenever a
  computation record is active.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

# Probabilities inside the log adversarial loss are clamped to
# [SIGMOID_EPS, 1 - SIGMOID_EPS] so the loss stays finite.
SIGMOID_EPS = 1e-6


@dataclass(frozen=True)
class LossWeights:
    """Weights of the four generator loss terms and the content/style balance."""

    alpha_rec: float = 2.0
    alpha_con: float = 1.0
    alpha_gan: float = 0.5
    alpha_per: float = 1.0
    lambda_style: float = 1e3

    def __post_init__(self):
        vals = (self.alpha_rec, self.alpha_con, self.alpha_gan,
                self.alpha_per, self.lambda_style)
        if any(v < 0 for v in vals):
            raise ValueError(f"loss weights must be non-negative, got {vals}")
        if not any(v > 0 for v in vals[:4]):
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class PerceptualLayerSpec:
    """Which perceptual-net layers feed the content and style terms.

    Content uses only the deepest layer; style uses every layer except the
    deepest.  Both index sets are stored explicitly so masking tests can
    interrogate them, but the constructor enforces this fixed selection.
    """

    num_layers: int
    content_layers: tuple[int, ...] = ()
    style_layers: tuple[int, ...] = ()

    def __post_init__(self):
        if self.num_layers < 2:
            raise ValueError("need at least 2 perceptual layers")
        expected_content = (self.num_layers - 1,)
        expected_style = tuple(range(self.num_layers - 1))
        if not self.content_layers:
            object.__setattr__(self, "content_layers", expected_content)
        if not self.style_layers:
            object.__setattr__(self, "style_layers", expected_style)
        if tuple(self.content_layers) != expected_content:
            raise ValueError(
                f"content layers must be the final layer only, got {self.content_layers}")
        if tuple(self.style_layers) != expected_style:
            raise ValueError(
                f"style layers must be all but the final layer, got {self.style_layers}")


@dataclass(frozen=True)
class SWDConfig:
    """Monte Carlo settings for the sliced 1-D transport style loss."""

    num_projections: int = 32
    rng_seed_policy: str = "fresh_each_step"

    def __post_init__(self):
        if self.num_projections < 1:
            raise ValueError(f"num_projections must be >= 1, got {self.num_projections}")
        if self.rng_seed_policy not in ("fresh_each_step", "fixed"):
            raise ValueError(f"unknown rng_seed_policy {self.rng_seed_policy!r}")


def _require_same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {a.shape} and {b.shape} differ")


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference."""
    _require_same_shape(a, b, "l1_loss")
    return ad.mean(ad.absolute(ad.elementwise("sub", a, b)))


def reconstruction_loss(input_image: Tensor, reconstructed: Tensor) -> Tensor:
    """How far the decode of an un-swapped latent lands from its source image."""
    return l1_loss(input_image, reconstructed)


def consistency_loss(orig, reencoded) -> Tensor:
    """Latent round-trip penalty for one domain.

    ``orig`` carries the domain's first-pass content/style; ``reencoded``
    carries the content recovered from the converted image that took this
    domain's content, and the style recovered from the converted image
    that took this domain's style.  Both arguments just need ``content``
    and ``style`` tensor attributes.
    """
    return ad.elementwise(
        "add",
        l1_loss(orig.content, reencoded.content),
        l1_loss(orig.style, reencoded.style))


def _clamped_sigmoid(logits: Tensor) -> Tensor:
    return ad.clamp(ad.sigmoid(logits), SIGMOID_EPS, 1.0 - SIGMOID_EPS)


def gan_loss_log(d_real: Optional[Tensor], d_fake: Tensor, side: str) -> Tensor:
    """Log-form adversarial loss on raw patch logits.

    Discriminator side scores real patches toward 1 and fake toward 0;
    generator side uses the non-saturating form that pushes fake patches
    toward 1 directly.
    """
    if side == "discriminator":
        if d_real is None:
            raise ValueError("discriminator side requires real logits")
        real_term = ad.mean(ad.log(_clamped_sigmoid(d_real)))
        fake_term = ad.mean(ad.log(1.0 - _clamped_sigmoid(d_fake)))
        return -(real_term + fake_term)
    if side == "generator":
        return -ad.mean(ad.log(_clamped_sigmoid(d_fake)))
    raise ValueError(f"unknown side {side!r}")


def gan_loss_hinge(d_real: Optional[Tensor], d_fake: Tensor, side: str) -> Tensor:
    """Margin adversarial loss: real logits pushed above +1, fake below -1."""
    if side == "discriminator":
        if d_real is None:
            raise ValueError("discriminator side requires real logits")
        real_term = ad.mean(ad.relu(1.0 - d_real))
        fake_term = ad.mean(ad.relu(1.0 + d_fake))
        return ad.elementwise("add", real_term, fake_term)
    if side == "generator":
        return -ad.mean(d_fake)
    raise ValueError(f"unknown side {side!r}")


def gan_loss(d_real: Optional[Tensor], d_fake: Tensor, side: str, kind: str) -> Tensor:
    if kind == "log":
        return gan_loss_log(d_real, d_fake, side)
    if kind == "hinge":
        return gan_loss_hinge(d_real, d_fake, side)
    raise ValueError(f"unknown gan loss kind {kind!r}")


def content_loss(p_orig: Sequence[Tensor], p_conv: Sequence[Tensor],
                 spec: PerceptualLayerSpec) -> Tensor:
    """Mean squared feature distance on the content layers only."""
    if len(p_orig) != len(p_conv) or len(p_orig) != spec.num_layers:
        raise ShapeError(
            f"content_loss: got {len(p_orig)} and {len(p_conv)} feature layers, "
            f"spec expects {spec.num_layers}")
    out = None
    for layer in spec.content_layers:
        _require_same_shape(p_orig[layer], p_conv[layer], f"content_loss layer {layer}")
        diff = ad.elementwise("sub", p_orig[layer], p_conv[layer])
        term = ad.mean(ad.elementwise("mul", diff, diff))
        out = term if out is None else ad.elementwise("add", out, term)
    return out


def gram_matrix(features: Tensor) -> Tensor:
    """Channel co-activation matrix per batch element, (N,C,H,W) -> (N,C,C).

    Rows of the flattened feature map are multiplied pairwise and scaled
    by 1/(C*H*W) so the statistic is resolution independent.
    """
    if features.data.ndim != 4:
        raise ShapeError(f"gram_matrix expects NCHW, got {features.shape}")
    n, c, h, w = features.shape
    flat = ad.reshape(features, (n, c, h * w))
    gram = ad.bmm(flat, ad.transpose(flat, (0, 2, 1)))
    return gram * (1.0 / (c * h * w))


def gram_style_loss(p_ref: Sequence[Tensor], p_conv: Sequence[Tensor],
                    spec: PerceptualLayerSpec) -> Tensor:
    """Mean squared difference of channel co-activation matrices on the
    style layers."""
    if len(p_ref) != len(p_conv) or len(p_ref) != spec.num_layers:
        raise ShapeError(
            f"gram_style_loss: got {len(p_ref)} and {len(p_conv)} feature layers, "
            f"spec expects {spec.num_layers}")
    out = None
    for layer in spec.style_layers:
        _require_same_shape(p_ref[layer], p_conv[layer], f"gram_style_loss layer {layer}")
        diff = ad.elementwise("sub", gram_matrix(p_ref[layer]), gram_matrix(p_conv[layer]))
        term = ad.mean(ad.elementwise("mul", diff, diff))
        out = term if out is None else ad.elementwise("add", out, term)
    return out


def sw1d(s: Tensor, s_prime: Tensor) -> Tensor:
    """Exact squared transport cost between two equal-size 1-D point sets.

    Sorting both sets and matching by rank is the optimal assignment on
    the line, so this is mean((sort(s) - sort(s'))^2).
    """
    if s.data.ndim != 1 or s_prime.data.ndim != 1:
        raise ShapeError(f"sw1d expects 1-D inputs, got {s.shape} and {s_prime.shape}")
    if s.shape != s_prime.shape:
        raise ShapeError(f"sw1d: lengths {s.shape[0]} and {s_prime.shape[0]} differ")
    diff = ad.elementwise("sub", ad.sort_lastdim(s)[0], ad.sort_lastdim(s_prime)[0])
    return ad.mean(ad.elementwise("mul", diff, diff))


def _unit_directions(channels: int, k: int, rng: np.random.Generator,
                     dtype) -> Tensor:
    """K columns drawn standard normal then normalized, i.e. uniform on the
    unit sphere in channel space.  Normalization happens in float64."""
    mat = rng.standard_normal((channels, k))
    norms = np.linalg.norm(mat, axis=0)
    while (norms < 1e-12).any():  # essentially impossible, but stay total
        redraw = norms < 1e-12
        mat[:, redraw] = rng.standard_normal((channels, int(redraw.sum())))
        norms = np.linalg.norm(mat, axis=0)
    return Tensor((mat / norms).astype(dtype))


def _as_pixel_sets(f: Tensor) -> Tensor:
    """(N,C,H,W) -> (N, H*W, C): each row is one pixel's channel vector."""
    n, c, h, w = f.shape
    return ad.reshape(ad.transpose(f, (0, 2, 3, 1)), (n, h * w, c))


def sliced_wasserstein(f: Tensor, f_prime: Tensor, cfg: SWDConfig,
                       rng: np.random.Generator) -> Tensor:
    """Monte Carlo sliced transport cost between two per-pixel feature sets.

    Each image's pixels form a set of C-dimensional points.  For K random
    unit directions the points are projected to 1-D, and the exact sorted
    transport cost is averaged over directions and batch elements.  If the
    two inputs have different pixel counts, the larger set is subsampled
    (seeded) to match.
    """
    if f.data.ndim != 4 or f_prime.data.ndim != 4:
        raise ShapeError(
            f"sliced_wasserstein expects NCHW, got {f.shape} and {f_prime.shape}")
    if f.shape[0] != f_prime.shape[0]:
        raise ShapeError(f"batch sizes {f.shape[0]} and {f_prime.shape[0]} differ")
    if f.shape[1] != f_prime.shape[1]:
        raise ShapeError(f"channel counts {f.shape[1]} and {f_prime.shape[1]} differ")
    n, c = f.shape[0], f.shape[1]
    a = _as_pixel_sets(f)
    b = _as_pixel_sets(f_prime)
    na, nb = a.shape[1], b.shape[1]
    if na != nb:
        m = min(na, nb)
        if na > m:
            a = ad.take_indices(a, np.sort(rng.choice(na, size=m, replace=False)), axis=1)
        else:
            b = ad.take_indices(b, np.sort(rng.choice(nb, size=m, replace=False)), axis=1)
    m = a.shape[1]
    dirs = _unit_directions(c, cfg.num_projections, rng, f.data.dtype)
    k = cfg.num_projections

    def project_and_sort(x: Tensor) -> Tensor:
        # (N,m,C) @ (C,K) -> (N,m,K), then sort each direction's point list
        flat = ad.matmul(ad.reshape(x, (n * m, c)), dirs)
        per_dir = ad.transpose(ad.reshape(flat, (n, m, k)), (0, 2, 1))
        return ad.sort_lastdim(per_dir)[0]

    diff = ad.elementwise("sub", project_and_sort(a), project_and_sort(b))
    return ad.mean(ad.elementwise("mul", diff, diff))


def swd_style_loss(p_ref: Sequence[Tensor], p_conv: Sequence[Tensor],
                   spec: PerceptualLayerSpec, cfg: SWDConfig,
                   rng: np.random.Generator) -> Tensor:
    """Sliced transport style loss summed over the style layers, with fresh
    independent projection directions for each layer."""
    if len(p_ref) != len(p_conv) or len(p_ref) != spec.num_layers:
        raise ShapeError(
            f"swd_style_loss: got {len(p_ref)} and {len(p_conv)} feature layers, "
            f"spec expects {spec.num_layers}")
    out = None
    for layer in spec.style_layers:
        term = sliced_wasserstein(p_ref[layer], p_conv[layer], cfg, rng)
        out = term if out is None else ad.elementwise("add", out, term)
    return out


def perceptual_loss(content_term: Tensor, style_term: Tensor,
                    lambda_style: float) -> Tensor:
    """Content plus lambda-weighted style."""
    return ad.elementwise("add", content_term, style_term * lambda_style)


def total_domain_loss(rec: Tensor, con: Tensor, gan: Tensor, per: Tensor,
                      w: LossWeights) -> Tensor:
    """Weighted sum of the four per-domain generator terms."""
    out = rec * w.alpha_rec
    out = ad.elementwise("add", out, con * w.alpha_con)
    out = ad.elementwise("add", out, gan * w.alpha_gan)
    return ad.elementwise("add", out, per * w.alpha_per)
