"""Synthetic two-domain glyph dataset.

Domain X is clean grayscale digit strokes (bright on dark); domain Y is a
stylized variant whose default look inverts polarity: dark tinted digits
over a bright blocky color-noise background.  The polarity flip is what
creates the domain gap a naive classifier cannot cross.

Generation is a pure function of the dataset spec: every sample gets its
own RNG stream spawned from the master seed, so samples are reproducible
individually and generation order never matters.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

IMAGE_SIZE = 32
MANIFEST_SCHEMA_VERSION = 1

DOMAIN_X_STYLES = ("grayscale_clean",)
DOMAIN_Y_STYLES = ("color_texture", "inverted_noise")

# jitter ranges for render_glyph
TRANSLATE_PX = 2.0
STROKE_WIDTH_RANGE = (1.0, 3.0)
ROTATE_DEG = 10.0

# a pixel is "inked" when its value clearly exceeds the -1 background
INK_THRESHOLD = -0.999


def _load_templates() -> dict[int, list[np.ndarray]]:
    raw = json.loads(
        resources.files("styleswap").joinpath("glyph_templates.json").read_text())
    out = {}
    for key, polylines in raw["digits"].items():
        out[int(key)] = [np.asarray(p, dtype=np.float64) for p in polylines]
    return out


_TEMPLATES = _load_templates()


@dataclass(frozen=True)
class GlyphSample:
    image: np.ndarray  # (C, 32, 32) float32 in [-1, 1]
    label: int
    domain: str  # "X" or "Y"


@dataclass(frozen=True)
class DatasetSpec:
    num_train: int
    num_test: int
    seed: int
    domain_x_style: str = "grayscale_clean"
    domain_y_style: str = "color_texture"

    def __post_init__(self):
        if self.num_train < 1 or self.num_test < 1:
            raise ValueError("num_train and num_test must be positive")
        if self.domain_x_style not in DOMAIN_X_STYLES:
            raise ValueError(f"unknown domain_x_style {self.domain_x_style!r}")
        if self.domain_y_style not in DOMAIN_Y_STYLES:
            raise ValueError(f"unknown domain_y_style {self.domain_y_style!r}")

    @classmethod
    def from_json(cls, text: str) -> "DatasetSpec":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("dataset spec must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown dataset spec keys: {sorted(unknown)}")
        missing = {"num_train", "num_test", "seed"} - set(data)
        if missing:
            raise ValueError(f"dataset spec missing keys: {sorted(missing)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _segment_distances(px: np.ndarray, py: np.ndarray,
                       a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point (px,py) to segment a-b, all in pixel units."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        t = np.zeros_like(px)
    else:
        t = np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / denom, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * ab[0]), py - (a[1] + t * ab[1]))


def render_glyph(label: int, rng: np.random.Generator) -> np.ndarray:
    """Rasterize one digit with seeded jitter; (1,32,32) float32 in [-1,1].

    Strokes are distance fields around the template polylines with a soft
    half-pixel edge.  Jitter: rotation up to +-10 degrees around the
    canvas center, translation up to +-2 px, stroke width 1-3 px.  RNG
    consumption order (angle, dx, dy, width) is part of the format.
    """
    if not 0 <= label <= 9:
        raise ValueError(f"label must be in [0, 9], got {label}")
    angle = np.deg2rad(rng.uniform(-ROTATE_DEG, ROTATE_DEG))
    dx = rng.uniform(-TRANSLATE_PX, TRANSLATE_PX)
    dy = rng.uniform(-TRANSLATE_PX, TRANSLATE_PX)
    width = rng.uniform(*STROKE_WIDTH_RANGE)
    radius = width / 2.0

    cos_a, sin_a = np.cos(angle), np.sin(angle)
    rot = np.array([[cos_a, -sin_a], [sin_a, cos_a]])
    center = IMAGE_SIZE / 2.0

    grid = np.arange(IMAGE_SIZE, dtype=np.float64) + 0.5
    py, px = np.meshgrid(grid, grid, indexing="ij")
    px, py = px.ravel(), py.ravel()

    dist = np.full(px.shape, np.inf)
    for polyline in _TEMPLATES[label]:
        pts = (polyline * IMAGE_SIZE - center) @ rot.T + center + (dx, dy)
        for a, b in zip(pts[:-1], pts[1:]):
            dist = np.minimum(dist, _segment_distances(px, py, a, b))

    intensity = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    img = (2.0 * intensity - 1.0).reshape(1, IMAGE_SIZE, IMAGE_SIZE)
    return img.astype(np.float32)


def ink_fraction(image: np.ndarray) -> float:
    """Fraction of pixels carrying any stroke intensity."""
    return float(np.mean(image[0] > INK_THRESHOLD))


def stylize(image: np.ndarray, style: str, rng: np.random.Generator, *,
            fg_range: tuple[float, float] = (-1.0, -0.3),
            bg_range: tuple[float, float] = (0.0, 1.0),
            noise_sigma: float = 0.1) -> np.ndarray:
    """Map a (1,32,32) grayscale glyph to a (3,32,32) domain-Y image.

    color_texture: the glyph intensity linearly interpolates between a
    per-channel foreground tint (dark by default) and a per-pixel bright
    blocky noise background.  With fg_range=(1,1), bg_range=(-1,-1) and
    zero noise this reduces to exact channel replication of the input.

    inverted_noise: polarity flip plus Gaussian noise.
    """
    if image.ndim != 3 or image.shape[0] != 1:
        raise ValueError(f"stylize expects a (1,H,W) glyph, got {image.shape}")
    if style == "color_texture":
        blocks = rng.uniform(bg_range[0], bg_range[1], size=(3, 8, 8))
        bg = blocks.repeat(4, axis=1).repeat(4, axis=2)
        if noise_sigma > 0:
            bg = bg + rng.normal(0.0, noise_sigma, size=bg.shape)
        tint = rng.uniform(fg_range[0], fg_range[1], size=(3, 1, 1))
        # affine in the glyph value: -1 lands on bg, +1 lands on tint
        scale = (tint - bg) * 0.5
        offset = (tint + bg) * 0.5
        out = image.astype(np.float64) * scale + offset
    elif style == "inverted_noise":
        out = np.repeat(-image.astype(np.float64), 3, axis=0)
        if noise_sigma > 0:
            out = out + rng.normal(0.0, noise_sigma, size=out.shape)
    else:
        raise ValueError(f"unknown style {style!r}")
    return np.clip(out, -1.0, 1.0).astype(np.float32)


def _balanced_labels(n: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.arange(n) % 10
    rng.shuffle(labels)
    return labels


def _build_split(seed_seq: np.random.SeedSequence, n: int, domain: str,
                 y_style: str) -> list[GlyphSample]:
    streams = seed_seq.spawn(n + 1)
    labels = _balanced_labels(n, np.random.default_rng(streams[0]))
    samples = []
    for i in range(n):
        rng = np.random.default_rng(streams[i + 1])
        img = render_glyph(int(labels[i]), rng)
        if domain == "Y":
            img = stylize(img, y_style, rng)
        samples.append(GlyphSample(image=img, label=int(labels[i]), domain=domain))
    return samples


def make_dataset(spec: DatasetSpec):
    """Build ((x_train, y_train), (x_test, y_test)) deterministically.

    Four independent RNG streams (one per split/domain) are spawned from
    the master seed, so changing e.g. num_test never perturbs training
    samples of the other splits.
    """
    root = np.random.SeedSequence(spec.seed)
    x_train_ss, x_test_ss, y_train_ss, y_test_ss = root.spawn(4)
    x_train = _build_split(x_train_ss, spec.num_train, "X", spec.domain_y_style)
    x_test = _build_split(x_test_ss, spec.num_test, "X", spec.domain_y_style)
    y_train = _build_split(y_train_ss, spec.num_train, "Y", spec.domain_y_style)
    y_test = _build_split(y_test_ss, spec.num_test, "Y", spec.domain_y_style)
    return (x_train, y_train), (x_test, y_test)


def replicate_channels(image: np.ndarray) -> np.ndarray:
    """(1,H,W) -> (3,H,W); 3-channel images pass through unchanged."""
    if image.shape[0] == 3:
        return image
    return np.repeat(image, 3, axis=0)


# ---------------------------------------------------------------------------
# on-disk layout: one PGM/PPM per sample plus a JSON manifest


def save_dataset(out_dir: Union[str, Path], spec: DatasetSpec,
                 train, test) -> Path:
    from . import ppm

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for split_name, (x_samples, y_samples) in (("train", train), ("test", test)):
        for domain, samples in (("x", x_samples), ("y", y_samples)):
            for i, sample in enumerate(samples):
                ext = "pgm" if sample.image.shape[0] == 1 else "ppm"
                name = f"{domain}_{split_name}_{i:05d}.{ext}"
                ppm.write_image(out / name, sample.image)
                entries.append({"file": name, "label": sample.label,
                                "domain": sample.domain, "split": split_name})
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "spec": json.loads(spec.to_json()),
        "samples": entries,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path


def load_dataset(data_dir: Union[str, Path]):
    """Read a saved dataset; returns (spec, (x_train, y_train), (x_test, y_test))."""
    from . import ppm

    root = Path(data_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {root}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported manifest schema_version {manifest.get('schema_version')!r}")
    spec = DatasetSpec.from_json(json.dumps(manifest["spec"]))
    buckets = {("X", "train"): [], ("Y", "train"): [],
               ("X", "test"): [], ("Y", "test"): []}
    for entry in manifest["samples"]:
        image = ppm.read_image(root / entry["file"])
        buckets[(entry["domain"], entry["split"])].append(
            GlyphSample(image=image, label=int(entry["label"]),
                        domain=entry["domain"]))
    return (spec,
            (buckets[("X", "train")], buckets[("Y", "train")]),
            (buckets[("X", "test")], buckets[("Y", "test")]))
