"""Alternating adversarial training of the content/style adaptation pipeline.

Each iteration runs one discriminator update followed by one generator-side
update (encoder, separator, generator).  The discriminator step regenerates
its fake images outside any computation record, so no gradient can reach the
generator side from it; the generator step builds the full graph (swap,
reconstruction, re-encoding, perceptual features) on a fresh record.

Determinism contract: everything downstream of a TrainConfig seed is
reproducible bit-exactly, including across a checkpoint save/load boundary.
Four independent RNG streams are spawned from the seed (parameter init,
perceptual-net init, batch sampling, style-loss projections) so that the
gram and swd variants consume identical batch sequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from . import autodiff as ad
from . import checkpoint as ckpt
from . import losses
from . import networks as nw
from .autodiff import ShapeError, Tensor
from .losses import LossWeights, PerceptualLayerSpec, SWDConfig
from .networks import LatentSplit, NetConfig, PerceptualNet

METRICS_HEADER = ("iter,loss_rec_x,loss_rec_y,loss_con_x,loss_con_y,"
                  "loss_gan_g,loss_gan_d,loss_content,loss_style,total")
METRICS_FIELDS = tuple(METRICS_HEADER.split(",")[1:])

STYLE_LOSS_KINDS = ("gram", "swd")
GAN_KINDS = ("log", "hinge")

CHECKPOINT_SCHEMA_VERSION = 1


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or inconsistent state)."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class TrainConfig:
    """Everything a run needs besides the dataset; JSON round-trippable."""

    weights: LossWeights = field(default_factory=LossWeights)
    style_loss_kind: str = "gram"
    gan_kind: str = "log"
    swd: SWDConfig = field(default_factory=SWDConfig)
    iterations: int = 2000
    batch_size: int = 16
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 5688
    checkpoint_every: int = 500

    def __post_init__(self):
        if self.style_loss_kind not in STYLE_LOSS_KINDS:
            raise ValueError(f"style_loss_kind must be one of {STYLE_LOSS_KINDS}, "
                             f"got {self.style_loss_kind!r}")
        if self.gan_kind not in GAN_KINDS:
            raise ValueError(f"gan_kind must be one of {GAN_KINDS}, "
                             f"got {self.gan_kind!r}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"betas must lie in [0, 1), got "
                             f"({self.beta1}, {self.beta2})")
        if not self.adam_eps > 0:
            raise ValueError(f"adam_eps must be > 0, got {self.adam_eps}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit int, got {self.seed}")
        if self.checkpoint_every < 1:
            raise ValueError(f"checkpoint_every must be >= 1, "
                             f"got {self.checkpoint_every}")

    def to_dict(self) -> dict:
        return {
            "weights": {
                "alpha_rec": self.weights.alpha_rec,
                "alpha_con": self.weights.alpha_con,
                "alpha_gan": self.weights.alpha_gan,
                "alpha_per": self.weights.alpha_per,
                "lambda_style": self.weights.lambda_style,
            },
            "style_loss_kind": self.style_loss_kind,
            "gan_kind": self.gan_kind,
            "swd": {
                "num_projections": self.swd.num_projections,
                "rng_seed_policy": self.swd.rng_seed_policy,
            },
            "iterations": self.iterations,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        if not isinstance(d, dict):
            raise ValueError(f"train config must be a JSON object, got {type(d).__name__}")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        kw = dict(d)
        if "weights" in kw:
            w = kw["weights"]
            w_known = set(LossWeights.__dataclass_fields__)
            w_unknown = set(w) - w_known
            if w_unknown:
                raise ValueError(f"unknown loss weight keys: {sorted(w_unknown)}")
            kw["weights"] = LossWeights(**w)
        if "swd" in kw:
            s = kw["swd"]
            s_known = set(SWDConfig.__dataclass_fields__)
            s_unknown = set(s) - s_known
            if s_unknown:
                raise ValueError(f"unknown swd config keys: {sorted(s_unknown)}")
            kw["swd"] = SWDConfig(**s)
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls.from_dict(json.loads(text))


def load_config(path: Union[str, Path]) -> TrainConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"train config not found: {path}")
    return TrainConfig.from_json(path.read_text())


# ---------------------------------------------------------------------------
# optimizer


def adam_update(param: np.ndarray, grad: np.ndarray, m: np.ndarray,
                v: np.ndarray, step: int, lr: float, beta1: float,
                beta2: float, eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One bias-corrected moment update; ``step`` counts this update (>= 1).

    Returns (new_param, new_m, new_v) without mutating the inputs.
    """
    if param.shape != grad.shape:
        raise ShapeError(f"adam_update: param {param.shape} vs grad {grad.shape}")
    one = np.float32(1.0)
    b1, b2 = np.float32(beta1), np.float32(beta2)
    m = b1 * m + (one - b1) * grad
    v = b2 * v + (one - b2) * (grad * grad)
    m_hat = m / np.float32(1.0 - beta1 ** step)
    v_hat = v / np.float32(1.0 - beta2 ** step)
    new_param = param - np.float32(lr) * m_hat / (np.sqrt(v_hat) + np.float32(eps))
    return new_param, m, v


class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    def __init__(self, names: Sequence[str], params: dict[str, Tensor]):
        self.names = list(names)
        self.m = {n: np.zeros_like(params[n].data) for n in self.names}
        self.v = {n: np.zeros_like(params[n].data) for n in self.names}
        self.step = 0

    def apply(self, params: dict[str, Tensor], cfg: "TrainConfig") -> None:
        self.step += 1
        for name in self.names:
            t = params[name]
            grad = t.grad if t.grad is not None else np.zeros_like(t.data)
            t.data, self.m[name], self.v[name] = adam_update(
                t.data, grad, self.m[name], self.v[name], self.step,
                cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)


# ---------------------------------------------------------------------------
# state


class TrainState:
    """All mutable run state: parameters, moments, counters, RNG streams."""

    def __init__(self, cfg: TrainConfig, net_cfg: Optional[NetConfig] = None):
        net_cfg = net_cfg or NetConfig()
        init_ss, percept_ss, batch_ss, swd_ss = \
            np.random.SeedSequence(cfg.seed).spawn(4)
        self.net_cfg = net_cfg
        self.percept_seed = int(percept_ss.generate_state(1, dtype=np.uint64)[0])
        self.params = nw.init_params(
            net_cfg, int(init_ss.generate_state(1, dtype=np.uint64)[0]))
        self.percept = PerceptualNet(net_cfg, self.percept_seed)
        self.layer_spec = PerceptualLayerSpec(num_layers=self.percept.num_layers)
        gen_names = sorted(nw.parameters_with_prefix(
            self.params, nw.GENERATOR_SIDE_PREFIXES))
        disc_names = sorted(nw.parameters_with_prefix(
            self.params, nw.DISCRIMINATOR_PREFIXES))
        self.adam_g = AdamState(gen_names, self.params)
        self.adam_d = AdamState(disc_names, self.params)
        self.batch_rng = np.random.default_rng(batch_ss)
        self.swd_seed = int(swd_ss.generate_state(1, dtype=np.uint64)[0])
        self.swd_rng = np.random.default_rng(np.random.SeedSequence(self.swd_seed))
        self.iteration = 0
        self.loss_sums: dict[str, float] = {name: 0.0 for name in METRICS_FIELDS}
        self.loss_count = 0

    def style_rng(self, cfg: TrainConfig) -> np.random.Generator:
        """Projection stream: advancing for fresh_each_step, reset for fixed."""
        if cfg.swd.rng_seed_policy == "fixed":
            return np.random.default_rng(np.random.SeedSequence(self.swd_seed))
        return self.swd_rng

    def loss_averages(self) -> dict[str, float]:
        if self.loss_count == 0:
            return {name: 0.0 for name in METRICS_FIELDS}
        return {name: self.loss_sums[name] / self.loss_count
                for name in METRICS_FIELDS}

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None


def _scalar(t: Tensor) -> float:
    return float(t.data.reshape(()))


# ---------------------------------------------------------------------------
# forward pass


@dataclass
class ForwardPass:
    """Every intermediate tensor one training iteration needs."""

    batch_x: Tensor
    batch_y: Tensor
    feats_x: Tensor
    feats_y: Tensor
    split_x: LatentSplit
    split_y: LatentSplit
    converted_xy: Tensor          # content of X rendered with style of Y
    converted_yx: Tensor
    recon_x: Tensor
    recon_y: Tensor
    resplit_xy: LatentSplit       # converted images re-encoded and re-split
    resplit_yx: LatentSplit
    logits_real_x: Tensor
    logits_fake_x: Tensor         # D_X on converted Y->X
    logits_real_y: Tensor
    logits_fake_y: Tensor         # D_Y on converted X->Y
    percept_x: list[Tensor]
    percept_y: list[Tensor]
    percept_xy: list[Tensor]
    percept_yx: list[Tensor]


def forward_pass(state: TrainState, batch_x: Tensor, batch_y: Tensor,
                 swap_styles: bool = True) -> ForwardPass:
    """Run the full data flow for one batch pair.

    With ``swap_styles=False`` each image keeps its own style, so the
    converted images coincide with the reconstruction path.
    """
    if batch_x.shape != batch_y.shape:
        raise ShapeError(f"domain batches differ: {batch_x.shape} vs {batch_y.shape}")
    params, cfg = state.params, state.net_cfg
    feats_x = nw.encode(params, batch_x, cfg)
    feats_y = nw.encode(params, batch_y, cfg)
    split_x = nw.separate(params, feats_x, "X", cfg)
    split_y = nw.separate(params, feats_y, "Y", cfg)
    style_for_x = split_y.style if swap_styles else split_x.style
    style_for_y = split_x.style if swap_styles else split_y.style
    converted_xy = nw.generate(params, split_x.content, style_for_x, cfg)
    converted_yx = nw.generate(params, split_y.content, style_for_y, cfg)
    recon_x = nw.generate(params, split_x.content, split_x.style, cfg)
    recon_y = nw.generate(params, split_y.content, split_y.style, cfg)
    resplit_xy = nw.separate(params, nw.encode(params, converted_xy, cfg), "Y", cfg)
    resplit_yx = nw.separate(params, nw.encode(params, converted_yx, cfg), "X", cfg)
    return ForwardPass(
        batch_x=batch_x, batch_y=batch_y,
        feats_x=feats_x, feats_y=feats_y,
        split_x=split_x, split_y=split_y,
        converted_xy=converted_xy, converted_yx=converted_yx,
        recon_x=recon_x, recon_y=recon_y,
        resplit_xy=resplit_xy, resplit_yx=resplit_yx,
        logits_real_x=nw.discriminate(params, batch_x, "X", cfg),
        logits_fake_x=nw.discriminate(params, converted_yx, "X", cfg),
        logits_real_y=nw.discriminate(params, batch_y, "Y", cfg),
        logits_fake_y=nw.discriminate(params, converted_xy, "Y", cfg),
        percept_x=state.percept.features(batch_x),
        percept_y=state.percept.features(batch_y),
        percept_xy=state.percept.features(converted_xy),
        percept_yx=state.percept.features(converted_yx),
    )


# ---------------------------------------------------------------------------
# the two alternating steps


def _check_finite_components(items: Sequence[tuple[str, float]]) -> None:
    for name, value in items:
        if not np.isfinite(value):
            raise TrainingError(f"non-finite loss component: {name} = {value}")


class BatchPair(NamedTuple):
    """The minimal slice of a forward pass the discriminator step reads."""

    batch_x: Tensor
    batch_y: Tensor


def discriminator_step(state: TrainState, fwd,
                       cfg: TrainConfig) -> dict[str, float]:
    """Update D_X and D_Y against freshly regenerated, detached fakes.

    ``fwd`` only supplies the input batches (a full ForwardPass or a bare
    BatchPair both work): the fake images are re-generated outside any
    computation record rather than reused, so the discriminator graph is
    independent of the generator graph and no gradient can flow into E, S,
    or G.
    """
    if ad.active_tape() is not None:
        raise TrainingError("discriminator_step must start outside a "
                            "computation record")
    params, net_cfg = state.params, state.net_cfg
    split_x = nw.separate(params, nw.encode(params, fwd.batch_x, net_cfg), "X", net_cfg)
    split_y = nw.separate(params, nw.encode(params, fwd.batch_y, net_cfg), "Y", net_cfg)
    fake_xy = nw.generate(params, split_x.content, split_y.style, net_cfg)
    fake_yx = nw.generate(params, split_y.content, split_x.style, net_cfg)

    state.zero_grads()
    with ad.Tape():
        loss_x = losses.gan_loss(
            nw.discriminate(params, fwd.batch_x, "X", net_cfg),
            nw.discriminate(params, fake_yx, "X", net_cfg),
            side="discriminator", kind=cfg.gan_kind)
        loss_y = losses.gan_loss(
            nw.discriminate(params, fwd.batch_y, "Y", net_cfg),
            nw.discriminate(params, fake_xy, "Y", net_cfg),
            side="discriminator", kind=cfg.gan_kind)
        total = ad.elementwise("add", loss_x, loss_y)
        value = _scalar(total)
        _check_finite_components([("loss_gan_d", value)])
        ad.backward(total)
    state.adam_d.apply(params, cfg)
    return {"loss_gan_d": value}


def generator_objective(state, fwd: ForwardPass,
                        cfg: TrainConfig) -> tuple[Tensor, dict[str, float]]:
    """Total generator-side loss plus its per-component breakdown.

    ``state`` only needs ``layer_spec`` and ``style_rng``, so gradient
    checkers can drive the same graph with substitute parameters.
    """
    w = cfg.weights
    spec = state.layer_spec

    rec_x = losses.reconstruction_loss(fwd.batch_x, fwd.recon_x)
    rec_y = losses.reconstruction_loss(fwd.batch_y, fwd.recon_y)

    # Domain d's content went out in converted_d->d' and its style came back
    # in converted_d'->d; the consistency pairs follow those carriers.
    reenc_x = LatentSplit(content=fwd.resplit_xy.content,
                          style=fwd.resplit_yx.style, domain="X")
    reenc_y = LatentSplit(content=fwd.resplit_yx.content,
                          style=fwd.resplit_xy.style, domain="Y")
    con_x = losses.consistency_loss(fwd.split_x, reenc_x)
    con_y = losses.consistency_loss(fwd.split_y, reenc_y)

    gan_x = losses.gan_loss(None, fwd.logits_fake_x, side="generator",
                            kind=cfg.gan_kind)
    gan_y = losses.gan_loss(None, fwd.logits_fake_y, side="generator",
                            kind=cfg.gan_kind)

    # The converted image into domain d is judged against d's originals:
    # content against where its content came from, style against d itself.
    content_y = losses.content_loss(fwd.percept_x, fwd.percept_xy, spec)
    content_x = losses.content_loss(fwd.percept_y, fwd.percept_yx, spec)
    if cfg.style_loss_kind == "gram":
        style_y = losses.gram_style_loss(fwd.percept_y, fwd.percept_xy, spec)
        style_x = losses.gram_style_loss(fwd.percept_x, fwd.percept_yx, spec)
    else:
        rng = state.style_rng(cfg)
        style_y = losses.swd_style_loss(fwd.percept_y, fwd.percept_xy, spec,
                                        cfg.swd, rng)
        style_x = losses.swd_style_loss(fwd.percept_x, fwd.percept_yx, spec,
                                        cfg.swd, rng)

    per_x = losses.perceptual_loss(content_x, style_x, w.lambda_style)
    per_y = losses.perceptual_loss(content_y, style_y, w.lambda_style)
    total = ad.elementwise(
        "add",
        losses.total_domain_loss(rec_x, con_x, gan_x, per_x, w),
        losses.total_domain_loss(rec_y, con_y, gan_y, per_y, w))

    breakdown = {
        "loss_rec_x": _scalar(rec_x),
        "loss_rec_y": _scalar(rec_y),
        "loss_con_x": _scalar(con_x),
        "loss_con_y": _scalar(con_y),
        "loss_gan_g": _scalar(gan_x) + _scalar(gan_y),
        "loss_content": _scalar(content_x) + _scalar(content_y),
        "loss_style": _scalar(style_x) + _scalar(style_y),
        "total": _scalar(total),
    }
    return total, breakdown


def generator_step(state: TrainState, fwd: ForwardPass,
                   cfg: TrainConfig) -> dict[str, float]:
    """Assemble the full generator-side objective and update E, S, G.

    Must run under the same active computation record that produced
    ``fwd``.  Returns the per-component breakdown used for the metrics log.
    """
    if ad.active_tape() is None:
        raise TrainingError("generator_step needs the computation record that "
                            "produced the forward pass to still be active")
    total, breakdown = generator_objective(state, fwd, cfg)
    _check_finite_components(list(breakdown.items()))

    state.zero_grads()
    ad.backward(total)
    state.adam_g.apply(state.params, cfg)
    return breakdown


# ---------------------------------------------------------------------------
# the training loop


def stack_images(samples: Sequence) -> np.ndarray:
    """Sample list -> (N,3,H,W) float32 batch source array."""
    from .data import replicate_channels

    return np.stack([replicate_channels(s.image) for s in samples]).astype(
        np.float32, copy=False)


def _sample_batch(arr: np.ndarray, rng: np.random.Generator,
                  batch_size: int) -> Tensor:
    idx = rng.integers(0, arr.shape[0], size=batch_size)
    return Tensor(arr[idx])


def train_iteration(state: TrainState, cfg: TrainConfig, x_arr: np.ndarray,
                    y_arr: np.ndarray) -> dict[str, float]:
    """One discriminator step then one generator step on fresh batches."""
    batch_x = _sample_batch(x_arr, state.batch_rng, cfg.batch_size)
    batch_y = _sample_batch(y_arr, state.batch_rng, cfg.batch_size)
    d_stats = discriminator_step(state, BatchPair(batch_x, batch_y), cfg)
    with ad.Tape():
        fwd = forward_pass(state, batch_x, batch_y)
        g_stats = generator_step(state, fwd, cfg)
    state.iteration += 1
    row = dict(g_stats)
    row.update(d_stats)
    for name in METRICS_FIELDS:
        state.loss_sums[name] += row[name]
    state.loss_count += 1
    return row


def format_metrics_row(iteration: int, row: dict[str, float]) -> str:
    """repr() keeps every float bit-exact through write->read."""
    return ",".join([str(iteration)] + [repr(row[name]) for name in METRICS_FIELDS])


def run_training(cfg: TrainConfig, train_data: tuple,
                 out_dir: Optional[Union[str, Path]] = None,
                 resume: Optional[Union[str, Path]] = None,
                 net_cfg: Optional[NetConfig] = None):
    """Train from scratch or resume; returns (state, metrics rows).

    ``train_data`` is (domain X samples, domain Y samples).  When
    ``out_dir`` is given, a metrics CSV and scheduled checkpoints are
    written there; a resumed run logs only the iterations it executes.
    """
    if resume is not None:
        loaded_cfg, state = load_checkpoint(resume)
        if loaded_cfg.to_dict() != cfg.to_dict():
            raise TrainingError("resume checkpoint was written under a "
                                "different train config")
    else:
        state = TrainState(cfg, net_cfg)

    x_samples, y_samples = train_data
    if not x_samples or not y_samples:
        raise ValueError("both domains need at least one training sample")
    x_arr = stack_images(x_samples)
    y_arr = stack_images(y_samples)

    out_path = Path(out_dir) if out_dir is not None else None
    metrics_fh = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        metrics_path = out_path / "metrics.csv"
        # resuming into a run directory continues its log seamlessly
        append = resume is not None and metrics_path.exists()
        metrics_fh = open(metrics_path, "a" if append else "w")
        if not append:
            metrics_fh.write(METRICS_HEADER + "\n")

    rows = []
    try:
        while state.iteration < cfg.iterations:
            row = train_iteration(state, cfg, x_arr, y_arr)
            rows.append((state.iteration, row))
            if metrics_fh is not None:
                metrics_fh.write(format_metrics_row(state.iteration, row) + "\n")
            if out_path is not None and state.iteration % cfg.checkpoint_every == 0:
                save_checkpoint(
                    out_path / f"checkpoint_{state.iteration:06d}.ckpt", state, cfg)
        if out_path is not None:
            save_checkpoint(out_path / "checkpoint.ckpt", state, cfg)
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    return state, rows


# ---------------------------------------------------------------------------
# checkpointing


def save_checkpoint(path: Union[str, Path], state: TrainState,
                    cfg: TrainConfig) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name in sorted(state.params):
        arrays[f"param/{name}"] = state.params[name].data
    for label, adam in (("adam_g", state.adam_g), ("adam_d", state.adam_d)):
        for name in adam.names:
            arrays[f"{label}/m/{name}"] = adam.m[name]
            arrays[f"{label}/v/{name}"] = adam.v[name]
    meta = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "kind": "train_state",
        "iteration": state.iteration,
        "adam_g_step": state.adam_g.step,
        "adam_d_step": state.adam_d.step,
        "batch_rng_state": state.batch_rng.bit_generator.state,
        "swd_rng_state": state.swd_rng.bit_generator.state,
        "swd_seed": state.swd_seed,
        "percept_seed": state.percept_seed,
        "loss_sums": state.loss_sums,
        "loss_count": state.loss_count,
        "train_config": cfg.to_dict(),
        "net_config": state.net_cfg.to_dict(),
    }
    ckpt.save_container(path, meta, arrays)


def load_checkpoint(path: Union[str, Path]) -> tuple[TrainConfig, TrainState]:
    meta, arrays = ckpt.load_container(path)
    if meta.get("kind") != "train_state":
        raise ckpt.CheckpointError(
            f"not a train-state checkpoint: kind={meta.get('kind')!r}")
    if meta.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ckpt.CheckpointError(
            f"unsupported checkpoint schema_version {meta.get('schema_version')!r}")
    cfg = TrainConfig.from_dict(meta["train_config"])
    net_cfg = NetConfig.from_dict(meta["net_config"])
    state = TrainState(cfg, net_cfg)
    for name in state.params:
        key = f"param/{name}"
        if key not in arrays:
            raise ckpt.CheckpointError(f"checkpoint missing parameter {name}")
        if arrays[key].shape != state.params[name].shape:
            raise ckpt.CheckpointError(
                f"checkpoint parameter {name} has shape {arrays[key].shape}, "
                f"expected {state.params[name].shape}")
        state.params[name].data = arrays[key]
    for label, adam, step_key in (("adam_g", state.adam_g, "adam_g_step"),
                                  ("adam_d", state.adam_d, "adam_d_step")):
        adam.step = int(meta[step_key])
        for name in adam.names:
            adam.m[name] = arrays[f"{label}/m/{name}"]
            adam.v[name] = arrays[f"{label}/v/{name}"]
    state.percept_seed = int(meta["percept_seed"])
    state.percept = PerceptualNet(net_cfg, state.percept_seed)
    state.swd_seed = int(meta["swd_seed"])
    state.batch_rng.bit_generator.state = meta["batch_rng_state"]
    state.swd_rng.bit_generator.state = meta["swd_rng_state"]
    state.iteration = int(meta["iteration"])
    state.loss_sums = {name: float(meta["loss_sums"][name])
                       for name in METRICS_FIELDS}
    state.loss_count = int(meta["loss_count"])
    return cfg, state
