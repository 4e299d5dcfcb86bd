"""Small Spiking Transformer forward simulator with a dense MAC counter.

The simulator exists to check the analytic cost model: every matmul and conv
goes through a helper that adds the dense multiply-accumulate count of the
shapes it actually multiplied. Spike sparsity is ignored on purpose.

Layout follows Spikformer: a conv/LIF patch embedding, ``depth`` blocks of
spiking self-attention and spiking MLP with residual connections, global
average pooling over time and tokens, and a linear classifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import cost_model
from .genome import SPE_DOWNSAMPLE, ArchGenome, RunConfig

DTYPE = np.float32
ATTN_SCALE = 0.125


@dataclass(frozen=True)
class LifParams:
    tau: float = 2.0
    v_th: float = 1.0
    v_reset: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass
class LifState:
    v: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v)
        if not np.all(np.isfinite(self.v)):
            raise ValueError("membrane potential must be finite")

    @classmethod
    def rest(cls, shape, p: LifParams = LifParams(), dtype=np.float64) -> "LifState":
        return cls(np.full(shape, p.v_reset, dtype=dtype))


@dataclass
class MacCounter:
    sa_macs: int = 0
    mlp_macs: int = 0
    spe_macs: int = 0

    def add(self, field_name: str, n: int) -> None:
        if n < 0:
            raise ValueError("MAC counters only increase")
        setattr(self, field_name, getattr(self, field_name) + int(n))


def heaviside(v):
    """Step function with ``heaviside(0) == 1``; works on scalars and arrays."""
    arr = np.asarray(v)
    if np.any(np.isnan(arr)):
        raise ValueError("heaviside of NaN is undefined")
    out = (arr >= 0).astype(np.uint8)
    return int(out) if out.ndim == 0 else out


def lif_step(state: LifState, x, p: LifParams = LifParams()):
    """Advance every neuron by one timestep.

    Returns ``(spikes, new_state)``. Spikes come back in the membrane dtype so
    they can feed straight into the next matmul.
    """
    v_prev = state.v
    x = np.asarray(x, dtype=v_prev.dtype)
    if x.shape != v_prev.shape:
        raise ValueError(f"input shape {x.shape} does not match state shape {v_prev.shape}")
    h = v_prev + (x - (v_prev - p.v_reset)) / p.tau
    s = heaviside(h - p.v_th).astype(v_prev.dtype)
    v_new = h * (1 - s) + p.v_reset * s
    return s, LifState(v_new)


def lif_sequence(x: np.ndarray, p: LifParams = LifParams()) -> np.ndarray:
    """Run a fresh LIF population over the leading time axis of ``x``."""
    state = LifState.rest(x.shape[1:], p, dtype=x.dtype)
    out = np.empty_like(x)
    for t in range(x.shape[0]):
        out[t], state = lif_step(state, x[t], p)
    return out


def check_binary(x: np.ndarray, what: str = "input") -> None:
    if not np.all((x == 0) | (x == 1)):
        raise ValueError(f"{what} must be a binary spike tensor")


# -- counted primitives --------------------------------------------------------

def _matmul(a: np.ndarray, b: np.ndarray, ctr: MacCounter, field_name: str) -> np.ndarray:
    out = a @ b
    batch = math.prod(out.shape[:-2]) if out.ndim > 2 else 1
    ctr.add(field_name, batch * a.shape[-2] * a.shape[-1] * b.shape[-1])
    return out


def _conv3x3(x: np.ndarray, w: np.ndarray, ctr: MacCounter) -> np.ndarray:
    """Same-padded 3x3 conv; ``x`` is (T, C, H, W), ``w`` is (C_out, C_in, 3, 3)."""
    t, c, h, wd = x.shape
    if w.shape[1:] != (c, 3, 3):
        raise ValueError(f"conv weight {w.shape} does not fit input channels {c}")
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))  # T,C,H,W,3,3
    cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(t, h * wd, c * 9)
    out = _matmul(cols, w.reshape(w.shape[0], -1).T, ctr, "spe_macs")  # T, HW, C_out
    return out.transpose(0, 2, 1).reshape(t, w.shape[0], h, wd)


def _norm(x: np.ndarray, channel_axis: int) -> np.ndarray:
    """Per-channel standardisation over every other axis, no affine, no running stats.

    Stands in for batch norm so activity survives untrained uniform weights.
    Constant channels map to zero.
    """
    axes = tuple(a for a in range(x.ndim) if a != channel_axis % x.ndim)
    mean = x.mean(axis=axes, keepdims=True)
    var = x.var(axis=axes, keepdims=True)
    return ((x - mean) / np.sqrt(var + 1e-5)).astype(x.dtype)


def _maxpool2(x: np.ndarray) -> np.ndarray:
    t, c, h, w = x.shape
    return x.reshape(t, c, h // 2, 2, w // 2, 2).max(axis=(3, 5))


# -- weights -------------------------------------------------------------------

@dataclass
class BlockWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


@dataclass
class ModelWeights:
    spe: list  # four ladder convs then the position conv
    blocks: list
    head: np.ndarray

    def check(self, g: ArchGenome, cfg: RunConfig) -> None:
        d, dm = g.embed_dim, g.hidden_dim
        want = [(cout, cin, 3, 3) for cin, cout in cost_model.spe_channels(d, cfg.in_channels)]
        got = [w.shape for w in self.spe]
        if got != want:
            raise ValueError(f"SPE weights {got} do not match genome {g} (want {want})")
        if len(self.blocks) != g.depth:
            raise ValueError(f"{len(self.blocks)} blocks for depth {g.depth}")
        for i, b in enumerate(self.blocks):
            for name, shape in (("wq", (d, d)), ("wk", (d, d)), ("wv", (d, d)), ("wo", (d, d)),
                                ("w1", (d, dm)), ("w2", (dm, d))):
                if getattr(b, name).shape != shape:
                    raise ValueError(f"block {i} {name} has shape {getattr(b, name).shape}, want {shape}")
        if self.head.shape != (d, cfg.num_classes):
            raise ValueError(f"head shape {self.head.shape}, want {(d, cfg.num_classes)}")


def init_weights(g: ArchGenome, cfg: RunConfig, rng: np.random.Generator) -> ModelWeights:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight, drawn in a fixed order."""

    def uni(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(DTYPE)

    d, dm = g.embed_dim, g.hidden_dim
    spe = [uni((cout, cin, 3, 3), cin * 9) for cin, cout in cost_model.spe_channels(d, cfg.in_channels)]
    blocks = [BlockWeights(uni((d, d), d), uni((d, d), d), uni((d, d), d), uni((d, d), d),
                           uni((d, dm), d), uni((dm, d), dm)) for _ in range(g.depth)]
    return ModelWeights(spe, blocks, uni((d, cfg.num_classes), d))


def zero_weights(g: ArchGenome, cfg: RunConfig) -> ModelWeights:
    w = init_weights(g, cfg, np.random.default_rng(0))
    return ModelWeights([np.zeros_like(a) for a in w.spe],
                        [BlockWeights(*(np.zeros_like(getattr(b, k)) for k in ("wq", "wk", "wv", "wo", "w1", "w2")))
                         for b in w.blocks],
                        np.zeros_like(w.head))


# -- forward pass ---------------------------------------------------------------

def spe_forward(images: np.ndarray, g: ArchGenome, cfg: RunConfig, ctr: MacCounter,
                weights: Optional[ModelWeights] = None, p: LifParams = LifParams()) -> np.ndarray:
    """Patch embedding: ``(T, C, H, W)`` real input to ``(T, HW/16, d)`` spikes.

    conv-LIF three times at full resolution, 2x max-pool, conv-LIF, 2x
    max-pool, then the position conv added back onto its input and fired.
    """
    if weights is None:
        weights = init_weights(g, cfg, np.random.default_rng(cfg.seed))
    x = np.asarray(images, dtype=DTYPE)
    if x.ndim != 4 or x.shape[1] != cfg.in_channels:
        raise ValueError(f"expected (T, {cfg.in_channels}, H, W) input, got {x.shape}")
    t, _, h, w = x.shape
    if h % SPE_DOWNSAMPLE or w % SPE_DOWNSAMPLE:
        raise ValueError(f"image size {(h, w)} not divisible by {SPE_DOWNSAMPLE}")
    c1, c2, c3, c4, rpe = weights.spe

    def conv(a, k):
        return _norm(_conv3x3(a, k, ctr), channel_axis=1)

    x = lif_sequence(conv(x, c1), p)
    x = lif_sequence(conv(x, c2), p)
    x = _maxpool2(lif_sequence(conv(x, c3), p))
    x = _maxpool2(lif_sequence(conv(x, c4), p))
    x = lif_sequence(x + conv(x, rpe), p)
    return x.reshape(t, g.embed_dim, -1).transpose(0, 2, 1).copy()


def ssa_forward(x: np.ndarray, g: ArchGenome, bw: BlockWeights, ctr: MacCounter,
                p: LifParams = LifParams()) -> np.ndarray:
    """Spiking self-attention on a ``(T, n, d)`` spike tensor.

    Q, K and V are fired through LIF, the per-head product ``(Q K^T) V`` is
    scaled, fired, projected and fired again. No softmax: spike products are
    already non-negative.
    """
    check_binary(x, "SSA input")
    t, n, d = x.shape
    heads = g.num_heads
    dh = d // heads

    def split(a):  # (T, n, d) -> (T, heads, n, dh)
        return a.reshape(t, n, heads, dh).transpose(0, 2, 1, 3)

    def proj(a, w):
        return lif_sequence(_norm(_matmul(a, w, ctr, "sa_macs"), channel_axis=-1), p)

    q, k, v = split(proj(x, bw.wq)), split(proj(x, bw.wk)), split(proj(x, bw.wv))
    attn = _matmul(q, k.transpose(0, 1, 3, 2), ctr, "sa_macs")
    y = _matmul(attn, v, ctr, "sa_macs") * DTYPE(ATTN_SCALE)
    y = lif_sequence(_norm(y.transpose(0, 2, 1, 3).reshape(t, n, d), channel_axis=-1), p)
    return proj(y, bw.wo)


def smlp_forward(x: np.ndarray, g: ArchGenome, bw: BlockWeights, ctr: MacCounter,
                 p: LifParams = LifParams()) -> np.ndarray:
    check_binary(x, "SMLP input")
    def proj(a, w):
        return lif_sequence(_norm(_matmul(a, w, ctr, "mlp_macs"), channel_axis=-1), p)

    return proj(proj(x, bw.w1), bw.w2)


def model_forward(images: np.ndarray, g: ArchGenome, cfg: RunConfig, weights: ModelWeights,
                  ctr: MacCounter, p: LifParams = LifParams()) -> np.ndarray:
    """SPE, ``depth`` x (SSA + residual, SMLP + residual), GAP over (T, n), linear head."""
    weights.check(g, cfg)
    x = spe_forward(images, g, cfg, ctr, weights, p)
    # residual stream stays real-valued; each sub-block fires it through a front-end LIF
    stream = x
    for bw in weights.blocks:
        spikes = x if stream is x else lif_sequence(stream, p)
        stream = ssa_forward(spikes, g, bw, ctr, p) + stream
        stream = smlp_forward(lif_sequence(stream, p), g, bw, ctr, p) + stream
    pooled = stream.mean(axis=(0, 1), dtype=np.float64)
    return pooled @ weights.head.astype(np.float64)


# -- verification ----------------------------------------------------------------

def dense_spe_macs(g: ArchGenome, cfg: RunConfig) -> int:
    """Dense conv MACs of the patch embedding for all timesteps."""
    h, w = cfg.image_size
    res = [h * w, h * w, h * w, (h // 2) * (w // 2), (h // 4) * (w // 4)]
    chans = cost_model.spe_channels(g.embed_dim, cfg.in_channels)
    return cfg.timesteps * sum(r * 9 * cin * cout for r, (cin, cout) in zip(res, chans))


@dataclass
class Identity:
    name: str
    lhs: int
    rhs: int

    @property
    def ok(self) -> bool:
        return self.lhs == self.rhs

    def line(self) -> str:
        return f"{self.name} lhs={self.lhs} rhs={self.rhs} {'PASS' if self.ok else 'FAIL'}"


@dataclass
class VerificationReport:
    genome: ArchGenome
    identities: list = field(default_factory=list)
    scores: Optional[np.ndarray] = None

    @property
    def passed(self) -> bool:
        return all(i.ok for i in self.identities)

    @property
    def failed(self) -> list[str]:
        return [i.name for i in self.identities if not i.ok]

    def to_text(self) -> str:
        return "\n".join(i.line() for i in self.identities)


def verify_flops(g: ArchGenome, cfg: RunConfig, ctr: Optional[MacCounter] = None,
                 input_scale: float = 1.0) -> VerificationReport:
    """Run one random forward pass and compare its MAC counters with the formulas.

    Left-hand sides come from the counter, right-hand sides from ``cost_model``.
    Attention is counted densely, which is twice the analytic SA term.
    """
    rng = np.random.default_rng(cfg.seed)
    weights = init_weights(g, cfg, rng)
    h, w = cfg.image_size
    images = rng.random((cfg.timesteps, cfg.in_channels, h, w)) * input_scale
    ctr = MacCounter() if ctr is None else ctr
    scores = model_forward(images, g, cfg, weights, ctr)
    n, t = cfg.seq_len, cfg.timesteps
    report = VerificationReport(g, [
        Identity("mlp_macs", ctr.mlp_macs, t * cost_model.flops_mlp(g.depth, n, g.embed_dim, g.hidden_dim)),
        Identity("sa_macs", ctr.sa_macs, 2 * t * cost_model.flops_sa(g.depth, n, g.embed_dim)),
    ], scores)
    return report
