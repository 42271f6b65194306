"""Reference implementations of the model-side building blocks.

Pure numpy forward math for scaled dot-product attention, multi-head
self-attention, focal loss with its analytic gradient, global average
pooling, and a small dense classification head.  Nothing here trains;
the point is exact, testable arithmetic for the quantities the rest of
the toolkit (and its evaluation claims) depend on.

Numerical conventions: float64 throughout; softmax uses max-subtraction
stabilization; the true-class probability inside logs is clamped below
at 1e-12; batch losses reduce by mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IndivisibleHeadsError, InvalidDistributionError, ShapeMismatchError

PROB_EPS = 1e-12


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction stabilization."""
    x = np.asarray(m, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
        squeeze = True
    else:
        squeeze = False
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return out[0] if squeeze else out


def scaled_dot_product_attention(
    q: np.ndarray, k: np.ndarray, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Attention(Q, K, V) = softmax(QKᵀ/√d_k)·V.

    Returns (output, weights).  Each weights row is a distribution over
    the keys, so every output row is a convex combination of V's rows.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ShapeMismatchError("Q, K, V must be 2-D matrices")
    if q.shape[1] != k.shape[1]:
        raise ShapeMismatchError(f"Q width {q.shape[1]} != K width {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ShapeMismatchError(f"K has {k.shape[0]} rows but V has {v.shape[0]}")
    d_k = q.shape[1]
    scores = (q @ k.T) / np.sqrt(float(d_k))
    weights = softmax_rows(scores)
    return weights @ v, weights


@dataclass
class AttentionConfig:
    """Weights for multi-head self-attention over a d_model-wide input.

    Four square projections with biases: W_Q, W_K, W_V applied before
    the head split, W_O after concatenation.
    """

    d_model: int
    heads: int
    w_q: np.ndarray
    b_q: np.ndarray
    w_k: np.ndarray
    b_k: np.ndarray
    w_v: np.ndarray
    b_v: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray

    def __post_init__(self) -> None:
        if self.heads < 1:
            raise ValueError(f"heads must be >= 1, got {self.heads}")
        if self.d_model % self.heads != 0:
            raise IndivisibleHeadsError(
                f"d_model={self.d_model} is not divisible by heads={self.heads}"
            )
        d = self.d_model
        for name in ("w_q", "w_k", "w_v", "w_o"):
            w = np.asarray(getattr(self, name), dtype=np.float64)
            if w.shape != (d, d):
                raise ShapeMismatchError(f"{name} must be ({d}, {d}), got {w.shape}")
            setattr(self, name, w)
        for name in ("b_q", "b_k", "b_v", "b_o"):
            b = np.asarray(getattr(self, name), dtype=np.float64)
            if b.shape != (d,):
                raise ShapeMismatchError(f"{name} must be ({d},), got {b.shape}")
            setattr(self, name, b)

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads

    @classmethod
    def seeded(cls, d_model: int, heads: int, seed: int) -> "AttentionConfig":
        """Uniform(-0.1, 0.1) weights drawn in the order Q, K, V, O
        (matrix then bias for each projection)."""
        rng = np.random.default_rng(seed)
        draw = lambda *shape: rng.uniform(-0.1, 0.1, size=shape)
        return cls(
            d_model=d_model,
            heads=heads,
            w_q=draw(d_model, d_model),
            b_q=draw(d_model),
            w_k=draw(d_model, d_model),
            b_k=draw(d_model),
            w_v=draw(d_model, d_model),
            b_v=draw(d_model),
            w_o=draw(d_model, d_model),
            b_o=draw(d_model),
        )

    @classmethod
    def identity(cls, d_model: int, heads: int = 1) -> "AttentionConfig":
        eye = np.eye(d_model)
        zero = np.zeros(d_model)
        return cls(d_model, heads, eye, zero, eye, zero, eye, zero, eye, zero)


def multi_head_self_attention(x: np.ndarray, cfg: AttentionConfig) -> np.ndarray:
    """Project, split into heads column-wise, attend per head, concat, project.

    With h=1 and identity projections this reduces exactly to
    scaled_dot_product_attention(X, X, X).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.d_model:
        raise ShapeMismatchError(f"input must be (tokens, {cfg.d_model}), got {x.shape}")
    q = x @ cfg.w_q + cfg.b_q
    k = x @ cfg.w_k + cfg.b_k
    v = x @ cfg.w_v + cfg.b_v
    d_k = cfg.d_k
    pieces = []
    for h in range(cfg.heads):
        sl = slice(h * d_k, (h + 1) * d_k)
        out, _ = scaled_dot_product_attention(q[:, sl], k[:, sl], v[:, sl])
        pieces.append(out)
    concat = np.concatenate(pieces, axis=1)
    return concat @ cfg.w_o + cfg.b_o


@dataclass(frozen=True)
class FocalLossConfig:
    """gamma: focusing exponent (>= 0); alpha: scalar or per-class weights."""

    gamma: float = 2.0
    alpha: float | tuple[float, ...] = 1.0

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        alphas = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        if np.any(alphas <= 0):
            raise ValueError("all alpha values must be > 0")

    def alpha_for(self, targets: np.ndarray) -> np.ndarray:
        a = np.asarray(self.alpha, dtype=np.float64)
        if a.ndim == 0:
            return np.full(targets.shape, float(a))
        return a[targets]


def _check_probs(probs: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim == 1:
        p = p[None, :]
    t = np.atleast_1d(np.asarray(targets))
    if not np.issubdtype(t.dtype, np.integer):
        raise TypeError("targets must be integer class indices")
    if t.shape[0] != p.shape[0]:
        raise ShapeMismatchError(f"{t.shape[0]} targets for {p.shape[0]} probability rows")
    if np.any(t < 0) or np.any(t >= p.shape[1]):
        raise IndexError("target class index out of range")
    sums = p.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        worst = int(np.argmax(np.abs(sums - 1.0)))
        raise InvalidDistributionError(
            f"probability row {worst} sums to {sums[worst]!r}, not 1"
        )
    return p, t


def focal_loss(probs: np.ndarray, targets: np.ndarray, cfg: FocalLossConfig) -> float:
    """Mean over samples of −α_t (1−p_t)^γ log(p_t).

    p_t is the predicted probability of the true class, clamped below
    at 1e-12 so a vanishing probability yields a large finite loss.
    With γ=0 and α=1 this is exactly the cross-entropy.
    """
    p, t = _check_probs(probs, targets)
    pt = np.clip(p[np.arange(t.size), t], PROB_EPS, 1.0)
    alpha_t = cfg.alpha_for(t)
    losses = -alpha_t * np.power(1.0 - pt, cfg.gamma) * np.log(pt)
    return float(losses.mean())


def focal_loss_grad(
    logits: np.ndarray, targets: np.ndarray, cfg: FocalLossConfig
) -> np.ndarray:
    """Analytic gradient of focal_loss(softmax(logits)) w.r.t. the logits.

    Per sample, with p = softmax(z) and pt = p[target]:
        dL/dpt = α_t [ γ (1−pt)^(γ−1) log(pt) − (1−pt)^γ / pt ]
        dL/dz_j = dL/dpt · pt (δ_tj − p_j)
    reduced by the batch mean.  At pt = 1 the gradient row is zero (the
    loss is at its minimum); this case is taken exactly rather than
    through the power terms, which are indeterminate there for γ < 1.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    t = np.atleast_1d(np.asarray(targets))
    p = softmax_rows(z)
    p, t = _check_probs(p, t)
    n = t.size
    idx = np.arange(n)
    pt = p[idx, t]
    pt_c = np.clip(pt, PROB_EPS, 1.0)
    one_minus = np.maximum(1.0 - pt, 0.0)

    alpha_t = cfg.alpha_for(t)
    gamma = float(cfg.gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        if gamma == 0.0:
            dl_dpt = -alpha_t / pt_c
        else:
            dl_dpt = alpha_t * (
                gamma * np.power(one_minus, gamma - 1.0) * np.log(pt_c)
                - np.power(one_minus, gamma) / pt_c
            )
    saturated = pt >= 1.0
    dl_dpt = np.where(saturated, 0.0, dl_dpt)

    delta = np.zeros_like(p)
    delta[idx, t] = 1.0
    grad = dl_dpt[:, None] * pt[:, None] * (delta - p)
    grad[saturated] = 0.0
    return grad / n


def finite_diff_grad(f, at: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function, entry by entry."""
    x = np.asarray(at, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        hi = x.copy()
        lo = x.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (f(hi) - f(lo)) / (2.0 * step)
    return grad


def gradcheck_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm relative error between two gradients."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(a - n).max()
    scale = max(np.abs(a).max(), np.abs(n).max(), 1e-8)
    return float(diff / scale)


def global_average_pool(feature_maps: np.ndarray) -> np.ndarray:
    """Mean over the spatial axes: (h, w, c) → (c,)."""
    f = np.asarray(feature_maps, dtype=np.float64)
    if f.ndim != 3:
        raise ShapeMismatchError(f"expected (h, w, channels), got shape {f.shape}")
    return f.mean(axis=(0, 1))


@dataclass
class HeadConfig:
    """Dense classification head: flatten → dense(h1)+ReLU → dropout →
    dense(h2)+ReLU → dropout → dense(n_classes) → softmax.

    A hidden size of 0 omits that dense layer (and its dropout).
    Dropout is inert at inference, which is the only mode implemented.
    """

    in_features: int
    hidden: tuple[int, int] = (0, 0)
    n_classes: int = 4
    dropout: tuple[float, float] = (0.0, 0.0)
    l2_lambda: float = 0.0
    layers: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not all(0.0 <= d < 1.0 for d in self.dropout):
            raise ValueError("dropout rates must lie in [0, 1)")
        widths = self.layer_widths()
        if not self.layers:
            self.layers = [
                (np.zeros((fan_in, fan_out)), np.zeros(fan_out))
                for fan_in, fan_out in zip(widths[:-1], widths[1:])
            ]
        for (w, b), fan_in, fan_out in zip(self.layers, widths[:-1], widths[1:]):
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ShapeMismatchError(
                    f"layer weights {w.shape}/{b.shape} do not match sizes "
                    f"{fan_in}->{fan_out}"
                )

    def layer_widths(self) -> list[int]:
        widths = [self.in_features]
        widths.extend(h for h in self.hidden if h > 0)
        widths.append(self.n_classes)
        return widths

    @classmethod
    def seeded(
        cls,
        in_features: int,
        hidden: tuple[int, int],
        seed: int,
        n_classes: int = 4,
        dropout: tuple[float, float] = (0.0, 0.0),
        l2_lambda: float = 0.0,
    ) -> "HeadConfig":
        """Uniform(-0.1, 0.1) weights drawn layer by layer, matrix then bias."""
        rng = np.random.default_rng(seed)
        widths = [in_features] + [h for h in hidden if h > 0] + [n_classes]
        layers = [
            (
                rng.uniform(-0.1, 0.1, size=(fan_in, fan_out)),
                rng.uniform(-0.1, 0.1, size=fan_out),
            )
            for fan_in, fan_out in zip(widths[:-1], widths[1:])
        ]
        return cls(in_features, hidden, n_classes, dropout, l2_lambda, layers)


def head_forward(features: np.ndarray, cfg: HeadConfig) -> np.ndarray:
    """Inference pass through the head; returns a probability vector."""
    x = np.asarray(features, dtype=np.float64).ravel()
    if x.size != cfg.in_features:
        raise ShapeMismatchError(f"expected {cfg.in_features} features, got {x.size}")
    for w, b in cfg.layers[:-1]:
        x = np.maximum(x @ w + b, 0.0)
    w, b = cfg.layers[-1]
    logits = x @ w + b
    return softmax_rows(logits)


def l2_penalty(weights, l2_lambda: float) -> float:
    """λ · Σ w² over the given weight matrices (biases excluded by the caller)."""
    total = 0.0
    for w in weights:
        total += float(np.sum(np.asarray(w, dtype=np.float64) ** 2))
    return l2_lambda * total


def param_count(cfg) -> int:
    """Trainable parameter count (weights + biases) for a head or attention config."""
    if isinstance(cfg, AttentionConfig):
        d = cfg.d_model
        return 4 * (d * d + d)
    if isinstance(cfg, HeadConfig):
        widths = cfg.layer_widths()
        return sum(fi * fo + fo for fi, fo in zip(widths[:-1], widths[1:]))
    raise TypeError(f"cannot count parameters of {type(cfg).__name__}")
