"""A compact dense pose regressor with hand-written analytic gradients.

The network is a tanh trunk (default two hidden layers of 128) with two
linear heads: a 3-unit translation head and a 4-unit rotation head. tanh is
used because the gradient checks compare against central finite differences,
and a kink-free activation keeps those comparisons clean. All math is float64
numpy; forward/backward are batch-first.

The training loss is an equal-weight sum of unsquared Euclidean residual
norms, summed over the batch:

    L = sum_i ( ||t_hat_i - t_i|| + ||q_hat_i - q_i|| )

A squared-norm variant sits behind a flag. The raw rotation head is not
normalized during training; normalization happens only at prediction time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyBatch
from .poses import RelativePose
from .rotations import quat_canonical, quat_normalize

# guards the derivative of ||r|| at r = 0
NORM_EPS = 1e-12

T_DIM = 3
Q_DIM = 4


@dataclass
class PoseMlp:
    input_dim: int
    hidden_sizes: tuple[int, ...]
    seed: int
    trunk_weights: list[np.ndarray] = field(default_factory=list)
    trunk_biases: list[np.ndarray] = field(default_factory=list)
    t_weight: np.ndarray | None = None
    t_bias: np.ndarray | None = None
    q_weight: np.ndarray | None = None
    q_bias: np.ndarray | None = None

    def param_list(self) -> list[np.ndarray]:
        """All parameters in a fixed order: trunk (W, b) pairs, then the
        translation head, then the rotation head."""
        params = []
        for w, b in zip(self.trunk_weights, self.trunk_biases):
            params += [w, b]
        params += [self.t_weight, self.t_bias, self.q_weight, self.q_bias]
        return params

    def set_param_list(self, params: list[np.ndarray]) -> None:
        it = iter(params)
        for i in range(len(self.trunk_weights)):
            self.trunk_weights[i] = next(it)
            self.trunk_biases[i] = next(it)
        self.t_weight, self.t_bias = next(it), next(it)
        self.q_weight, self.q_bias = next(it), next(it)

    def copy(self) -> "PoseMlp":
        return PoseMlp(
            self.input_dim, self.hidden_sizes, self.seed,
            trunk_weights=[w.copy() for w in self.trunk_weights],
            trunk_biases=[b.copy() for b in self.trunk_biases],
            t_weight=self.t_weight.copy(), t_bias=self.t_bias.copy(),
            q_weight=self.q_weight.copy(), q_bias=self.q_bias.copy())

    def n_parameters(self) -> int:
        return sum(p.size for p in self.param_list())


def init_model(input_dim: int, hidden_sizes=(128, 128), seed: int = 0) -> PoseMlp:
    """Seed-deterministic initialization, uniform on +-1/sqrt(fan_in)."""
    if input_dim < 1 or any(h < 1 for h in hidden_sizes):
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    model = PoseMlp(int(input_dim), tuple(int(h) for h in hidden_sizes), int(seed))

    def layer(fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        return w, b

    fan_in = model.input_dim
    for h in model.hidden_sizes:
        w, b = layer(fan_in, h)
        model.trunk_weights.append(w)
        model.trunk_biases.append(b)
        fan_in = h
    model.t_weight, model.t_bias = layer(fan_in, T_DIM)
    model.q_weight, model.q_bias = layer(fan_in, Q_DIM)
    return model


def _as_batch(model: PoseMlp, features) -> tuple[np.ndarray, bool]:
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"expected features with {model.input_dim} columns, got shape {x.shape}")
    return x, single


def _forward_cached(model: PoseMlp, x: np.ndarray):
    activations = [x]
    a = x
    for w, b in zip(model.trunk_weights, model.trunk_biases):
        a = np.tanh(a @ w.T + b)
        activations.append(a)
    t_hat = a @ model.t_weight.T + model.t_bias
    q_hat = a @ model.q_weight.T + model.q_bias
    return t_hat, q_hat, activations


def forward(model: PoseMlp, features) -> tuple[np.ndarray, np.ndarray]:
    """Raw head outputs (t_hat, q_hat_raw); the rotation head is unnormalized."""
    x, single = _as_batch(model, features)
    t_hat, q_hat, _ = _forward_cached(model, x)
    if single:
        return t_hat[0], q_hat[0]
    return t_hat, q_hat


def pose_loss(t_hat, q_hat, t_ref, q_ref, squared: bool = False) -> float:
    """Equal-weight pose loss, summed over the batch (no weighting knob)."""
    t_res = np.atleast_2d(np.asarray(t_hat, dtype=float) - np.asarray(t_ref, dtype=float))
    q_res = np.atleast_2d(np.asarray(q_hat, dtype=float) - np.asarray(q_ref, dtype=float))
    if t_res.shape[0] == 0:
        raise EmptyBatch("loss over an empty batch")
    t_norm = np.linalg.norm(t_res, axis=1)
    q_norm = np.linalg.norm(q_res, axis=1)
    if squared:
        return float(np.sum(t_norm ** 2) + np.sum(q_norm ** 2))
    return float(np.sum(t_norm) + np.sum(q_norm))


def _norm_grad(res: np.ndarray, squared: bool) -> np.ndarray:
    # d||r||/dr = r/||r|| (guarded at 0); d||r||^2/dr = 2r
    if squared:
        return 2.0 * res
    norms = np.maximum(np.linalg.norm(res, axis=1, keepdims=True), NORM_EPS)
    return res / norms


def loss_and_gradients(model: PoseMlp, features, t_ref, q_ref,
                       squared: bool = False) -> tuple[float, list[np.ndarray]]:
    """Loss plus analytic gradients for every parameter, in param_list order."""
    x, _ = _as_batch(model, features)
    t_ref = np.atleast_2d(np.asarray(t_ref, dtype=float))
    q_ref = np.atleast_2d(np.asarray(q_ref, dtype=float))
    if x.shape[0] == 0:
        raise EmptyBatch("gradient over an empty batch")
    if t_ref.shape != (x.shape[0], T_DIM) or q_ref.shape != (x.shape[0], Q_DIM):
        raise DimensionMismatch(
            f"labels must be ({x.shape[0]}, {T_DIM}) and ({x.shape[0]}, {Q_DIM}), "
            f"got {t_ref.shape} and {q_ref.shape}")

    t_hat, q_hat, activations = _forward_cached(model, x)
    value = pose_loss(t_hat, q_hat, t_ref, q_ref, squared=squared)

    g_t = _norm_grad(t_hat - t_ref, squared)
    g_q = _norm_grad(q_hat - q_ref, squared)
    h = activations[-1]
    head_grads = [g_t.T @ h, g_t.sum(axis=0), g_q.T @ h, g_q.sum(axis=0)]

    g_a = g_t @ model.t_weight + g_q @ model.q_weight
    trunk_grads: list[np.ndarray] = []
    for i in range(len(model.trunk_weights) - 1, -1, -1):
        a_out = activations[i + 1]
        a_in = activations[i]
        g_z = g_a * (1.0 - a_out ** 2)
        trunk_grads.insert(0, g_z.sum(axis=0))       # bias
        trunk_grads.insert(0, g_z.T @ a_in)          # weight
        g_a = g_z @ model.trunk_weights[i]
    return value, trunk_grads + head_grads


def predict(model: PoseMlp, features) -> list[RelativePose]:
    """Predicted relative poses: rotation normalized to a canonical unit
    quaternion, translation reported as-is."""
    x, _ = _as_batch(model, features)
    t_hat, q_hat, _ = _forward_cached(model, x)
    return [RelativePose(quat_canonical(quat_normalize(q)), t)
            for q, t in zip(q_hat, t_hat)]


def predict_array(model: PoseMlp, features) -> np.ndarray:
    """Predictions stacked as rows (qw, qx, qy, qz, tx, ty, tz)."""
    poses = predict(model, features)
    return np.array([[*p.rotation, *p.translation] for p in poses])


class Adam:
    """Adaptive-moment optimizer with the standard bias-corrected update."""

    def __init__(self, learning_rate: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.reset()

    def reset(self) -> None:
        """Drop accumulated moments (used between training stages by default)."""
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None
        self._t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        correction1 = 1.0 - self.beta1 ** self._t
        correction2 = 1.0 - self.beta2 ** self._t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * g ** 2
            m_hat = self._m[i] / correction1
            v_hat = self._v[i] / correction2
            out.append(p - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps))
        return out
