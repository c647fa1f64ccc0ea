"""Feedforward surrogate that maps a BS's channel-gain matrix to its
compensation power allocation, replacing the interior-point solve at
inference time.

Input and output are (q+1) x L_max matrices: column l holds cluster l's
connected gains (rows 1..q, descending) and the attached failed user's gain
(last row); absent entries take a pad value. Gains and target powers are
moved to log10 and standardized per feature on the training split; the
network itself is plain affine+ReLU layers trained with minibatch Nadam.
Predictions are mapped back to linear powers, clamped nonnegative, and
scaled uniformly onto the p_max budget, so the budget and nonnegativity
constraints hold for every output by construction.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, ContractError

_EPS = 1e-8  # Nadam denominator guard
_STD_FLOOR = 1e-6  # features constant on the training split


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 5e-4
    decay_rate: float = 0.9  # Nadam first-moment decay (see decay_as_schedule)
    beta2: float = 0.999
    epochs: int = 60
    seed: int = 0
    # Alternate reading of the decay parameter: per-epoch learning-rate decay
    # with the first-moment coefficient fixed at 0.9.
    decay_as_schedule: bool = False

    def __post_init__(self):
        if min(self.batch_size, self.epochs) <= 0 or self.learning_rate <= 0:
            raise ConfigurationError("batch size, epochs, and learning rate must be positive")
        if not (0 < self.decay_rate < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("decay rates must lie in (0, 1)")


@dataclass
class LabeledSample:
    """One training example: a BS's gain matrix and its optimal powers."""

    sample_id: int
    parent_id: int  # id of the unaugmented ancestor (itself when original)
    scenario_seed: int
    bs_id: int
    q: int
    n_clusters: int
    H: np.ndarray  # (q+1, L_max) log10 gains, NaN where absent
    P: np.ndarray  # (q+1, L_max) linear powers, 0 where absent
    meta: dict = field(default_factory=dict)


@dataclass
class SurrogateModel:
    sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    in_mean: np.ndarray
    in_std: np.ndarray
    out_mean: np.ndarray
    out_std: np.ndarray
    pad_in: float  # pad value in log10-gain space
    pad_out: float  # pad value in log10-power space
    q: int
    l_max: int
    p_max: float
    # Optimizer state, persisted so training can resume deterministically.
    step: int = 0
    moments1: list[np.ndarray] = field(default_factory=list)
    moments2: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def init(
        cls, q: int, l_max: int, p_max: float, hidden: tuple[int, ...] = (200, 200, 200), seed: int = 0
    ) -> "SurrogateModel":
        d = (q + 1) * l_max
        sizes = [d, *hidden, d]
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            # He initialization, standard for ReLU stacks
            weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        model = cls(
            sizes=sizes, weights=weights, biases=biases,
            in_mean=np.zeros(d), in_std=np.ones(d),
            out_mean=np.zeros(d), out_std=np.ones(d),
            pad_in=0.0, pad_out=0.0, q=q, l_max=l_max, p_max=p_max,
        )
        model.moments1 = [np.zeros_like(p) for p in model._params()]
        model.moments2 = [np.zeros_like(p) for p in model._params()]
        return model

    def _params(self) -> list[np.ndarray]:
        return self.weights + self.biases


def build_input(scenario, bs_id: int, assoc, l_max: int) -> np.ndarray:
    """Log10 gain matrix for one BS, NaN where a slot is absent.

    A BS without any failed user keeps its pre-outage operation and never
    reaches the surrogate, so that case is a contract violation here.
    """
    by_cluster = assoc.by_bs(bs_id)
    if not by_cluster:
        raise ContractError(f"BS {bs_id} serves no failed user")
    clusters = scenario.clusters_of(bs_id)
    if len(clusters) > l_max:
        raise ContractError(f"BS {bs_id} has {len(clusters)} clusters, layout holds {l_max}")
    q = scenario.params.q
    H = np.full((q + 1, l_max), np.nan)
    for cl_idx, cluster in enumerate(clusters):
        g = scenario.cluster_gains(cluster)
        H[: len(g), cl_idx] = np.log10(g)
        uid = by_cluster.get(cl_idx)
        if uid is not None:
            H[q, cl_idx] = np.log10(scenario.gains[bs_id][uid])
    return H


def build_target(solution, bs_id: int, q: int, l_max: int) -> np.ndarray:
    """Power matrix matching build_input's layout; zeros where absent."""
    P = np.zeros((q + 1, l_max))
    for (b, cl), p in solution.p_connected.items():
        if b == bs_id:
            P[: len(p), cl] = p
    for (b, cl), pf in solution.p_failed.items():
        if b == bs_id:
            P[q, cl] = pf
    return P


def _pad_inputs(X: np.ndarray, pad: float) -> np.ndarray:
    X = X.copy()
    X[np.isnan(X)] = pad
    return X


def _encode_targets(P: np.ndarray, pad_out: float) -> np.ndarray:
    """Linear powers to log10 with pads: zero entries carry no power."""
    Y = np.full_like(P, pad_out)
    mask = P > 0
    Y[mask] = np.log10(P[mask])
    return Y


def fit_normalization(model: SurrogateModel, samples: list[LabeledSample]) -> None:
    """Compute pad values and per-feature standardization on the training
    split, in place. Must run before train()."""
    H = np.stack([s.H.ravel() for s in samples])
    P = np.stack([s.P.ravel() for s in samples])
    model.pad_in = float(np.nanmin(H)) - 1.0
    model.pad_out = float(np.log10(P[P > 0].min())) - 1.0
    X = _pad_inputs(H, model.pad_in)
    Y = _encode_targets(P, model.pad_out)
    model.in_mean = X.mean(axis=0)
    model.in_std = np.maximum(X.std(axis=0), _STD_FLOOR)
    model.out_mean = Y.mean(axis=0)
    model.out_std = np.maximum(Y.std(axis=0), _STD_FLOOR)


def _forward_std(model: SurrogateModel, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Standardized-space forward pass; returns output and layer activations."""
    acts = [X]
    a = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return a, acts


def forward(model: SurrogateModel, H: np.ndarray) -> np.ndarray:
    """Predict the power matrix for one gain matrix (NaN-padded, log10).

    Output is linear mW, nonnegative, per-BS total within p_max, and zero on
    pad slots.
    """
    mask = ~np.isnan(H)
    x = (_pad_inputs(H.ravel()[None, :], model.pad_in) - model.in_mean) / model.in_std
    y, _ = _forward_std(model, x)
    P = 10.0 ** (y[0] * model.out_std + model.out_mean)
    P = P.reshape(H.shape)
    P[~mask] = 0.0
    P = np.maximum(P, 0.0)
    total = P.sum()
    if total > model.p_max:
        P *= model.p_max / total
    return P


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    if pred.shape != target.shape:
        raise ContractError(f"shape mismatch {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def backprop(
    model: SurrogateModel, X: np.ndarray, Y: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """MSE loss and its gradient w.r.t. every parameter (weights then biases)."""
    out, acts = _forward_std(model, X)
    batch = X.shape[0]
    loss = float(np.mean((out - Y) ** 2))
    delta = 2.0 * (out - Y) / (batch * Y.shape[1])
    grads_w = [np.empty(0)] * len(model.weights)
    grads_b = [np.empty(0)] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return loss, grads_w + grads_b


def nadam_step(model: SurrogateModel, grads: list[np.ndarray], config: TrainConfig) -> None:
    """One Nadam update (Adam with Nesterov momentum), in place."""
    model.step += 1
    t = model.step
    # Under the schedule interpretation, train() folds the decay into the
    # learning rate and hands this function a per-epoch config.
    b1 = config.decay_rate
    b2 = config.beta2
    lr = config.learning_rate
    for p, g, m, v in zip(model._params(), grads, model.moments1, model.moments2):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** (t + 1))
        v_hat = v / (1 - b2**t)
        update = b1 * m_hat + (1 - b1) * g / (1 - b1**t)
        p -= lr * update / (np.sqrt(v_hat) + _EPS)


def augment_permutations(sample: LabeledSample, count: int, seed: int) -> list[LabeledSample]:
    """Permuted copies of a sample: random row permutations within the
    connected-user rows and random column permutations, applied identically
    to the gain and power matrices. The failed-user row never mixes with the
    connected rows."""
    rng = np.random.default_rng(seed)
    out = []
    q = sample.q
    for i in range(count):
        rows = np.concatenate([rng.permutation(q), [q]])
        cols = rng.permutation(sample.H.shape[1])
        out.append(
            replace(
                sample,
                sample_id=-1,  # assigned by the caller's id scheme
                parent_id=sample.parent_id,
                H=sample.H[np.ix_(rows, cols)].copy(),
                P=sample.P[np.ix_(rows, cols)].copy(),
                meta={**sample.meta, "augmented": i},
            )
        )
    return out


def _design_matrices(model: SurrogateModel, samples: list[LabeledSample]):
    X = np.stack([_pad_inputs(s.H.ravel(), model.pad_in) for s in samples])
    Y = np.stack([_encode_targets(s.P.ravel(), model.pad_out) for s in samples])
    X = (X - model.in_mean) / model.in_std
    Y = (Y - model.out_mean) / model.out_std
    return X, Y


def train(
    model: SurrogateModel,
    train_samples: list[LabeledSample],
    val_samples: list[LabeledSample],
    config: TrainConfig | None = None,
) -> dict:
    """Minibatch training; returns loss curves and restores the
    best-validation checkpoint into the model."""
    config = config or TrainConfig()
    if not train_samples or not val_samples:
        raise ConfigurationError("training and validation splits must be non-empty")
    fit_normalization(model, train_samples)
    X, Y = _design_matrices(model, train_samples)
    Xv, Yv = _design_matrices(model, val_samples)
    rng = np.random.default_rng(config.seed)
    curves = {"train_mse": [], "val_mse": []}
    best_val = np.inf
    best = None
    base_lr = config.learning_rate
    for epoch in range(config.epochs):
        cfg = config
        if config.decay_as_schedule:
            cfg = replace(config, learning_rate=base_lr * config.decay_rate**epoch,
                          decay_rate=0.9, decay_as_schedule=False)
        order = rng.permutation(len(X))
        losses = []
        for start in range(0, len(X), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = backprop(model, X[idx], Y[idx])
            nadam_step(model, grads, cfg)
            losses.append(loss)
        val_out, _ = _forward_std(model, Xv)
        val_mse = mse_loss(val_out, Yv)
        curves["train_mse"].append(float(np.mean(losses)))
        curves["val_mse"].append(val_mse)
        if val_mse < best_val:
            best_val = val_mse
            best = ([w.copy() for w in model.weights], [b.copy() for b in model.biases])
    if best is not None:
        model.weights, model.biases = best
    curves["best_val_mse"] = float(best_val)
    return curves


# --- persistence: JSON header plus base64 little-endian float64 blocks -------


def _blob(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode()


def _unblob(text: str, shape) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), dtype="<f8").reshape(shape).copy()


def save_model(model: SurrogateModel, path: str) -> None:
    doc = {
        "sizes": model.sizes,
        "q": model.q,
        "l_max": model.l_max,
        "p_max": model.p_max,
        "pad_in": model.pad_in,
        "pad_out": model.pad_out,
        "step": model.step,
        "in_mean": _blob(model.in_mean),
        "in_std": _blob(model.in_std),
        "out_mean": _blob(model.out_mean),
        "out_std": _blob(model.out_std),
        "weights": [_blob(w) for w in model.weights],
        "biases": [_blob(b) for b in model.biases],
        "moments1": [_blob(m) for m in model.moments1],
        "moments2": [_blob(m) for m in model.moments2],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path: str) -> SurrogateModel:
    with open(path) as fh:
        doc = json.load(fh)
    sizes = doc["sizes"]
    w_shapes = list(zip(sizes[:-1], sizes[1:]))
    model = SurrogateModel(
        sizes=sizes,
        weights=[_unblob(t, s) for t, s in zip(doc["weights"], w_shapes)],
        biases=[_unblob(t, (s[1],)) for t, s in zip(doc["biases"], w_shapes)],
        in_mean=_unblob(doc["in_mean"], (sizes[0],)),
        in_std=_unblob(doc["in_std"], (sizes[0],)),
        out_mean=_unblob(doc["out_mean"], (sizes[-1],)),
        out_std=_unblob(doc["out_std"], (sizes[-1],)),
        pad_in=doc["pad_in"],
        pad_out=doc["pad_out"],
        q=doc["q"],
        l_max=doc["l_max"],
        p_max=doc["p_max"],
        step=doc["step"],
    )
    shapes = w_shapes + [(s[1],) for s in w_shapes]
    model.moments1 = [_unblob(t, s) for t, s in zip(doc["moments1"], shapes)]
    model.moments2 = [_unblob(t, s) for t, s in zip(doc["moments2"], shapes)]
    return model
