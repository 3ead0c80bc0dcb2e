"""Small differentiable binary classifiers with hand-written gradients.

Two model kinds are supported: plain logistic regression and a
one-hidden-layer MLP with a sigmoid output unit.  Parameters travel as
a flat float64 vector plus layer-shape metadata so the federation
machinery can exchange and average them coordinate-wise.  Everything
here is a pure function: training returns new parameters and never
mutates its inputs, and all randomness comes from explicitly seeded
PCG64 streams, so a given (spec, params, data, config) tuple always
reproduces the same bits on one platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .seeding import rng_from

LOGISTIC = "logistic-regression"
MLP = "mlp-1hidden"
MODEL_KINDS = (LOGISTIC, MLP)
ACTIVATIONS = ("relu", "sigmoid")

# Probabilities are clamped into [PROB_EPS, 1 - PROB_EPS] before log().
PROB_EPS = 1e-12

# Tightest open-interval bounds representable in float64; forward() clips
# saturated sigmoid outputs into them so predictions never reach 0 or 1.
_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)

LayerShapes = tuple[tuple[str, tuple[int, ...]], ...]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class ParameterSet:
    """Flat float64 parameter vector plus the layer layout it packs.

    ``shapes`` is an ordered tuple of (layer name, dimensions); the
    vector holds the layers' entries concatenated in that order, each in
    row-major order.  The vector is frozen read-only on construction and
    must be finite everywhere.
    """

    values: np.ndarray
    shapes: LayerShapes

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 1:
            raise ValueError(f"parameter values must be 1-D, got shape {values.shape}")
        shapes = tuple((str(n), tuple(int(d) for d in dims)) for n, dims in self.shapes)
        expected = sum(math.prod(dims) for _, dims in shapes)
        if expected != values.size:
            raise ValueError(
                f"layer shapes describe {expected} entries but vector has {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("parameter values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shapes", shapes)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def layers(self) -> dict[str, np.ndarray]:
        """Read-only views of each layer, reshaped to its dimensions."""
        out = {}
        offset = 0
        for name, dims in self.shapes:
            step = math.prod(dims)
            out[name] = self.values[offset : offset + step].reshape(dims)
            offset += step
        return out

    def with_values(self, values: np.ndarray) -> "ParameterSet":
        """New ParameterSet with the same layout and different entries."""
        return ParameterSet(values, self.shapes)


@dataclass(frozen=True)
class ModelSpec:
    """Architecture descriptor; the parameter layout is a pure function of it."""

    kind: str
    input_dim: int
    hidden_dim: int | None = None
    activation: str = "relu"

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if int(self.input_dim) < 1:
            raise ValueError("input_dim must be >= 1")
        object.__setattr__(self, "input_dim", int(self.input_dim))
        if self.kind == MLP:
            if self.hidden_dim is None or int(self.hidden_dim) < 1:
                raise ValueError("mlp-1hidden requires hidden_dim >= 1")
            object.__setattr__(self, "hidden_dim", int(self.hidden_dim))
            if self.activation not in ACTIVATIONS:
                raise ValueError(
                    f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}"
                )
        elif self.hidden_dim is not None:
            raise ValueError("logistic-regression takes no hidden_dim")

    @property
    def layer_shapes(self) -> LayerShapes:
        d = self.input_dim
        if self.kind == LOGISTIC:
            return (("output_kernel", (d,)), ("output_bias", (1,)))
        h = self.hidden_dim
        return (
            ("hidden_kernel", (d, h)),
            ("hidden_bias", (h,)),
            ("output_kernel", (h,)),
            ("output_bias", (1,)),
        )

    @property
    def param_count(self) -> int:
        return sum(math.prod(dims) for _, dims in self.layer_shapes)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with binary labels and stable sample identifiers."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64, values in {0, 1}
    ids: np.ndarray  # (n,) int64, unique

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64, copy=True)
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        ids = np.array(self.ids, dtype=np.int64, copy=True)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        n = features.shape[0]
        if labels.shape != (n,) or ids.shape != (n,):
            raise ValueError("features, labels and ids must agree in length")
        if n and not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if np.unique(ids).size != n:
            raise ValueError("sample ids must be unique")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        for arr in (features, labels, ids):
            arr.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Rows selected by position, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.ids[idx])


@dataclass(frozen=True)
class TrainConfig:
    """Local-training hyperparameters; ``epochs`` is the per-round pass count.

    ``epochs`` of zero (or a zero learning rate) is legal and makes
    training the identity, which keeps composed schedules well defined.
    """

    epochs: int
    batch_size: int
    learning_rate: float
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.epochs) < 0:
            raise ValueError("epochs must be >= 0")
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be >= 1")
        lr = float(self.learning_rate)
        if not math.isfinite(lr) or lr < 0:
            raise ValueError("learning_rate must be finite and >= 0")
        if int(self.seed) < 0:
            raise ValueError("seed must be >= 0")
        object.__setattr__(self, "epochs", int(self.epochs))
        object.__setattr__(self, "batch_size", int(self.batch_size))
        object.__setattr__(self, "learning_rate", lr)
        object.__setattr__(self, "seed", int(self.seed))


def _fans(dims: tuple[int, ...]) -> tuple[int, int]:
    # Kernels are either (fan_in, fan_out) matrices or (fan_in,) vectors
    # feeding a single output unit.
    if len(dims) == 2:
        return dims[0], dims[1]
    return dims[0], 1


def init_params(spec: ModelSpec, seed: int) -> ParameterSet:
    """Glorot-uniform kernels and zero biases, deterministic in (spec, seed).

    Each kernel entry is drawn uniformly from (-s, s) with
    s = sqrt(6 / (fan_in + fan_out)); layers are drawn in layout order
    from a single PCG64 stream.
    """
    rng = rng_from(seed)
    parts = []
    for name, dims in spec.layer_shapes:
        if name.endswith("bias"):
            parts.append(np.zeros(math.prod(dims)))
        else:
            fan_in, fan_out = _fans(dims)
            s = math.sqrt(6.0 / (fan_in + fan_out))
            parts.append(rng.uniform(-s, s, size=dims).ravel())
    return ParameterSet(np.concatenate(parts), spec.layer_shapes)


def _check_features(spec: ModelSpec, features: np.ndarray) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {X.shape}")
    if X.shape[1] != spec.input_dim:
        raise ValueError(
            f"feature width {X.shape[1]} does not match model input_dim {spec.input_dim}"
        )
    return X


def _check_params(spec: ModelSpec, params: ParameterSet) -> None:
    if params.shapes != spec.layer_shapes:
        raise ValueError("parameter layout does not match the model spec")


def _forward_parts(
    spec: ModelSpec, params: ParameterSet, X: np.ndarray
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    layers = params.layers()
    if spec.kind == LOGISTIC:
        z = X @ layers["output_kernel"] + layers["output_bias"][0]
        return _sigmoid(z), {}
    z1 = X @ layers["hidden_kernel"] + layers["hidden_bias"]
    if spec.activation == "relu":
        h = np.maximum(z1, 0.0)
    else:
        h = _sigmoid(z1)
    z2 = h @ layers["output_kernel"] + layers["output_bias"][0]
    return _sigmoid(z2), {"z1": z1, "h": h}


def forward(spec: ModelSpec, params: ParameterSet, features: np.ndarray) -> np.ndarray:
    """Per-row probability of the positive class, strictly inside (0, 1)."""
    X = _check_features(spec, features)
    _check_params(spec, params)
    p, _ = _forward_parts(spec, params, X)
    return np.clip(p, _P_LO, _P_HI)


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clamped away from 0 and 1."""
    y = np.asarray(labels, dtype=np.float64)
    if y.size == 0:
        raise ValueError("empty batch")
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def loss_and_grad(
    spec: ModelSpec,
    params: ParameterSet,
    features: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, ParameterSet]:
    """Batch cross-entropy and its analytic gradient in the params layout."""
    X = _check_features(spec, features)
    _check_params(spec, params)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if y.size != X.shape[0]:
        raise ValueError("features and labels must agree in length")
    if y.size == 0:
        raise ValueError("empty batch")
    n = y.size
    layers = params.layers()
    p, cache = _forward_parts(spec, params, X)
    loss = bce_loss(p, y)
    dz = (p - y) / n  # d(mean BCE)/d(logit) through the sigmoid output
    if spec.kind == LOGISTIC:
        grad = np.concatenate([X.T @ dz, [dz.sum()]])
        return loss, params.with_values(grad)
    w2 = layers["output_kernel"]
    h, z1 = cache["h"], cache["z1"]
    dw2 = h.T @ dz
    db2 = dz.sum()
    dh = dz[:, None] * w2[None, :]
    if spec.activation == "relu":
        dz1 = dh * (z1 > 0.0)
    else:
        s = _sigmoid(z1)
        dz1 = dh * s * (1.0 - s)
    dw1 = X.T @ dz1
    db1 = dz1.sum(axis=0)
    grad = np.concatenate([dw1.ravel(), db1, dw2, [db2]])
    return loss, params.with_values(grad)


def train_local(
    spec: ModelSpec,
    params: ParameterSet,
    dataset: Dataset,
    cfg: TrainConfig,
) -> tuple[ParameterSet, int]:
    """Plain mini-batch SGD for ``cfg.epochs`` passes over ``dataset``.

    Each epoch visits every sample once in a fresh Fisher-Yates order
    keyed by (cfg.seed, epoch index); batches are consecutive slices of
    that order and the last batch may be short.  Returns the new
    parameters and the number of epochs run; the inputs are untouched.
    """
    _check_params(spec, params)
    if dataset.n == 0:
        raise ValueError("cannot train on an empty dataset")
    if dataset.feature_dim != spec.input_dim:
        raise ValueError(
            f"dataset width {dataset.feature_dim} does not match model input_dim {spec.input_dim}"
        )
    if cfg.epochs == 0:
        return params, 0
    current = params
    values = params.values
    for epoch in range(cfg.epochs):
        order = rng_from(cfg.seed, epoch).permutation(dataset.n)
        for start in range(0, dataset.n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grad = loss_and_grad(spec, current, dataset.features[idx], dataset.labels[idx])
            values = values - cfg.learning_rate * grad.values
            current = params.with_values(values)
    return current, cfg.epochs


def replace_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    """Copy of ``cfg`` with a different shuffle seed."""
    return replace(cfg, seed=seed)
