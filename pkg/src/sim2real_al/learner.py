"""Desk-scale MC-dropout classifier and its training loop.

A single-hidden-layer tanh network trained with plain mini-batch
gradient descent on cross-entropy.  Dropout (fresh Bernoulli masks on
the hidden activations, inverted scaling) stays active during training
and during the stochastic predictive passes, which approximate the
Bayesian predictive distribution by Monte-Carlo integration.

Models are treated as immutable snapshots: fit returns a new instance,
so a snapshot can be scored concurrently while the next one trains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.1
    batch_size: int = 32
    seed: int = 0
    fine_tune: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not np.isfinite(self.learning_rate):
            raise ValueError("learning_rate must be finite")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class MCDropoutClassifier:
    """input_dim -> hidden_dim (tanh, dropout) -> n_classes (softmax)."""

    def __init__(self, input_dim: int, hidden_dim: int = 64, n_classes: int = 2,
                 dropout_rate: float = 0.1, seed: int = 0, params=None):
        if not (0.0 <= dropout_rate < 1.0):
            raise ValueError("dropout_rate must lie in [0, 1)")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.n_classes = n_classes
        self.dropout_rate = dropout_rate
        if params is not None:
            self.w1, self.b1, self.w2, self.b2 = [np.array(p, dtype=float) for p in params]
        else:
            rng = np.random.default_rng(seed)
            s1 = 1.0 / np.sqrt(input_dim)
            s2 = 1.0 / np.sqrt(hidden_dim)
            self.w1 = rng.uniform(-s1, s1, size=(input_dim, hidden_dim))
            self.b1 = rng.uniform(-s1, s1, size=hidden_dim)
            self.w2 = rng.uniform(-s2, s2, size=(hidden_dim, n_classes))
            self.b2 = rng.uniform(-s2, s2, size=n_classes)

    # ------------------------------------------------------------------
    # forward passes
    # ------------------------------------------------------------------

    def _hidden(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(x @ self.w1 + self.b1)

    def features(self, x) -> np.ndarray:
        """Pre-softmax logits (dropout off); the selection feature space."""
        single = np.asarray(x).ndim == 1
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        logits = self._hidden(x2) @ self.w2 + self.b2
        return logits[0] if single else logits

    def predict_mean(self, x) -> np.ndarray:
        """Deterministic softmax output with dropout disabled."""
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        probs = _softmax(self._hidden(x2) @ self.w2 + self.b2)
        return probs[0] if np.asarray(x).ndim == 1 else probs

    def predict_samples(self, x, t: int, seed: int = 0) -> np.ndarray:
        """T stochastic softmax passes with fresh dropout masks.

        The same T masks apply to every input row, i.e. the passes play
        the role of T shared posterior weight samples.  Shape: (T, C)
        for a single input, (N, T, C) for a batch.
        """
        if t < 1:
            raise ValueError("need at least one Monte-Carlo pass")
        single = np.asarray(x).ndim == 1
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        if self.dropout_rate == 0:
            # no stochasticity: every pass equals the deterministic one
            one = _softmax(self._hidden(x2) @ self.w2 + self.b2)
            probs = np.repeat(one[:, None, :], t, axis=1)
            return probs[0] if single else probs
        hidden = self._hidden(x2)                       # (N, H)
        rng = np.random.default_rng(seed)
        masks = (rng.random((t, self.hidden_dim)) >= self.dropout_rate)
        masks = masks / (1.0 - self.dropout_rate)       # (T, H)
        dropped = hidden[:, None, :] * masks[None, :, :]  # (N, T, H)
        probs = _softmax(dropped @ self.w2 + self.b2)
        return probs[0] if single else probs

    # ------------------------------------------------------------------
    # training
    # ------------------------------------------------------------------

    def fit(self, x, y, cfg: TrainConfig) -> "MCDropoutClassifier":
        """Mini-batch gradient descent on cross-entropy, dropout active.

        fine_tune continues from this snapshot's weights; otherwise the
        weights reinitialize from cfg.seed, making the result
        independent of the incoming state.  Returns a new model.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=int)
        if x.shape[0] == 0:
            raise ValueError("empty training set")
        if np.any(y < 0) or np.any(y >= self.n_classes):
            raise ValueError("labels outside [0, n_classes)")

        if cfg.fine_tune:
            model = self.copy()
        else:
            model = MCDropoutClassifier(self.input_dim, self.hidden_dim,
                                        self.n_classes, self.dropout_rate,
                                        seed=cfg.seed)
        rng = np.random.default_rng(cfg.seed)
        n = x.shape[0]
        keep = 1.0 - model.dropout_rate
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                xb, yb = x[idx], y[idx]
                a1 = np.tanh(xb @ model.w1 + model.b1)
                if model.dropout_rate > 0:
                    mask = (rng.random(a1.shape) >= model.dropout_rate) / keep
                else:
                    mask = 1.0
                a1d = a1 * mask
                probs = _softmax(a1d @ model.w2 + model.b2)
                dz2 = probs.copy()
                dz2[np.arange(len(yb)), yb] -= 1.0
                dz2 /= len(yb)
                dw2 = a1d.T @ dz2
                db2 = dz2.sum(axis=0)
                da1 = (dz2 @ model.w2.T) * mask * (1.0 - a1 ** 2)
                dw1 = xb.T @ da1
                db1 = da1.sum(axis=0)
                model.w1 -= cfg.learning_rate * dw1
                model.b1 -= cfg.learning_rate * db1
                model.w2 -= cfg.learning_rate * dw2
                model.b2 -= cfg.learning_rate * db2
            for p in (model.w1, model.b1, model.w2, model.b2):
                if not np.all(np.isfinite(p)):
                    raise FloatingPointError("training produced non-finite weights")
        return model

    def copy(self) -> "MCDropoutClassifier":
        return MCDropoutClassifier(self.input_dim, self.hidden_dim,
                                   self.n_classes, self.dropout_rate,
                                   params=(self.w1, self.b1, self.w2, self.b2))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_loss(model: MCDropoutClassifier, x, y) -> float:
    """Mean cross-entropy with dropout off (for gradient checking)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=int)
    probs = model.predict_mean(x)
    probs = np.atleast_2d(probs)
    return float(-np.log(probs[np.arange(len(y)), y] + 1e-300).mean())


def analytic_gradients(model: MCDropoutClassifier, x, y):
    """Full-batch cross-entropy gradients with dropout off."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=int)
    a1 = np.tanh(x @ model.w1 + model.b1)
    probs = _softmax(a1 @ model.w2 + model.b2)
    dz2 = probs.copy()
    dz2[np.arange(len(y)), y] -= 1.0
    dz2 /= len(y)
    dw2 = a1.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = (dz2 @ model.w2.T) * (1.0 - a1 ** 2)
    dw1 = x.T @ da1
    db1 = da1.sum(axis=0)
    return {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


def gradient_check(model: MCDropoutClassifier, x, y, n_checks: int = 40,
                   step: float = 1e-5, seed: int = 0) -> float:
    """Max relative error of analytic vs central finite-difference grads.

    Dropout is disabled for the check; a random subset of weight
    coordinates across all four parameter tensors is probed.
    """
    grads = analytic_gradients(model, x, y)
    rng = np.random.default_rng(seed)
    names = ["w1", "b1", "w2", "b2"]
    worst = 0.0
    for _ in range(n_checks):
        name = names[rng.integers(len(names))]
        param = getattr(model, name)
        flat_idx = rng.integers(param.size)
        idx = np.unravel_index(flat_idx, param.shape)
        orig = param[idx]
        param[idx] = orig + step
        loss_plus = cross_entropy_loss(model, x, y)
        param[idx] = orig - step
        loss_minus = cross_entropy_loss(model, x, y)
        param[idx] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        analytic = grads[name][idx]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-5)
        worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# checkpoints: versioned npz with layer sizes and weights, bit-exact
# ---------------------------------------------------------------------------

def save_checkpoint(model: MCDropoutClassifier, path) -> None:
    np.savez(path,
             version=np.array([CHECKPOINT_VERSION]),
             dims=np.array([model.input_dim, model.hidden_dim, model.n_classes]),
             dropout_rate=np.array([model.dropout_rate]),
             w1=model.w1, b1=model.b1, w2=model.w2, b2=model.b2)


def load_checkpoint(path) -> MCDropoutClassifier:
    data = np.load(path)
    version = int(data["version"][0])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    dims = data["dims"]
    return MCDropoutClassifier(int(dims[0]), int(dims[1]), int(dims[2]),
                               dropout_rate=float(data["dropout_rate"][0]),
                               params=(data["w1"], data["b1"], data["w2"], data["b2"]))
