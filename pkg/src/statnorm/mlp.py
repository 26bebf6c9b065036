"""Deep feedforward network with hand-written backpropagation.

Column convention as in ``h_l = W_l x_{l-1} + b_l``, ``x_l = f(h_l)``: a
hidden weight has shape ``(width, fan_in)`` and batches are rows, so a layer
computes ``H = X @ W.T + b``.  Hidden layer 1 maps the input (``input_dim``)
to ``width``; layers 2..L are square.  A softmax head of shape
``(classes, width)`` sits on top and is trained with cross-entropy.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import CapacityError, DivergenceError, FormatError, InvalidArgumentError
from .spectral import gram_spectrum

INITS = ("orthogonal", "gaussian")
MAX_JACOBIAN_WIDTH = 2048
CHECKPOINT_MAGIC = b"SANMLP\x00\x01"


def resolve_activation(name):
    """Registry name, or ``<name>_H`` for the statically normalized variant."""
    from .activations import get
    from .normalizer import normalized

    if isinstance(name, str) and name.endswith("_H"):
        return normalized(name[:-2])
    return get(name)


def orthogonal(n_out, n_in, rng, gain=1.0):
    """Haar-distributed (semi-)orthogonal matrix via QR with sign correction."""
    big, small = max(n_out, n_in), min(n_out, n_in)
    a = rng.standard_normal((big, small))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_out < n_in:
        q = q.T
    return gain * q


def init_weight(n_out, n_in, init, rng, sigma_w=1.0):
    if init == "orthogonal":
        # orthonormal columns shrink per-unit variance by n_in/n_out; undo it
        return orthogonal(n_out, n_in, rng, sigma_w * math.sqrt(max(1.0, n_out / n_in)))
    if init == "gaussian":
        return rng.standard_normal((n_out, n_in)) * (sigma_w / math.sqrt(n_in))
    raise InvalidArgumentError(f"unknown init {init!r}; expected one of {INITS}")


@dataclass
class MlpModel:
    activation_name: str
    init: str
    sigma_w: float
    weights: list
    biases: list
    head_w: np.ndarray
    head_b: np.ndarray
    activation: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.activation is None:
            self.activation = resolve_activation(self.activation_name)

    @property
    def depth(self):
        return len(self.weights)

    @property
    def width(self):
        return self.weights[0].shape[0]

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def classes(self):
        return self.head_w.shape[0]

    def parameters(self):
        """Flat list of parameter arrays in a fixed order (weights, biases, head)."""
        return [*self.weights, *self.biases, self.head_w, self.head_b]

    def square_layers(self):
        return [l for l, W in enumerate(self.weights, start=1) if W.shape[0] == W.shape[1]]

    def copy(self):
        return MlpModel(self.activation_name, self.init, self.sigma_w, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.head_w.copy(), self.head_b.copy(), self.activation)


def init_model(depth, width, activation="relu", init="orthogonal", seed=0, input_dim=None, classes=10,
               sigma_w=1.0):
    if isinstance(depth, bool) or not isinstance(depth, int) or depth < 1:
        raise InvalidArgumentError(f"depth must be a positive integer, got {depth!r}")
    if isinstance(width, bool) or not isinstance(width, int) or width < 2:
        raise InvalidArgumentError(f"width must be an integer >= 2, got {width!r}")
    if init not in INITS:
        raise InvalidArgumentError(f"unknown init {init!r}; expected one of {INITS}")
    input_dim = width if input_dim is None else int(input_dim)
    if input_dim < 1 or classes < 2:
        raise InvalidArgumentError("input_dim must be >= 1 and classes >= 2")
    act = resolve_activation(activation)
    rng = np.random.default_rng(seed)
    weights = [init_weight(width, input_dim, init, rng, sigma_w)]
    weights += [init_weight(width, width, init, rng, sigma_w) for _ in range(depth - 1)]
    biases = [np.zeros(width) for _ in range(depth)]
    head_w = init_weight(classes, width, init, rng, sigma_w)
    return MlpModel(activation, init, sigma_w, weights, biases, head_w, np.zeros(classes), act)


@dataclass
class ForwardCache:
    inputs: np.ndarray
    pre: list       # h_1..h_L
    post: list      # x_1..x_L
    derivs: list    # f'(h_1)..f'(h_L)
    logits: np.ndarray


def _finite(a):
    # one reduction instead of an elementwise mask; a sum overflowing from
    # finite entries only happens past 1e300, which counts as divergence anyway
    return math.isfinite(float(np.sum(a)))


def forward(model, X, want_deriv=True):
    """Forward pass; with ``want_deriv=False`` only the logits are kept."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.input_dim:
        raise InvalidArgumentError(f"input has {X.shape[1]} features, model expects {model.input_dim}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("input batch is not finite")
    act = model.activation
    pre, post, derivs = [], [], []
    x = X
    # overflow is detected explicitly below
    with np.errstate(over="ignore", invalid="ignore"):
        for l, (W, b) in enumerate(zip(model.weights, model.biases), start=1):
            h = x @ W.T + b
            x, d = act.forward(h, want_deriv=want_deriv)
            if not (_finite(h) and _finite(x)):
                raise DivergenceError(f"forward pass diverged at layer {l}", layer=l)
            if want_deriv:
                pre.append(h)
                post.append(x)
                derivs.append(d)
        logits = x @ model.head_w.T + model.head_b
    if not _finite(logits):
        raise DivergenceError("forward pass diverged at the output head", layer=model.depth + 1)
    return ForwardCache(X, pre, post, derivs, logits)


def log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))


def cross_entropy(logits, labels):
    return float(-np.mean(log_softmax(logits)[np.arange(labels.shape[0]), labels]))


def backward(model, cache, labels):
    """Mean cross-entropy loss and gradients ordered like ``model.parameters()``."""
    labels = np.asarray(labels)
    B = labels.shape[0]
    logp = log_softmax(cache.logits)
    loss = float(-np.mean(logp[np.arange(B), labels]))
    delta = np.exp(logp)
    delta[np.arange(B), labels] -= 1.0
    delta /= B
    top = cache.post[-1]
    g_head_w = delta.T @ top
    g_head_b = delta.sum(axis=0)
    delta = delta @ model.head_w
    g_w = [None] * model.depth
    g_b = [None] * model.depth
    for i in range(model.depth - 1, -1, -1):
        dh = delta * cache.derivs[i]
        below = cache.post[i - 1] if i > 0 else cache.inputs
        g_w[i] = dh.T @ below
        g_b[i] = dh.sum(axis=0)
        if not (np.all(np.isfinite(g_w[i])) and np.all(np.isfinite(g_b[i]))):
            raise DivergenceError(f"gradient diverged at layer {i + 1}", layer=i + 1)
        if i > 0:
            delta = dh @ model.weights[i]
    return loss, [*g_w, *g_b, g_head_w, g_head_b]


def loss_and_gradients(model, X, labels):
    return backward(model, forward(model, X), labels)


def gradient_check(model, X, labels, n_params=100, seed=0, step=1e-6):
    """Largest relative gap between backprop and central differences at random parameters.

    Relative error is ``|g - fd| / max(|g|, |fd|, floor)`` where the floor
    keeps vanishing gradients from turning rounding noise into large ratios.
    """
    _, grads = loss_and_gradients(model, X, labels)
    params = model.parameters()
    sizes = np.array([p.size for p in params])
    rng = np.random.default_rng(seed)
    flat = rng.choice(int(sizes.sum()), size=min(n_params, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    floor = 1e-8
    worst = 0.0
    for k in flat:
        i = int(np.searchsorted(offsets, k, side="right") - 1)
        j = np.unravel_index(k - offsets[i], params[i].shape)
        p = params[i]
        old = p[j]
        p[j] = old + step
        up = cross_entropy(forward(model, X).logits, labels)
        p[j] = old - step
        down = cross_entropy(forward(model, X).logits, labels)
        p[j] = old
        fd = (up - down) / (2 * step)
        g = grads[i][j]
        worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), floor))
    return worst


def predict(model, X, batch_size=1024):
    out = []
    for i in range(0, X.shape[0], batch_size):
        out.append(np.argmax(forward(model, X[i:i + batch_size], want_deriv=False).logits, axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


def accuracy(model, X, labels):
    return float(np.mean(predict(model, X) == labels))


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class SGD:
    learning_rate: float = 0.01
    momentum: float = 0.0
    batch_size: int = 128

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidArgumentError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise InvalidArgumentError(f"momentum must lie in [0, 1), got {self.momentum}")
        if isinstance(self.batch_size, bool) or not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be a positive integer, got {self.batch_size!r}")


@dataclass
class TrainState:
    model: MlpModel
    optimizer: SGD = field(default_factory=SGD)
    epoch: int = 0
    seed: int = 0
    velocity: list = None

    def __post_init__(self):
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in self.model.parameters()]
        self._rng = np.random.default_rng([self.seed, 0x5EED])


@dataclass
class TrainLog:
    records: list = field(default_factory=list)
    failed_at: int | None = None
    failure: str | None = None

    @property
    def failed(self):
        return self.failed_at is not None

    @property
    def status(self):
        return f"failed at epoch {self.failed_at}" if self.failed else "ok"

    def final_test_accuracy(self):
        return self.records[-1]["test_acc"] if self.records else 0.0

    def best_test_accuracy(self):
        return max((r["test_acc"] for r in self.records), default=0.0)

    def epochs_to(self, threshold):
        for r in self.records:
            if r["test_acc"] >= threshold:
                return r["epoch"]
        return None

    def to_jsonl(self):
        import json

        lines = [json.dumps(r, sort_keys=True) for r in self.records]
        if self.failed:
            lines.append(json.dumps({"epoch": self.failed_at, "status": self.status, "error": self.failure},
                                    sort_keys=True))
        return "".join(line + "\n" for line in lines)


def sgd_step(state, grads):
    opt = state.optimizer
    for p, v, g in zip(state.model.parameters(), state.velocity, grads):
        if opt.momentum:
            v *= opt.momentum
            v -= opt.learning_rate * g
            p += v
        else:
            p -= opt.learning_rate * g


def train_epoch(state, X, y):
    n = X.shape[0]
    order = state._rng.permutation(n)
    bs = state.optimizer.batch_size
    total, seen = 0.0, 0
    for i in range(0, n, bs):
        idx = order[i:i + bs]
        loss, grads = loss_and_gradients(state.model, X[idx], y[idx])
        sgd_step(state, grads)
        total += loss * idx.shape[0]
        seen += idx.shape[0]
    state.epoch += 1
    return total / seen


def train(state, dataset, epochs, on_epoch=None, stop_at=None):
    """Run ``epochs`` epochs of minibatch SGD; divergence ends the run early.

    With ``stop_at`` set, training also stops after the first epoch whose test
    accuracy reaches it.  Single-threaded BLAS keeps the parameter trajectory
    bitwise reproducible.
    """
    log = TrainLog()
    with threadpool_limits(limits=1):
        for _ in range(epochs):
            current = state.epoch + 1
            try:
                loss = train_epoch(state, dataset.x_train, dataset.y_train)
                if not math.isfinite(loss):
                    raise DivergenceError("loss is not finite")
                rec = {
                    "epoch": state.epoch,
                    "loss": loss,
                    "train_acc": accuracy(state.model, dataset.x_train, dataset.y_train),
                    "test_acc": accuracy(state.model, dataset.x_test, dataset.y_test),
                }
            except DivergenceError as exc:
                log.failed_at = current
                log.failure = str(exc)
                break
            log.records.append(rec)
            if on_epoch is not None:
                on_epoch(state, rec)
            if stop_at is not None and rec["test_acc"] >= stop_at:
                break
    return log


# ---------------------------------------------------------------------------
# Jacobian and spectra


@dataclass
class JacobianProduct:
    """Factors ``(D_l, W_l)`` of ``J = D_L W_L ... D_1 W_1`` at one input point."""

    factors: list
    _assembled: np.ndarray = field(default=None, repr=False)

    def matrix(self):
        if self._assembled is None:
            J = None
            for d, W in self.factors:
                layer = d[:, None] * W
                J = layer if J is None else layer @ J
            self._assembled = J
        return self._assembled

    def apply(self, v):
        """``J @ v`` without forming ``J``."""
        out = np.asarray(v, dtype=np.float64)
        for d, W in self.factors:
            out = d * (W @ out)
        return out

    def singular_values(self):
        return np.linalg.svd(self.matrix(), compute_uv=False)


def assemble_jacobian(model, x0):
    if model.width > MAX_JACOBIAN_WIDTH or model.input_dim > MAX_JACOBIAN_WIDTH:
        raise CapacityError(f"dense Jacobian assembly is limited to width {MAX_JACOBIAN_WIDTH}")
    x0 = np.asarray(x0, dtype=np.float64).reshape(1, -1)
    cache = forward(model, x0)
    return JacobianProduct([(d[0].copy(), W) for d, W in zip(cache.derivs, model.weights)])


def network_output(model, x0):
    """Last hidden activation ``x_L`` for a single input."""
    return forward(model, np.asarray(x0, dtype=np.float64).reshape(1, -1)).post[-1][0]


def layer_spectra(model, epoch=None):
    """Spectrum of ``W_l W_l^T`` for every square hidden layer."""
    out = []
    for l in model.square_layers():
        out.append(gram_spectrum(model.weights[l - 1], {"layer": l, "epoch": epoch, "role": "W W^T"}))
    return out


# ---------------------------------------------------------------------------
# checkpoints
#
# little-endian layout:
#   magic             8 bytes  b"SANMLP\0\1"
#   depth, width, input_dim, classes      4 x uint64
#   len(activation)   uint64, then the UTF-8 name
#   len(init)         uint64, then the UTF-8 name
#   sigma_w           float64
#   W_1..W_L, b_1..b_L, head_w, head_b    float64, row-major, shapes implied by the dims


def save_checkpoint(model, path):
    name = model.activation_name.encode()
    init = model.init.encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<4Q", model.depth, model.width, model.input_dim, model.classes))
        fh.write(struct.pack("<Q", len(name)) + name)
        fh.write(struct.pack("<Q", len(init)) + init)
        fh.write(struct.pack("<d", model.sigma_w))
        for p in model.parameters():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise FormatError("bad checkpoint magic", offset=0)
    pos = 8

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError("truncated checkpoint", offset=pos)
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    depth, width, input_dim, classes = struct.unpack("<4Q", take(32))
    name = take(struct.unpack("<Q", take(8))[0]).decode()
    init = take(struct.unpack("<Q", take(8))[0]).decode()
    (sigma_w,) = struct.unpack("<d", take(8))

    def arr(*shape):
        n = int(np.prod(shape))
        return np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)

    weights = [arr(width, input_dim)] + [arr(width, width) for _ in range(depth - 1)]
    biases = [arr(width) for _ in range(depth)]
    head_w = arr(classes, width)
    head_b = arr(classes)
    if pos != len(blob):
        raise FormatError("trailing bytes after checkpoint payload", offset=pos)
    return MlpModel(name, init, sigma_w, weights, biases, head_w, head_b)
