"""Experiment configuration: strict JSON schema, validation and hashing.

Precedence, lowest to highest: dataclass defaults, the JSON config file,
command-line flags.  Validation happens before any computation and every
message names the offending field.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields

from .activations import names as activation_names
from .errors import ConfigError, FilesystemError
from .mlp import INITS

KINDS = ("table", "normalize", "mp-check", "train", "depth-sweep", "spectra")
DATASET_KINDS = ("synthetic-blobs", "cifar10-binary")
SCHEMA_VERSION = 1


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _positive_int(name, v):
    if not _is_int(v) or v < 1:
        raise ConfigError(name, f"must be a positive integer, got {v!r}")


def _positive_num(name, v):
    if not _is_num(v) or v <= 0:
        raise ConfigError(name, f"must be a positive finite number, got {v!r}")


def _int_list(name, v, minimum=1, nonempty=True):
    if not isinstance(v, list) or (nonempty and not v):
        raise ConfigError(name, f"must be a nonempty list of integers, got {v!r}")
    for i, item in enumerate(v):
        if not _is_int(item) or item < minimum:
            raise ConfigError(f"{name}[{i}]", f"must be an integer >= {minimum}, got {item!r}")


@dataclass
class OptimizerDescriptor:
    learning_rate: float = 0.01
    momentum: float = 0.0
    batch_size: int = 128

    def validate(self, prefix="optimizer"):
        _positive_num(f"{prefix}.learning_rate", self.learning_rate)
        if not _is_num(self.momentum) or not 0 <= self.momentum < 1:
            raise ConfigError(f"{prefix}.momentum", f"must lie in [0, 1), got {self.momentum!r}")
        _positive_int(f"{prefix}.batch_size", self.batch_size)


@dataclass
class DatasetDescriptor:
    kind: str = "synthetic-blobs"
    classes: int = 10
    n_train: int = 2000
    n_test: int = 500
    input_dim: int = 128
    path: str | None = None
    normalize: bool = True
    separation: float = 1.0
    seed: int = 0

    def validate(self, prefix="dataset"):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"{prefix}.kind", f"must be one of {', '.join(DATASET_KINDS)}; got {self.kind!r}")
        _positive_int(f"{prefix}.classes", self.classes)
        if self.classes < 2:
            raise ConfigError(f"{prefix}.classes", f"need at least 2 classes, got {self.classes}")
        _positive_int(f"{prefix}.n_train", self.n_train)
        _positive_int(f"{prefix}.n_test", self.n_test)
        _positive_int(f"{prefix}.input_dim", self.input_dim)
        if not isinstance(self.normalize, bool):
            raise ConfigError(f"{prefix}.normalize", f"must be true or false, got {self.normalize!r}")
        _positive_num(f"{prefix}.separation", self.separation)
        if not _is_int(self.seed) or self.seed < 0:
            raise ConfigError(f"{prefix}.seed", f"must be a nonnegative integer, got {self.seed!r}")
        if self.kind == "cifar10-binary":
            if not isinstance(self.path, str) or not self.path:
                raise ConfigError(f"{prefix}.path", "is required for cifar10-binary")
            if self.classes != 10:
                raise ConfigError(f"{prefix}.classes", "cifar10-binary has exactly 10 classes")
            if self.input_dim != 3072:
                raise ConfigError(f"{prefix}.input_dim", "cifar10-binary inputs have 3072 features")
        elif self.path is not None:
            raise ConfigError(f"{prefix}.path", "only applies to cifar10-binary")


@dataclass
class ExperimentConfig:
    kind: str = "table"
    activations: list = field(default_factory=lambda: ["relu"])
    depths: list = field(default_factory=lambda: [10])
    width: int = 128
    init: str = "orthogonal"
    sigma_w: float = 1.0
    sigma_x: float = 1.0
    optimizer: OptimizerDescriptor = field(default_factory=OptimizerDescriptor)
    # depth-sweep tries these in order per (activation, depth); empty means optimizer.learning_rate only
    learning_rates: list = field(default_factory=list)
    epochs: int = 30
    dataset: DatasetDescriptor = field(default_factory=DatasetDescriptor)
    seeds: list = field(default_factory=lambda: [0])
    # spectra snapshots; epoch 0 is the initialization
    spectra_epochs: list = field(default_factory=lambda: [0])
    truncation: int = 40
    phi: float = 1.0
    matrix_size: int = 512
    output_dir: str | None = None

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}; got {self.kind!r}")
        valid = activation_names()
        if not isinstance(self.activations, list) or not self.activations:
            raise ConfigError("activations", f"must be a nonempty list of names, got {self.activations!r}")
        for i, a in enumerate(self.activations):
            base = a[:-2] if isinstance(a, str) and a.endswith("_H") else a
            if base not in valid:
                raise ConfigError(f"activations[{i}]", f"unknown activation {a!r}; valid names: {', '.join(valid)}")
        _int_list("depths", self.depths)
        _positive_int("width", self.width)
        if self.init not in INITS:
            raise ConfigError("init", f"must be one of {', '.join(INITS)}; got {self.init!r}")
        _positive_num("sigma_w", self.sigma_w)
        _positive_num("sigma_x", self.sigma_x)
        self.optimizer.validate()
        if not isinstance(self.learning_rates, list):
            raise ConfigError("learning_rates", f"must be a list, got {self.learning_rates!r}")
        for i, lr in enumerate(self.learning_rates):
            _positive_num(f"learning_rates[{i}]", lr)
        _positive_int("epochs", self.epochs)
        self.dataset.validate()
        _int_list("seeds", self.seeds, minimum=0)
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds", f"must not repeat, got {self.seeds!r}")
        if self.kind == "depth-sweep" and len(self.seeds) < 3:
            raise ConfigError("seeds", "depth-sweep needs at least 3 seeds")
        _int_list("spectra_epochs", self.spectra_epochs, minimum=0)
        if max(self.spectra_epochs) > self.epochs:
            raise ConfigError("spectra_epochs", f"entries must not exceed epochs={self.epochs}")
        if not _is_int(self.truncation) or not 2 <= self.truncation <= 64:
            raise ConfigError("truncation", f"must be an integer in [2, 64], got {self.truncation!r}")
        if not _is_num(self.phi) or not 0 < self.phi <= 1:
            raise ConfigError("phi", f"must lie in (0, 1], got {self.phi!r}")
        _positive_int("matrix_size", self.matrix_size)
        if self.output_dir is not None and not isinstance(self.output_dir, str):
            raise ConfigError("output_dir", f"must be a string, got {self.output_dir!r}")
        return self

    def lr_grid(self):
        return list(self.learning_rates) or [self.optimizer.learning_rate]

    def to_dict(self):
        return {"schema": SCHEMA_VERSION, **asdict(self)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self):
        """Short hash of everything that affects results (``output_dir`` excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        data = dict(data)
        schema = data.pop("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError("schema", f"unsupported schema version {schema!r}")
        kwargs = _check_keys(cls, data, "")
        for key, sub in (("optimizer", OptimizerDescriptor), ("dataset", DatasetDescriptor)):
            if key in kwargs:
                if not isinstance(kwargs[key], dict):
                    raise ConfigError(key, "must be a JSON object")
                kwargs[key] = sub(**_check_keys(sub, kwargs[key], f"{key}."))
        return cls(**kwargs).validate()

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)


def _check_keys(cls, data, prefix):
    allowed = {f.name for f in fields(cls)}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}", "unknown field")
    return dict(data)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FilesystemError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return ExperimentConfig.from_json(text)


def apply_overrides(cfg, overrides):
    """Return a validated copy of ``cfg`` with dotted-path ``overrides`` applied."""
    data = cfg.to_dict()
    for path, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = path.split(".")
        for p in parents:
            node = node[p]
        node[leaf] = value
    return ExperimentConfig.from_dict(data)
