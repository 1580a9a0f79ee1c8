"""Set-classification network in plain numpy.

An MLP encodes the focal agent's past displacements plus a one-hot class;
an MLP decoder scores every member of the trajectory set through a softmax.
A conditional model also encodes the AV's planned future and concatenates
that feature onto the scene feature before the decoder, so the scene
encoding can be computed once and re-conditioned on any number of plans.

Several per-group sets can share one decoder: their members are laid out
back to back in the output layer and each agent's softmax is restricted to
its own group's segment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from trajset.core import AgentClass, ClassGroup, ade_to_many, as_trajectory
from trajset.nms import DEFAULT_R_NMS, nms_indices
from trajset.setgen import TrajectorySet

log = logging.getLogger(__name__)

N_CLASSES = len(AgentClass)


# --- features -----------------------------------------------------------------

def agent_features(past, agent_class) -> np.ndarray:
    """Flattened past displacements followed by a one-hot agent class."""
    past = as_trajectory(past, "past")
    onehot = np.zeros(N_CLASSES)
    onehot[AgentClass(agent_class).index] = 1.0
    return np.concatenate([np.diff(past, axis=0).ravel(), onehot])


def av_future_features(av_last_observed, av_future) -> np.ndarray:
    """Per-step displacements of the AV plan, starting from its last observed point."""
    pts = np.concatenate([np.asarray(av_last_observed, dtype=np.float64).reshape(1, 2),
                          as_trajectory(av_future, "av_future")])
    return np.diff(pts, axis=0).ravel()


def dataset_features(dataset, conditional: bool = False):
    """Stack features (and AV-plan features) for every scenario in ``dataset``."""
    x = np.stack([agent_features(s.focal_past, s.focal_class) for s in dataset.scenarios])
    if not conditional:
        return x, None
    missing = [s.scenario_id for s in dataset.scenarios if s.av_future is None]
    if missing:
        raise ValueError(f"scenarios without an AV future: {missing[:5]}")
    av = np.stack([av_future_features(s.av_past[-1], s.av_future) for s in dataset.scenarios])
    return x, av


# --- trajectory sets as output layout -------------------------------------------

class SetBank:
    """One or more trajectory sets laid out consecutively in the output layer."""

    def __init__(self, sets):
        if isinstance(sets, TrajectorySet):
            sets = [sets]
        elif isinstance(sets, dict):
            sets = list(sets.values())
        self.sets: list[TrajectorySet] = list(sets)
        if not self.sets:
            raise ValueError("at least one trajectory set required")
        horizons = {s.horizon for s in self.sets}
        if len(horizons) != 1:
            raise ValueError(f"sets disagree on horizon: {sorted(horizons)}")
        self.offsets = np.cumsum([0] + [len(s) for s in self.sets])[:-1].tolist()
        self.trajectories = np.concatenate([s.trajectories for s in self.sets])

    @property
    def size(self) -> int:
        return self.trajectories.shape[0]

    @property
    def horizon(self) -> int:
        return self.trajectories.shape[1]

    def segment(self, agent_class) -> tuple[int, int]:
        """``(offset, size)`` of the set serving ``agent_class``."""
        if len(self.sets) == 1:
            return 0, self.size
        group = AgentClass(agent_class).group
        for off, s in zip(self.offsets, self.sets):
            if s.class_group in (group, ClassGroup.MIXED):
                return off, len(s)
        raise ValueError(f"no trajectory set for class group {group.value!r}")

    def mask(self, classes) -> np.ndarray:
        m = np.zeros((len(classes), self.size), dtype=bool)
        for n, c in enumerate(classes):
            off, size = self.segment(c)
            m[n, off:off + size] = True
        return m

    def target(self, gt_future, agent_class) -> int:
        off, size = self.segment(agent_class)
        return off + assign_target(gt_future, self.trajectories[off:off + size])


def assign_target(gt_future, trajectory_set) -> int:
    """Index of the set member with the smallest ADE to ``gt_future``; ties go low."""
    gt = as_trajectory(gt_future, "gt_future")
    members = np.asarray(getattr(trajectory_set, "trajectories", trajectory_set), dtype=np.float64)
    if members.shape[1:] != gt.shape:
        raise ValueError(f"horizon mismatch: set {members.shape[1]} vs ground truth {gt.shape[0]}")
    return int(np.argmin(ade_to_many(gt, members)))


# --- network ------------------------------------------------------------------

def _relu(x):
    return np.maximum(x, 0.0)


@dataclass
class ModelConfig:
    n_features: int
    n_outputs: int
    feature_size: int = 128
    hidden: int = 512
    n_av_features: int | None = None
    seed: int = 0

    @property
    def conditional(self) -> bool:
        return self.n_av_features is not None


class ClassifierModel:
    """Encoder / optional AV-plan encoder / decoder MLPs with fusion-stage labels."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray] | None = None):
        self.config = config
        self.layout = self._layout(config)
        self.forward_calls = 0
        if params is None:
            params = self._init_params(config.seed)
        missing = set(self.layout) - set(params)
        if missing:
            raise ValueError(f"missing parameter blocks: {sorted(missing)}")
        for name, (shape, _) in self.layout.items():
            if params[name].shape != shape:
                raise ValueError(f"block {name}: expected shape {shape}, got {params[name].shape}")
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in self.layout}

    @staticmethod
    def _layout(c: ModelConfig) -> dict[str, tuple[tuple[int, ...], str]]:
        F, H = c.feature_size, c.hidden
        post = "conditional" if c.conditional else "pre_fusion"
        layers = [("encoder.0", c.n_features, F, "pre_fusion"),
                  ("encoder.1", F, F, "pre_fusion")]
        if c.conditional:
            layers += [("av_encoder.0", c.n_av_features, F, "conditional"),
                       ("av_encoder.1", F, F, "conditional")]
        dec_in = 2 * F if c.conditional else F
        layers += [("decoder.0", dec_in, H, post), ("decoder.1", H, c.n_outputs, post)]
        out = {}
        for name, n_in, n_out, stage in layers:
            out[f"{name}.W"] = ((n_in, n_out), stage)
            out[f"{name}.b"] = ((n_out,), stage)
        return out

    def _init_params(self, seed: int) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        params = {}
        for name, (shape, _) in self.layout.items():
            if name.endswith(".W"):
                bound = shape[0] ** -0.5
                params[name] = rng.uniform(-bound, bound, size=shape)
            else:
                params[name] = np.zeros(shape)
        return params

    @property
    def conditional(self) -> bool:
        return self.config.conditional

    def parameter_blocks(self):
        for name, (shape, stage) in self.layout.items():
            yield name, shape, stage

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    # forward -------------------------------------------------------------

    def _dense(self, prefix, x):
        return x @ self.params[prefix + ".W"] + self.params[prefix + ".b"]

    def encode(self, features) -> np.ndarray:
        """Scene feature of each agent; independent of any AV plan."""
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.config.n_features:
            raise ValueError(f"expected {self.config.n_features} features, got {x.shape[1]}")
        h = _relu(self._dense("encoder.0", x))
        return _relu(self._dense("encoder.1", h))

    def condition(self, scene, av_future=None, mask=None) -> np.ndarray:
        """Logits from precomputed scene features and an optional AV plan."""
        z = self._fuse(scene, av_future)
        h = _relu(self._dense("decoder.0", z))
        logits = self._dense("decoder.1", h)
        if mask is not None:
            logits = np.where(mask, logits, -np.inf)
        return logits

    def _fuse(self, scene, av_future):
        if not self.conditional:
            if av_future is not None:
                raise ValueError("unconditional model takes no AV future")
            return scene
        if av_future is None:
            raise ValueError("conditional model requires an AV future")
        a = np.atleast_2d(np.asarray(av_future, dtype=np.float64))
        if a.shape[1] != self.config.n_av_features:
            raise ValueError(f"expected {self.config.n_av_features} AV features, got {a.shape[1]}")
        if a.shape[0] == 1 and scene.shape[0] > 1:
            a = np.repeat(a, scene.shape[0], axis=0)
        g = _relu(self._dense("av_encoder.1", _relu(self._dense("av_encoder.0", a))))
        return np.concatenate([scene, g], axis=1)

    def logits(self, features, av_future=None, mask=None) -> np.ndarray:
        self.forward_calls += 1
        return self.condition(self.encode(features), av_future, mask)

    def forward(self, features, av_future=None, mask=None) -> np.ndarray:
        """Probabilities over the output layer, one row per agent."""
        return softmax(self.logits(features, av_future, mask))

    # training ------------------------------------------------------------

    def loss_and_grads(self, features, targets, av_future=None, mask=None):
        """Mean cross-entropy and its gradient for every parameter block."""
        p = self.params
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        n = x.shape[0]
        a1 = self._dense("encoder.0", x)
        h1 = _relu(a1)
        a2 = self._dense("encoder.1", h1)
        scene = _relu(a2)
        if self.conditional:
            av = np.atleast_2d(np.asarray(av_future, dtype=np.float64))
            b1 = self._dense("av_encoder.0", av)
            g1 = _relu(b1)
            b2 = self._dense("av_encoder.1", g1)
            g2 = _relu(b2)
            z = np.concatenate([scene, g2], axis=1)
        else:
            z = scene
        c1 = self._dense("decoder.0", z)
        d1 = _relu(c1)
        logits = self._dense("decoder.1", d1)
        if mask is not None:
            logits = np.where(mask, logits, -np.inf)
        logp = log_softmax(logits)
        rows = np.arange(n)
        loss = float(-np.mean(logp[rows, targets]))

        grads = {}
        dlog = np.exp(logp)
        dlog[rows, targets] -= 1.0
        dlog /= n
        grads["decoder.1.W"] = d1.T @ dlog
        grads["decoder.1.b"] = dlog.sum(axis=0)
        dc1 = (dlog @ p["decoder.1.W"].T) * (c1 > 0)
        grads["decoder.0.W"] = z.T @ dc1
        grads["decoder.0.b"] = dc1.sum(axis=0)
        dz = dc1 @ p["decoder.0.W"].T
        F = self.config.feature_size
        dscene = dz[:, :F]
        if self.conditional:
            db2 = dz[:, F:] * (b2 > 0)
            grads["av_encoder.1.W"] = g1.T @ db2
            grads["av_encoder.1.b"] = db2.sum(axis=0)
            db1 = (db2 @ p["av_encoder.1.W"].T) * (b1 > 0)
            grads["av_encoder.0.W"] = av.T @ db1
            grads["av_encoder.0.b"] = db1.sum(axis=0)
        da2 = dscene * (a2 > 0)
        grads["encoder.1.W"] = h1.T @ da2
        grads["encoder.1.b"] = da2.sum(axis=0)
        da1 = (da2 @ p["encoder.1.W"].T) * (a1 > 0)
        grads["encoder.0.W"] = x.T @ da1
        grads["encoder.0.b"] = da1.sum(axis=0)
        return loss, grads

    def loss(self, features, targets, av_future=None, mask=None) -> float:
        logits = self.condition(self.encode(features), av_future, mask)
        logp = log_softmax(logits)
        return float(-np.mean(logp[np.arange(logp.shape[0]), targets]))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


class Adam:
    """Adam with the usual defaults (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class TrainConfig:
    schedule: list[tuple[float, int]] = field(default_factory=lambda: [(1e-3, 4), (1e-4, 4)])
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or any(lr <= 0 or ep < 0 for lr, ep in self.schedule):
            raise ValueError("batch size, learning rates and epochs must be positive")


def build_model(n_features: int, bank: SetBank, *, conditional: bool = False, n_av_features: int | None = None,
                hidden: int = 512, feature_size: int = 128, seed: int = 0) -> ClassifierModel:
    if conditional and n_av_features is None:
        raise ValueError("conditional model needs n_av_features")
    cfg = ModelConfig(n_features=n_features, n_outputs=bank.size, feature_size=feature_size,
                      hidden=hidden, n_av_features=n_av_features if conditional else None, seed=seed)
    return ClassifierModel(cfg)


def training_arrays(dataset, bank: SetBank, conditional: bool):
    """Features, AV features, targets and segment masks for ``dataset``."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    x, av = dataset_features(dataset, conditional)
    classes = dataset.classes()
    targets = np.array([bank.target(s.focal_future, s.focal_class) for s in dataset.scenarios])
    mask = bank.mask(classes) if len(bank.sets) > 1 else None
    return x, av, targets, mask


def train(model: ClassifierModel, dataset, bank, config: TrainConfig | None = None) -> list[float]:
    """Mini-batch Adam on the cross-entropy to the closest set member.

    Returns the mean training loss of each epoch.
    """
    config = config or TrainConfig()
    bank = bank if isinstance(bank, SetBank) else SetBank(bank)
    if bank.size != model.config.n_outputs:
        raise ValueError(f"model has {model.config.n_outputs} outputs, set bank {bank.size}")
    x, av, targets, mask = training_arrays(dataset, bank, model.conditional)
    return fit_arrays(model, x, targets, av, mask, config)


def fit_arrays(model, x, targets, av=None, mask=None, config: TrainConfig | None = None) -> list[float]:
    config = config or TrainConfig()
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.params)
    curve = []
    for lr, epochs in config.schedule:
        for _ in range(epochs):
            order = rng.permutation(n)
            total = 0.0
            for b0 in range(0, n, config.batch_size):
                idx = order[b0:b0 + config.batch_size]
                loss, grads = model.loss_and_grads(
                    x[idx], targets[idx],
                    None if av is None else av[idx],
                    None if mask is None else mask[idx])
                opt.step(model.params, grads, lr)
                total += loss * len(idx)
            curve.append(total / n)
            log.debug("epoch %d loss %.4f", len(curve), curve[-1])
    return curve


# --- inference ------------------------------------------------------------------

@dataclass
class PredictionResult:
    probs: np.ndarray
    indices: list[int]
    trajectories: np.ndarray
    probabilities: np.ndarray


def select_from_probs(probs: np.ndarray, bank: SetBank, agent_class, k: int, r_nms: float) -> PredictionResult:
    off, size = bank.segment(agent_class)
    seg = slice(off, off + size)
    local = nms_indices(bank.trajectories[seg, -1], probs[seg], k, r_nms)
    idx = [off + i for i in local]
    return PredictionResult(probs, idx, bank.trajectories[idx], probs[idx])


def predict(model: ClassifierModel, features, bank, k: int = 6, r_nms: float = DEFAULT_R_NMS,
            av_future=None, agent_class=AgentClass.VEHICLE) -> PredictionResult:
    """One forward pass, then NMS down to ``k`` trajectories."""
    bank = bank if isinstance(bank, SetBank) else SetBank(bank)
    mask = bank.mask([agent_class]) if len(bank.sets) > 1 else None
    probs = model.forward(features, av_future, mask)[0]
    return select_from_probs(probs, bank, agent_class, k, r_nms)


def predict_dataset(model: ClassifierModel, dataset, bank, k: int = 6, r_nms: float = DEFAULT_R_NMS,
                    batch_size: int = 256) -> list[PredictionResult]:
    bank = bank if isinstance(bank, SetBank) else SetBank(bank)
    x, av = dataset_features(dataset, model.conditional)
    classes = dataset.classes()
    mask = bank.mask(classes) if len(bank.sets) > 1 else None
    results = []
    for b0 in range(0, x.shape[0], batch_size):
        sl = slice(b0, b0 + batch_size)
        probs = model.forward(x[sl], None if av is None else av[sl], None if mask is None else mask[sl])
        for p, c in zip(probs, classes[sl]):
            results.append(select_from_probs(p, bank, c, k, r_nms))
    return results


def conditioned_forward(model: ClassifierModel, features, plans: Sequence) -> list[np.ndarray]:
    """Encode the scene once and score it under each AV plan."""
    scene = model.encode(features)
    return [softmax(model.condition(scene, plan)) for plan in plans]
