"""Supervised training: Adam on masked cross-entropy with early stopping.

Every random draw derives from SeedSequence([seed, epoch, stream]), so a
run interrupted after any epoch and resumed from its checkpoint replays
the remaining epochs bitwise identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .container import read_container, write_container
from .errors import ConfigError, DivergedError, EmptyInputError, ShapeError
from .features import FeatureMatrix, split_sequences
from .losses import bce_loss
from .metrics import SegmentStats, eer, f1_from_stats
from .nn.network import Network
from .optim import Adam

VALIDATION_METRICS = ("frame_f1", "tagging_eer")

# (features, targets) pairs: targets are (K, T) frame rolls in frame mode
# and (K,) chunk labels in tagging mode.
TrainItem = tuple[FeatureMatrix, np.ndarray]


@dataclass(frozen=True)
class TrainConfig:
    sequence_frames: int = 128
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 100
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    dropout: float = 0.25
    validation_metric: str = "frame_f1"
    threshold: float = 0.5
    checkpoint_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.sequence_frames < 1:
            raise ConfigError("sequence_frames must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.validation_metric not in VALIDATION_METRICS:
            raise ConfigError(f"validation_metric must be one of {VALIDATION_METRICS}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")


@dataclass
class TrainLogEntry:
    epoch: int
    train_loss: float
    val_metric: float
    is_best: bool


@dataclass
class TrainLog:
    entries: list[TrainLogEntry] = field(default_factory=list)
    events: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = ["# epoch\ttrain_loss\tval_metric\tbest"]
        for entry in self.entries:
            marker = "*" if entry.is_best else "-"
            lines.append(f"{entry.epoch}\t{entry.train_loss:.6f}\t"
                         f"{entry.val_metric:.6f}\t{marker}")
        for event in self.events:
            lines.append(f"# {event}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _check_items(network: Network, items: list[TrainItem], tagging: bool) -> None:
    lengths = set()
    for features, targets in items:
        if features.num_bands != network.spec.num_bands:
            raise ShapeError(
                f"feature bands {features.num_bands} != network bands {network.spec.num_bands}")
        if not features.normalized:
            raise ConfigError("training features must be normalized")
        targets = np.asarray(targets)
        if tagging:
            if targets.shape != (network.spec.num_classes,):
                raise ShapeError(f"chunk labels must be (K,), got {targets.shape}")
            lengths.add(features.num_frames)
        else:
            expected = (network.spec.num_classes, features.num_frames)
            if targets.shape != expected:
                raise ShapeError(f"targets must be {expected}, got {targets.shape}")
    if tagging and len(lengths) > 1:
        raise ShapeError(f"tagging chunks must share one length, got {sorted(lengths)}")


def _epoch_batches(train_items: list[TrainItem], config: TrainConfig, epoch: int,
                   tagging: bool, rng: np.random.Generator):
    """Shuffled batches for one epoch: (x, y, mask) with mask None in tagging mode."""
    batches = []
    if tagging:
        order = rng.permutation(len(train_items))
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            x = np.stack([train_items[i][0].values for i in idx])
            y = np.stack([np.asarray(train_items[i][1]) for i in idx])[:, :, None]
            batches.append((x, y, None))
        return batches
    windows = []
    for features, targets in train_items:
        windows.extend(split_sequences(features, targets,
                                       length_frames=config.sequence_frames,
                                       train_mode=True, epoch_index=epoch))
    order = rng.permutation(len(windows))
    for start in range(0, len(order), config.batch_size):
        idx = order[start:start + config.batch_size]
        x = np.stack([windows[i].features for i in idx])
        y = np.stack([windows[i].targets for i in idx])
        mask = np.stack([windows[i].mask for i in idx])
        batches.append((x, y, mask))
    return batches


def _frame_validation_f1(network: Network, val_items: list[TrainItem],
                         config: TrainConfig) -> float:
    """Frame-level micro F1 at the configured threshold, inference mode."""
    stats = SegmentStats()
    for features, targets in val_items:
        windows = split_sequences(features, targets,
                                  length_frames=config.sequence_frames)
        x = np.stack([w.features for w in windows])
        y = np.stack([w.targets for w in windows])
        keep = np.stack([w.mask for w in windows])[:, None, :]
        out = network.forward(x, training=False)
        pred = out >= config.threshold
        ref = y > 0
        stats = stats + SegmentStats(tp=int((pred & ref & keep).sum()),
                                     fp=int((pred & ~ref & keep).sum()),
                                     fn=int((~pred & ref & keep).sum()))
    return f1_from_stats(stats)[2]


def _tagging_validation_eer(network: Network, val_items: list[TrainItem],
                            config: TrainConfig) -> float:
    labels = np.stack([np.asarray(targets) for _, targets in val_items])
    scores = []
    for start in range(0, len(val_items), config.batch_size):
        batch = val_items[start:start + config.batch_size]
        x = np.stack([features.values for features, _ in batch])
        scores.append(network.forward(x, training=False)[:, :, 0])
    return eer(labels, np.concatenate(scores, axis=0)).mean


def save_checkpoint(path, network: Network, optimizer: Adam, config: TrainConfig,
                    epoch: int, best_epoch: int, best_metric: float | None,
                    since_best: int, best_state: dict[str, np.ndarray],
                    log: TrainLog) -> None:
    """Everything needed to replay the rest of the run bitwise."""
    meta = {
        "spec": network.spec.to_dict(),
        "dtype": str(np.dtype(network.dtype)),
        "epoch": epoch,
        "best_epoch": best_epoch,
        "best_metric": best_metric,
        "since_best": since_best,
        "validation_metric": config.validation_metric,
        "seed": config.seed,
        "adam_step": optimizer.step_count,
        "log": [[e.epoch, e.train_loss, e.val_metric, e.is_best] for e in log.entries],
        "events": list(log.events),
    }
    blobs: dict[str, np.ndarray] = {}
    for name, value in network.state_dict().items():
        blobs[f"cur.{name}"] = value
    for name, value in best_state.items():
        blobs[f"best.{name}"] = value
    blobs.update(optimizer.state_blobs())
    write_container(path, "checkpoint", meta, blobs)


@dataclass
class CheckpointState:
    epoch: int
    best_epoch: int
    best_metric: float | None
    since_best: int
    best_state: dict[str, np.ndarray]
    log: TrainLog


def load_checkpoint(path, network: Network, optimizer: Adam) -> CheckpointState:
    """Restore network weights and optimizer moments in place."""
    _, meta, blobs = read_container(path, expect_kind="checkpoint")
    if meta["spec"] != network.spec.to_dict():
        raise ConfigError("checkpoint was written for a different network spec")
    current = {name[4:]: value for name, value in blobs.items() if name.startswith("cur.")}
    network.load_state(current)
    best_state = {name[5:]: np.array(value, dtype=network.dtype)
                  for name, value in blobs.items() if name.startswith("best.")}
    optimizer.load_state_blobs(blobs)
    optimizer.step_count = int(meta["adam_step"])
    log = TrainLog(entries=[TrainLogEntry(int(e), float(l), float(v), bool(b))
                            for e, l, v, b in meta["log"]],
                   events=list(meta["events"]))
    best_metric = meta["best_metric"]
    return CheckpointState(epoch=int(meta["epoch"]),
                           best_epoch=int(meta["best_epoch"]),
                           best_metric=None if best_metric is None else float(best_metric),
                           since_best=int(meta["since_best"]),
                           best_state=best_state,
                           log=log)


def train(network: Network, train_items: list[TrainItem], val_items: list[TrainItem],
          config: TrainConfig, checkpoint_path=None,
          resume: bool = False) -> tuple[Network, TrainLog]:
    """Fit the network; on return it holds the best-validation weights.

    Early stopping reverts to the best epoch: strict improvement resets
    the counter and training stops once `patience` epochs pass without
    one.  On divergence the best weights are restored before raising, so
    the network is always left usable.
    """
    if len(train_items) == 0 or len(val_items) == 0:
        raise EmptyInputError("training requires non-empty train and validation splits")
    tagging = network.spec.tagging
    wanted = "tagging_eer" if tagging else "frame_f1"
    if config.validation_metric != wanted:
        raise ConfigError(
            f"validation_metric {config.validation_metric!r} does not fit this network; "
            f"expected {wanted!r}")
    _check_items(network, train_items, tagging)
    _check_items(network, val_items, tagging)
    higher_better = not tagging
    validate = _tagging_validation_eer if tagging else _frame_validation_f1

    optimizer = Adam(network.parameters(), config.learning_rate,
                     config.beta1, config.beta2, config.epsilon)
    log = TrainLog()
    best_metric: float | None = None
    best_state = network.copy_state()
    best_epoch = -1
    since_best = 0
    start_epoch = 0
    if resume:
        if checkpoint_path is None:
            raise ConfigError("resume requires a checkpoint path")
        saved = load_checkpoint(checkpoint_path, network, optimizer)
        best_metric = saved.best_metric
        best_state = saved.best_state
        best_epoch = saved.best_epoch
        since_best = saved.since_best
        start_epoch = saved.epoch + 1
        log = saved.log

    stopped = False
    for epoch in range(start_epoch, config.max_epochs):
        shuffle_rng = np.random.default_rng(np.random.SeedSequence([config.seed, epoch, 0]))
        dropout_rng = np.random.default_rng(np.random.SeedSequence([config.seed, epoch, 1]))
        total = 0.0
        count = 0
        for x, y, mask in _epoch_batches(train_items, config, epoch, tagging, shuffle_rng):
            out = network.forward(x, training=True, rng=dropout_rng)
            loss, dout = bce_loss(out, y, mask)
            if not math.isfinite(loss):
                network.load_state(best_state)
                raise DivergedError(f"non-finite training loss at epoch {epoch}")
            network.zero_grads()
            network.backward(dout)
            try:
                optimizer.step(network.parameters(), network.gradients())
            except DivergedError:
                network.load_state(best_state)
                raise
            cells = y.size if mask is None else int(mask.sum()) * y.shape[1]
            total += loss * cells
            count += cells
        train_loss = total / count if count else 0.0

        val_metric = validate(network, val_items, config)
        if best_metric is None:
            improved = True
        elif higher_better:
            improved = val_metric > best_metric
        else:
            improved = val_metric < best_metric
        if improved:
            best_metric = val_metric
            best_state = network.copy_state()
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
        log.entries.append(TrainLogEntry(epoch, train_loss, val_metric, improved))

        if checkpoint_path is not None and (epoch + 1) % config.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, network, optimizer, config, epoch,
                            best_epoch, best_metric, since_best, best_state, log)
        if since_best >= config.patience:
            log.events.append(
                f"stopped early after epoch {epoch}: no improvement for {since_best} epochs")
            stopped = True
            break
    if not stopped and config.max_epochs > 0:
        log.events.append(f"reached max epochs ({config.max_epochs})")
    if best_epoch >= 0:
        network.load_state(best_state)
        log.events.append(
            f"kept weights from epoch {best_epoch} "
            f"({config.validation_metric} {best_metric:.6f})")
    return network, log
