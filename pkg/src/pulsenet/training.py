"""Minibatch training with per-batch augmentation re-randomization, early
stopping on test loss, and randomized-repeat evaluation.

Seeds: batch order comes from (seed, ORDER, epoch); batch augmentation from
(seed, BATCH, epoch, batch) when the spec re-randomizes (else the epoch key
is pinned to 0); the cheap per-epoch test-loss pass reuses one fixed seed so
the early-stopping series is comparable across epochs; the reported
evaluation draws fresh delay/noise realizations per repeat.
"""
import dataclasses
import time

import numpy as np

from . import autodiff as ad
from . import seeding
from .augment import augment_batch
from .metrics import MetricsReport, absolute_error, subset_error
from .scenes import sample_scene_batch
from .seeding import child_seed, rng_from

OPTIMIZERS = ("adam", "sgd")
LOSSES = ("ce", "bce")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, batch):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclasses.dataclass
class TrainConfig:
    batch_size: int = 512
    learning_rate: float = 0.001
    max_epochs: int = 90
    patience: int = 15
    optimizer: str = "adam"
    momentum: float = 0.9  # sgd only
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    loss: str = "ce"
    seed: int = 0

    def validate(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm)")
        if not 0 < self.patience < self.max_epochs:
            raise ValueError("need 0 < patience < max_epochs")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer={self.optimizer!r}: expected one of {OPTIMIZERS}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss={self.loss!r}: expected one of {LOSSES}")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d).validate()


@dataclasses.dataclass
class TrainHistory:
    train_loss: list
    test_loss: list
    test_error: list
    best_epoch: int
    stop_epoch: int
    wall_time_s: float

    def to_dict(self):
        return dataclasses.asdict(self)


def _make_optimizer(model, cfg):
    params = list(model.parameters())
    if cfg.optimizer == "adam":
        return ad.Adam(params, cfg.learning_rate, (cfg.adam_beta1, cfg.adam_beta2), cfg.adam_eps)
    return ad.SGD(params, cfg.learning_rate, cfg.momentum)


def _check_loss_head(model, cfg):
    want = "softmax-ce" if cfg.loss == "ce" else "sigmoid-bce"
    if model.cfg.head != want:
        raise ValueError(
            f"TrainConfig.loss={cfg.loss!r} needs model head {want!r}, "
            f"model has {model.cfg.head!r}"
        )


def _one_hot(labels, k):
    out = np.zeros((len(labels), k), dtype=np.float32)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _batch_loss(model, batch, labels, cfg, train):
    logits = model.forward(batch, train=train)
    if cfg.loss == "ce":
        return ad.cross_entropy(logits, labels), logits
    return ad.bce_with_logits(logits, _one_hot(labels, model.cfg.num_classes)), logits


def forward_chunks(model, batch, chunk=256):
    outs = [model.predict_logits(batch[i : i + chunk]) for i in range(0, len(batch), chunk)]
    return np.concatenate(outs, axis=0)


def _test_pass(model, pulses, aug, seed, cfg):
    """Fixed-seed augmentation pass: (mean loss, error) for early stopping."""
    batch, labels = augment_batch(pulses, aug, seed)
    logits = forward_chunks(model, batch)
    zt = ad.Tensor(logits)
    if cfg.loss == "ce":
        loss = float(ad.cross_entropy(zt, labels).data)
        err = float(np.mean(np.argmax(logits, axis=1) != labels))
    else:
        onehot = _one_hot(labels, model.cfg.num_classes)
        loss = float(ad.bce_with_logits(zt, onehot).data)
        err = subset_error(multilabel_predict(logits), onehot.astype(int))
    return loss, err


def train(model, dataset, aug, cfg, log=None):
    """Train on dataset.train_pulses; early-stop on fixed-seed test loss.

    The best-test-loss parameter snapshot is restored into `model` before
    returning.  Raises TrainingDiverged on a non-finite minibatch loss.
    """
    cfg.validate()
    aug.validate()
    _check_loss_head(model, cfg)
    train_pulses = dataset.train_pulses
    test_pulses = dataset.test_pulses
    opt = _make_optimizer(model, cfg)
    eval_seed = child_seed(cfg.seed, seeding.EVAL)
    history = TrainHistory([], [], [], best_epoch=0, stop_epoch=0, wall_time_s=0.0)
    best_loss = np.inf
    best_snap = None
    t0 = time.perf_counter()

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng_from(cfg.seed, seeding.ORDER, epoch).permutation(len(train_pulses))
        epoch_losses = []
        for bi in range(0, len(order), cfg.batch_size):
            chunk = order[bi : bi + cfg.batch_size]
            if len(chunk) < 2:
                continue  # batch norm needs >= 2
            batch_idx = bi // cfg.batch_size
            aug_epoch = epoch if aug.rerandomize else 0
            aseed = child_seed(cfg.seed, seeding.BATCH, aug_epoch, batch_idx)
            batch, labels = augment_batch([train_pulses[j] for j in chunk], aug, aseed)
            opt.zero_grad()
            try:
                loss, _ = _batch_loss(model, batch, labels, cfg, train=True)
            except ValueError as exc:  # non-finite logits reaching the loss
                raise TrainingDiverged(epoch, batch_idx) from exc
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, batch_idx)
            loss.backward()
            opt.step()
            epoch_losses.append(value)

        test_loss, test_err = _test_pass(model, test_pulses, aug, eval_seed, cfg)
        history.train_loss.append(float(np.mean(epoch_losses)))
        history.test_loss.append(test_loss)
        history.test_error.append(test_err)
        if log:
            log(epoch, history)
        if test_loss < best_loss:
            best_loss = test_loss
            history.best_epoch = epoch
            best_snap = model.snapshot()
        elif epoch - history.best_epoch >= cfg.patience:
            history.stop_epoch = epoch
            break
    else:
        history.stop_epoch = cfg.max_epochs

    if best_snap is not None:
        model.restore(best_snap)
    history.wall_time_s = time.perf_counter() - t0
    return history


def multilabel_predict(logits):
    """Positive logit -> class present; zero is not positive."""
    logits = np.asarray(logits)
    if not np.isfinite(logits).all():
        raise ValueError("non-finite logits")
    return (logits > 0).astype(np.int64)


def evaluate(model, pulses, aug, repeats=1, seed=0):
    """Augment each test pulse `repeats` times with fresh delay/noise.

    CE-head models report top-1 error; BCE-head models report absolute and
    subset error over the K binary outputs.  Per-record outcomes carry
    (pulse_width, snr_db, L=1, correct).
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    aug.validate()
    k = model.cfg.num_classes
    ce_mode = model.cfg.head == "softmax-ce"
    outcomes = []
    bit_errors = 0
    bit_total = 0
    for r in range(repeats):
        aseed = child_seed(seed, seeding.EVAL, r)
        batch, labels = augment_batch(pulses, aug, aseed)
        logits = forward_chunks(model, batch)
        if ce_mode:
            correct = np.argmax(logits, axis=1) == labels
        else:
            preds = multilabel_predict(logits)
            onehot = _one_hot(labels, k).astype(np.int64)
            correct = np.all(preds == onehot, axis=1)
            bit_errors += int(np.sum(preds != onehot))
            bit_total += preds.size
        outcomes.extend(
            (p.pulse_width, p.snr_db, 1, bool(c)) for p, c in zip(pulses, correct)
        )
    n_wrong = sum(1 for o in outcomes if not o[3])
    if ce_mode:
        return MetricsReport(
            kind="ce",
            k=k,
            repeats=repeats,
            top1_error=n_wrong / len(outcomes),
            per_sample_outcomes=outcomes,
        )
    return MetricsReport(
        kind="bce",
        k=k,
        repeats=repeats,
        e_abs=bit_errors / bit_total,
        e_sub=n_wrong / len(outcomes),
        per_sample_outcomes=outcomes,
    )


# ---------------------------------------------------------------------------
# multi-pulse (scene) training and evaluation


def train_multipulse(model, scene_cfg, specs, cfg, scenes_per_epoch, test_scenes=256, log=None):
    """BCE training on freshly generated mixed-L scenes every batch."""
    cfg.validate()
    scene_cfg.validate()
    if cfg.loss != "bce" or model.cfg.head != "sigmoid-bce":
        raise ValueError("multi-pulse training requires loss='bce' and a sigmoid-bce head")
    opt = _make_optimizer(model, cfg)
    eval_seed = child_seed(cfg.seed, seeding.EVAL)
    test_batch, test_labels, _ = sample_scene_batch(scene_cfg, specs, test_scenes, eval_seed)
    history = TrainHistory([], [], [], best_epoch=0, stop_epoch=0, wall_time_s=0.0)
    best_loss = np.inf
    best_snap = None
    t0 = time.perf_counter()

    n_batches = max(1, scenes_per_epoch // cfg.batch_size)
    for epoch in range(1, cfg.max_epochs + 1):
        epoch_losses = []
        for bi in range(n_batches):
            sseed = child_seed(cfg.seed, seeding.SCENE, epoch, bi)
            batch, labels, _ = sample_scene_batch(scene_cfg, specs, cfg.batch_size, sseed)
            opt.zero_grad()
            try:
                logits = model.forward(batch, train=True)
                loss = ad.bce_with_logits(logits, labels)
            except ValueError as exc:
                raise TrainingDiverged(epoch, bi) from exc
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, bi)
            loss.backward()
            opt.step()
            epoch_losses.append(value)

        logits = forward_chunks(model, test_batch)
        test_loss = float(ad.bce_with_logits(ad.Tensor(logits), test_labels).data)
        test_err = subset_error(multilabel_predict(logits), test_labels.astype(int))
        history.train_loss.append(float(np.mean(epoch_losses)))
        history.test_loss.append(test_loss)
        history.test_error.append(test_err)
        if log:
            log(epoch, history)
        if test_loss < best_loss:
            best_loss = test_loss
            history.best_epoch = epoch
            best_snap = model.snapshot()
        elif epoch - history.best_epoch >= cfg.patience:
            history.stop_epoch = epoch
            break
    else:
        history.stop_epoch = cfg.max_epochs

    if best_snap is not None:
        model.restore(best_snap)
    history.wall_time_s = time.perf_counter() - t0
    return history


def evaluate_multilabel(model, scene_cfg, specs, l, repeats=1, scenes_per_repeat=256, seed=0):
    """Fixed-L scene evaluation; fresh scenes per repeat."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    k = len(specs)
    outcomes = []
    bit_errors = 0
    bit_total = 0
    for r in range(repeats):
        sseed = child_seed(seed, seeding.EVAL, l, r)
        batch, labels, scenes = sample_scene_batch(scene_cfg, specs, scenes_per_repeat, sseed, l=l)
        logits = forward_chunks(model, batch)
        preds = multilabel_predict(logits)
        target = labels.astype(np.int64)
        correct = np.all(preds == target, axis=1)
        bit_errors += int(np.sum(preds != target))
        bit_total += preds.size
        outcomes.extend(
            (max(s.pulse_widths, default=0), s.snr_db, s.l, bool(c))
            for s, c in zip(scenes, correct)
        )
    n_wrong = sum(1 for o in outcomes if not o[3])
    return MetricsReport(
        kind="bce",
        k=k,
        repeats=repeats,
        e_abs=bit_errors / bit_total,
        e_sub=n_wrong / len(outcomes),
        per_sample_outcomes=outcomes,
    )


# ---------------------------------------------------------------------------
# input-length sweep


def sweep_input_length(d_values, dataset, model_cfg, train_cfg, aug_mode="asynchronous",
                       repeats=10, eval_seed=1, build_seed=0, log=None, jobs=1):
    """Train one model per input length under identical budgets.

    Returns one row dict per D (in input order); a failed cell records its
    error message and the sweep continues.  `jobs` > 1 runs cells in a
    bounded worker pool (each cell owns its model exclusively).
    """
    from .augment import AugmentSpec
    from .resnet import build_resnet, count_parameters

    def _cell(d):
        row = {"input_length": int(d)}
        try:
            cfg_d = dataclasses.replace(model_cfg, input_length=int(d))
            model = build_resnet(cfg_d, seed=build_seed)
            aug = AugmentSpec(d=int(d), mode=aug_mode)
            hist = train(model, dataset, aug, train_cfg, log=log)
            report = evaluate(model, dataset.test_pulses, aug, repeats=repeats, seed=eval_seed)
            row["test_error"] = report.top1_error if report.top1_error is not None else report.e_sub
            row["parameters"] = count_parameters(model)
            row["best_epoch"] = hist.best_epoch
            row["stop_epoch"] = hist.stop_epoch
        except Exception as exc:  # keep sweeping the remaining cells
            row["error"] = str(exc)
        return row

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_cell, d_values))
    return [_cell(d) for d in d_values]


def write_sweep_csv(rows, path):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["input_length", "test_error", "parameters", "best_epoch", "stop_epoch", "error"])
        for row in rows:
            writer.writerow([
                row.get("input_length"),
                row.get("test_error", ""),
                row.get("parameters", ""),
                row.get("best_epoch", ""),
                row.get("stop_epoch", ""),
                row.get("error", ""),
            ])
