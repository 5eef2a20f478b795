"""Joint purchase-probability training.

The objective sums a binary cross-entropy term on the scalar purchase logit
and a full-vocabulary cross-entropy term whose target is the YES or NO
answer token; both read the BOS-position hidden state. Optimization is
Adam with two learning rates: the low-rank adapter factors (group alpha)
get lr_alpha, the output heads (group beta) get lr_beta, both under a
linear warmup with no decay.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyBatchError, EmptyCorpusError, NonFiniteLossError
from .model.params import GROUP_ALPHA, GROUP_BETA, Model
from .model.transformer import backward_batch, forward_batch
from .promptize.prompt import TokenSequence, render_prompt, tokenize
from .promptize.vocab import PAD_ID, VOCAB, Vocab
from .synthdata.records import LeadRecord

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    epochs: int = 1
    lr_alpha: float = 1e-4
    lr_beta: float = 1e-3
    warmup_fraction: float = 0.05
    loss_mode: str = "ctr_plus_qa"
    seed: int = 0
    max_len: int = 2048          # tokenize budget for rendered prompts
    prompt_mode: str = "full"

    def __post_init__(self):
        if self.lr_alpha > self.lr_beta:
            raise ConfigError("lr_alpha must not exceed lr_beta")
        if not (0.0 <= self.warmup_fraction < 1.0):
            raise ConfigError("warmup_fraction must be in [0, 1)")
        if self.loss_mode not in ("ctr_only", "ctr_plus_qa"):
            raise ConfigError(f"unknown loss_mode: {self.loss_mode}")
        if self.prompt_mode not in ("full", "text_only"):
            raise ConfigError(f"unknown prompt_mode: {self.prompt_mode}")


@dataclass(frozen=True)
class LossBreakdown:
    l_ctr: float
    l_qa: float
    l_total: float
    batch_size: int


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def loss_ctr(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy of sigmoid(logit) against 0/1 labels."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if logits.size == 0:
        raise EmptyBatchError("loss_ctr over empty batch")
    losses = labels * _softplus(-logits) + (1.0 - labels) * _softplus(logits)
    return float(losses.mean())


def loss_ctr_grad(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d loss_ctr / d logits (already divided by the batch size)."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    sig = 1.0 / (1.0 + np.exp(-z))
    return (sig - y) / z.shape[0]


def loss_qa(logits: np.ndarray, labels: np.ndarray, vocab: Vocab = VOCAB) -> float:
    """Mean full-vocabulary cross-entropy with the YES/NO token as target."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        raise EmptyBatchError("loss_qa over empty batch")
    targets = np.where(np.asarray(labels) > 0, vocab.yes_id, vocab.no_id)
    m = logits.max(axis=-1, keepdims=True)
    lse = (m[:, 0] + np.log(np.exp(logits - m).sum(axis=-1)))
    picked = logits[np.arange(logits.shape[0]), targets]
    return float((lse - picked).mean())


def loss_qa_grad(logits: np.ndarray, labels: np.ndarray, vocab: Vocab = VOCAB) -> np.ndarray:
    """d loss_qa / d logits: (softmax - onehot(target)) / batch."""
    z = np.asarray(logits, dtype=np.float64)
    targets = np.where(np.asarray(labels) > 0, vocab.yes_id, vocab.no_id)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    probs = e / e.sum(axis=-1, keepdims=True)
    probs[np.arange(z.shape[0]), targets] -= 1.0
    return probs / z.shape[0]


def loss_total(l_ctr: float, l_qa: float, mode: str, batch_size: int,
               step: int | None = None) -> LossBreakdown:
    if not (np.isfinite(l_ctr) and np.isfinite(l_qa)):
        raise NonFiniteLossError(step if step is not None else -1,
                                 f"l_ctr={l_ctr} l_qa={l_qa}")
    total = l_ctr + l_qa if mode == "ctr_plus_qa" else l_ctr
    return LossBreakdown(l_ctr=l_ctr, l_qa=l_qa, l_total=total, batch_size=batch_size)


def lr_at(step: int, total_steps: int, base_lr: float, warmup_fraction: float) -> float:
    """Linear warmup over ceil(fraction * total) steps, then constant."""
    if total_steps <= 0:
        raise ConfigError("total_steps must be positive")
    if not (0 <= step < total_steps):
        raise ConfigError(f"step {step} outside [0, {total_steps})")
    warm = int(np.ceil(warmup_fraction * total_steps))
    if warm == 0:
        return base_lr
    return base_lr * min(1.0, (step + 1) / warm)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: list[tuple[str, np.ndarray, str]], grads: dict[str, np.ndarray],
              state: AdamState, lr_by_group: dict[str, float]) -> None:
    """One in-place Adam update over (name, array, group) parameter triples."""
    state.t += 1
    t = state.t
    for name, arr, group in params:
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        m, v = state.m[name], state.v[name]
        m *= ADAM_BETA1
        m += (1 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1 - ADAM_BETA2) * (g * g)
        m_hat = m / (1 - ADAM_BETA1 ** t)
        v_hat = v / (1 - ADAM_BETA2 ** t)
        arr -= (lr_by_group[group] * m_hat / (np.sqrt(v_hat) + ADAM_EPS)).astype(arr.dtype)


def pad_batch(seqs: list[TokenSequence], round_to: int | None = None,
              t_cap: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad token sequences to the batch maximum with PAD.

    round_to pads the batch length up to a multiple; pads sit after each
    BOS and cannot influence real positions, so outputs are unchanged
    while scratch-buffer shapes stay few.
    """
    t_max = max(len(s) for s in seqs)
    if round_to:
        rounded = ((t_max + round_to - 1) // round_to) * round_to
        t_max = max(t_max, min(rounded, t_cap)) if t_cap else rounded
    ids = np.full((len(seqs), t_max), PAD_ID, dtype=np.int64)
    bos = np.empty(len(seqs), dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, :len(s.ids)] = s.ids
        bos[i] = s.bos_index
    return ids, bos


def loss_and_grads(model: Model, seqs: list[TokenSequence], labels: np.ndarray,
                   mode: str = "ctr_plus_qa", train_mode: bool = False,
                   rng: np.random.Generator | None = None,
                   step: int | None = None, round_to: int | None = 64):
    """Forward + loss + backward over one batch; shared by fit and tests."""
    ids, bos = pad_batch(seqs, round_to=round_to, t_cap=model.cfg.max_context)
    out, cache = forward_batch(model, ids, bos, train_mode=train_mode, rng=rng,
                               want_cache=True)
    l_c = loss_ctr(out.h_ctr, labels)
    l_q = loss_qa(out.h_qa, labels)
    breakdown = loss_total(l_c, l_q, mode, len(seqs), step=step)
    d_ctr = loss_ctr_grad(out.h_ctr, labels).astype(out.h_ctr.dtype)
    if mode == "ctr_plus_qa":
        d_qa = loss_qa_grad(out.h_qa, labels).astype(out.h_qa.dtype)
    else:
        d_qa = np.zeros_like(out.h_qa)
    grads = backward_batch(model, cache, d_ctr, d_qa)
    return breakdown, grads


@dataclass
class StepLog:
    step: int
    lr_alpha: float
    lr_beta: float
    l_ctr: float
    l_qa: float
    l_total: float


def fit(model: Model, leads: list[LeadRecord], cfg: TrainConfig,
        progress: bool = False) -> tuple[Model, list[StepLog]]:
    """Train in place over seeded-shuffle batches; returns the loss log."""
    if not leads:
        raise EmptyCorpusError("fit requires a non-empty training set")
    seqs = [tokenize(render_prompt(lead, cfg.prompt_mode), max_len=cfg.max_len)
            for lead in leads]
    labels = np.asarray([lead.label for lead in leads], dtype=np.float64)

    n = len(leads)
    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * steps_per_epoch
    log: list[StepLog] = []
    if total_steps == 0:
        return model, log

    order_rng = np.random.default_rng([cfg.seed, 1])
    state = AdamState()
    step = 0
    for _ in range(cfg.epochs):
        perm = order_rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            drop_rng = np.random.default_rng([cfg.seed, 2, step])
            breakdown, grads = loss_and_grads(
                model, [seqs[i] for i in idx], labels[idx], mode=cfg.loss_mode,
                train_mode=True, rng=drop_rng, step=step)
            lr_a = lr_at(step, total_steps, cfg.lr_alpha, cfg.warmup_fraction)
            lr_b = lr_at(step, total_steps, cfg.lr_beta, cfg.warmup_fraction)
            adam_step(model.trainable_params(), grads, state,
                      {GROUP_ALPHA: lr_a, GROUP_BETA: lr_b})
            log.append(StepLog(step, lr_a, lr_b, breakdown.l_ctr, breakdown.l_qa,
                               breakdown.l_total))
            if progress and step % 10 == 0:
                print(f"  step {step}/{total_steps} loss {breakdown.l_total:.4f}", flush=True)
            step += 1
    return model, log


def write_loss_log(log: list[StepLog], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "lr_alpha", "lr_beta", "l_ctr", "l_qa", "l_total"])
        for entry in log:
            writer.writerow([entry.step, repr(entry.lr_alpha), repr(entry.lr_beta),
                             repr(entry.l_ctr), repr(entry.l_qa), repr(entry.l_total)])
