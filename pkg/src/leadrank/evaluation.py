"""Ranking evaluation: AUC, empty-sample ablation, perplexity, length sweep.

AUC is the Mann-Whitney statistic with average ranks for ties, i.e.
P(score_pos > score_neg) + 0.5 * P(tie). Perplexity treats the answer-head
projection as a language-model head over every position: it is exp of the
mean negative log-likelihood of each token given its prefix.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LeadrankError, UndefinedAucError
from .model.params import Model
from .model.transformer import forward_batch
from .promptize.prompt import TokenSequence, render_prompt, tokenize
from .promptize.vocab import VOCAB
from .synthdata.records import LeadRecord
from .training import TrainConfig, fit, pad_batch


def auc(scores, labels) -> float:
    """Rank-based AUC with tie handling; raises on single-class input."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-d sequences")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError(f"AUC undefined: {n_pos} positives, {n_neg} negatives")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def score_leads(model: Model, leads: list[LeadRecord], max_len: int,
                mode: str = "full", batch_size: int = 128,
                want_embeddings: bool = False):
    """Eval-mode sigmoid purchase scores (and optionally h_ctr1 embeddings).

    Batches are length-sorted for speed; per-lead outputs are independent of
    batch composition, so results match one-at-a-time evaluation exactly.
    """
    seqs = [tokenize(render_prompt(lead, mode), max_len=max_len) for lead in leads]
    order = np.argsort([len(s) for s in seqs], kind="mergesort")
    scores = np.empty(len(leads), dtype=np.float64)
    embeds = np.empty((len(leads), model.cfg.embed_dim_ctr1), dtype=np.float64) \
        if want_embeddings else None
    for lo in range(0, len(order), batch_size):
        idx = order[lo:lo + batch_size]
        ids, bos = pad_batch([seqs[i] for i in idx], round_to=64,
                             t_cap=model.cfg.max_context)
        out = forward_batch(model, ids, bos)
        scores[idx] = 1.0 / (1.0 + np.exp(-out.h_ctr.astype(np.float64)))
        if want_embeddings:
            embeds[idx] = out.h_ctr1
    return (scores, embeds) if want_embeddings else scores


def perplexity(model: Model, tokens: TokenSequence) -> float:
    """exp(mean NLL of tokens 1..n-1 under the answer-head LM logits)."""
    if len(tokens.ids) < 2:
        raise LeadrankError("perplexity requires a sequence of length >= 2")
    ids = np.asarray([tokens.ids], dtype=np.int64)
    bos = np.asarray([tokens.bos_index], dtype=np.int64)
    out = forward_batch(model, ids, bos, want_lm_logits=True)
    logits = out.lm_logits[0].astype(np.float64)  # (T, vocab)
    return float(np.exp(_mean_nll(logits, np.asarray(tokens.ids))))


def _mean_nll(logits: np.ndarray, ids: np.ndarray) -> float:
    preds = logits[:-1]
    targets = ids[1:]
    m = preds.max(axis=-1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(preds - m).sum(axis=-1))
    return float(np.mean(lse - preds[np.arange(len(targets)), targets]))


def _batched_perplexities(model: Model, seqs: list[TokenSequence],
                          batch_size: int = 64) -> np.ndarray:
    out = np.empty(len(seqs), dtype=np.float64)
    order = np.argsort([len(s) for s in seqs], kind="mergesort")
    for lo in range(0, len(order), batch_size):
        idx = order[lo:lo + batch_size]
        ids, bos = pad_batch([seqs[i] for i in idx], round_to=64,
                             t_cap=model.cfg.max_context)
        fo = forward_batch(model, ids, bos, want_lm_logits=True)
        for row, i in enumerate(idx):
            n = len(seqs[i].ids)
            out[i] = np.exp(_mean_nll(fo.lm_logits[row, :n].astype(np.float64),
                                      np.asarray(seqs[i].ids)))
    return out


@dataclass
class EvalReport:
    auc_all: float
    auc_nonempty: float | None
    n_evaluated: int
    n_nonempty: int
    n_pos: int
    n_neg: int
    include_empty: bool
    slice_auc: list[dict] = field(default_factory=list)  # per length decile
    perplexity_stats: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "auc_all": self.auc_all,
            "auc_nonempty": self.auc_nonempty,
            "n_evaluated": self.n_evaluated,
            "n_nonempty": self.n_nonempty,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "include_empty": self.include_empty,
            "slice_auc": self.slice_auc,
            "perplexity_stats": self.perplexity_stats,
            "config": self.config,
        }


def evaluate(model: Model, leads: list[LeadRecord], include_empty: bool = True,
             max_len: int = 2048, compute_perplexity: bool = False,
             config_echo: dict | None = None) -> EvalReport:
    """Score the test set and assemble the evaluation report."""
    evaluated = leads if include_empty else [l for l in leads if l.transcript]
    scores = score_leads(model, evaluated, max_len=max_len)
    labels = np.asarray([l.label for l in evaluated])
    auc_all = auc(scores, labels)

    nonempty_mask = np.asarray([bool(l.transcript) for l in evaluated])
    auc_nonempty = None
    if nonempty_mask.any():
        try:
            auc_nonempty = auc(scores[nonempty_mask], labels[nonempty_mask])
        except UndefinedAucError:
            auc_nonempty = None

    lengths = np.asarray([len(l.transcript.encode("utf-8")) for l in evaluated])
    slice_rows = []
    edges = np.quantile(lengths, np.linspace(0, 1, 11))
    seqs = None
    ppls = None
    if compute_perplexity:
        seqs = [tokenize(render_prompt(l), max_len=max_len) for l in evaluated]
        ppls = _batched_perplexities(model, seqs)
    for d in range(10):
        lo_e, hi_e = edges[d], edges[d + 1]
        mask = (lengths >= lo_e) & ((lengths < hi_e) if d < 9 else (lengths <= hi_e))
        row = {"decile": d + 1, "len_lo": float(lo_e), "len_hi": float(hi_e),
               "n": int(mask.sum()), "auc": None, "mean_perplexity": None}
        if mask.any():
            try:
                row["auc"] = auc(scores[mask], labels[mask])
            except UndefinedAucError:
                row["auc"] = None  # single-class slice stays reported without AUC
            if ppls is not None:
                row["mean_perplexity"] = float(np.mean(ppls[mask]))
        slice_rows.append(row)

    ppl_stats = {}
    if ppls is not None:
        ppl_stats = {"mean": float(np.mean(ppls)), "median": float(np.median(ppls)),
                     "p90": float(np.quantile(ppls, 0.9))}

    return EvalReport(
        auc_all=auc_all, auc_nonempty=auc_nonempty, n_evaluated=len(evaluated),
        n_nonempty=int(nonempty_mask.sum()),
        n_pos=int(labels.sum()), n_neg=int(len(labels) - labels.sum()),
        include_empty=include_empty, slice_auc=slice_rows,
        perplexity_stats=ppl_stats, config=config_echo or {})


def context_length_sweep(train_leads: list[LeadRecord], test_leads: list[LeadRecord],
                         lengths: list[int], model_factory, train_cfg: TrainConfig,
                         progress: bool = False) -> list[dict]:
    """Train and evaluate once per token budget; returns rows of the sweep CSV.

    model_factory(max_len) must return a freshly initialized model so every
    budget starts from the same seed.
    """
    if list(lengths) != sorted(lengths):
        raise ValueError("lengths must be ascending")
    rows = []
    for max_len in lengths:
        t0 = time.time()
        model = model_factory(max_len)
        cfg = TrainConfig(**{**train_cfg.__dict__, "max_len": max_len})
        model, _ = fit(model, train_leads, cfg)
        scores = score_leads(model, test_leads, max_len=max_len)
        labels = [l.label for l in test_leads]
        rows.append({"length": max_len, "auc": auc(scores, labels),
                     "runtime_s": round(time.time() - t0, 2)})
        if progress:
            print(f"  sweep length {max_len}: auc {rows[-1]['auc']:.4f} "
                  f"({rows[-1]['runtime_s']:.0f}s)", flush=True)
    return rows


def write_eval_report(report: EvalReport, json_path: str | Path,
                      csv_path: str | Path | None = None) -> None:
    Path(json_path).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True))
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["slice", "n", "auc", "mean_perplexity"])
            writer.writerow(["all", report.n_evaluated, report.auc_all,
                             report.perplexity_stats.get("mean")])
            writer.writerow(["nonempty", report.n_nonempty, report.auc_nonempty, None])
            for row in report.slice_auc:
                writer.writerow([f"len_decile_{row['decile']}", row["n"], row["auc"],
                                 row["mean_perplexity"]])


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["length", "auc", "runtime_s"])
        for row in rows:
            writer.writerow([row["length"], row["auc"], row["runtime_s"]])
