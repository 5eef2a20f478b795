"""Feature preparation for the classical CTR baselines.

Dense features standardize with statistics computed on the train split
only; sentinel values impute to the train mean first, so they land at
exactly zero after standardization. The discrete features declared in the
corpus header map to stable integer ids, with one reserved out-of-vocabulary
id at the end of each table. An optional 128-dim text embedding per lead is
appended as dense inputs, never hashed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..synthdata.features import CATEGORICAL_VALUES, FEATURE_NAMES, SENTINEL
from ..synthdata.records import LeadRecord

DENSE_FEATURES = tuple(n for n in FEATURE_NAMES if n not in CATEGORICAL_VALUES)
CATEGORICAL_FEATURES = tuple(n for n in FEATURE_NAMES if n in CATEGORICAL_VALUES)


@dataclass
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray
    embed_mean: np.ndarray | None = None
    embed_std: np.ndarray | None = None


def _dense_matrix(leads: list[LeadRecord]) -> np.ndarray:
    return np.asarray([[lead.tabular[n] for n in DENSE_FEATURES] for lead in leads],
                      dtype=np.float64)


def fit_stats(train_leads: list[LeadRecord],
              train_embeddings: np.ndarray | None = None) -> FeatureStats:
    """Standardization statistics from the train split only."""
    x = _dense_matrix(train_leads)
    masked = np.where(x == SENTINEL, np.nan, x)
    mean = np.nanmean(masked, axis=0)
    std = np.nanstd(masked, axis=0)
    mean = np.where(np.isnan(mean), 0.0, mean)
    std = np.where((std == 0) | np.isnan(std), 1.0, std)
    stats = FeatureStats(mean=mean, std=std)
    if train_embeddings is not None:
        stats.embed_mean = train_embeddings.mean(axis=0)
        estd = train_embeddings.std(axis=0)
        stats.embed_std = np.where(estd == 0, 1.0, estd)
    return stats


def featurize(leads: list[LeadRecord], stats: FeatureStats,
              embeddings: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(categorical ids, dense values) for a batch of leads.

    Unseen categorical values map to the reserved OOV id; the stats object
    is never updated here, so test data cannot touch train statistics.
    """
    x = _dense_matrix(leads)
    x = np.where(x == SENTINEL, stats.mean, x)  # sentinel -> 0 after scaling
    dense = (x - stats.mean) / stats.std

    cats = np.zeros((len(leads), len(CATEGORICAL_FEATURES)), dtype=np.int64)
    for j, name in enumerate(CATEGORICAL_FEATURES):
        table = {v: k for k, v in enumerate(CATEGORICAL_VALUES[name])}
        oov = len(table)
        for i, lead in enumerate(leads):
            cats[i, j] = table.get(lead.tabular[name], oov)

    if embeddings is not None:
        emb = np.asarray(embeddings, dtype=np.float64)
        if emb.shape[0] != len(leads):
            raise ValueError("embeddings misaligned with leads")
        if stats.embed_mean is not None:
            emb = (emb - stats.embed_mean) / stats.embed_std
        dense = np.concatenate([dense, emb], axis=1)
    return cats, dense


def cardinalities() -> list[int]:
    """Embedding-table sizes per categorical field (incl. the OOV slot)."""
    return [len(CATEGORICAL_VALUES[n]) + 1 for n in CATEGORICAL_FEATURES]
