"""Lead ranking toolkit: synthetic corpus, text scorer, baselines, evaluation."""

__version__ = "0.1.0"
