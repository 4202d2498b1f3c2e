"""Representation diagnostics: mutual information and cluster separation."""
from .embeddings import (
    DEFAULT_TIMESTEPS,
    EmbeddingSet,
    collect_embeddings,
    embed_records,
    record_agent_episodes,
)
from .mine import MineConfig, MineResult, StatisticNetwork, UndefinedMIError, dv_bound, heldout_estimate, mine_estimate
from .report import representation_report, write_report
from .separation import (
    MetricError,
    heldout_centroid_accuracy,
    loo_centroid_accuracy,
    separation_metrics,
    separation_ratio,
)
