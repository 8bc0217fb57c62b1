"""Python bindings for the forge toolkit."""

from ._forge import (
    align_tokens,
    bench_report,
    chrfpp,
    concept_mean,
    gen_stats,
    interleave,
    load_tensor,
    normalize,
    pct_change,
    pool,
    roundtrip_filter,
    segment,
    sentences,
)

__all__ = [
    "align_tokens",
    "bench_report",
    "chrfpp",
    "concept_mean",
    "gen_stats",
    "interleave",
    "load_tensor",
    "normalize",
    "pct_change",
    "pool",
    "roundtrip_filter",
    "segment",
    "sentences",
]
__version__ = "0.1.0"
