"""Post-hoc answer attribution toolkit.

Thin Python surface over the C++ core: sentence segmentation, the
simple-sentence classifier, BM25 scoring, greedy evidence merging,
decomposition/attribution response parsing, and P/R/F1 aggregation.
"""

from ._core import (
    Bm25Index,
    aggregate_metrics,
    build_attribution_prompt,
    build_cog_prompt,
    casefold,
    greedy_merge,
    is_simple,
    is_simple_tags,
    levenshtein_similarity,
    load_records,
    nfc,
    normalize_for_match,
    parse_decomposition,
    parse_factscore_units,
    pos_tag,
    resolve_evidence,
    round_half_even,
    sha256_hex,
    split_sentences,
    tokenize,
    unit_pr,
    validate_record,
    __version__,
)

__all__ = [
    "Bm25Index",
    "aggregate_metrics",
    "build_attribution_prompt",
    "build_cog_prompt",
    "casefold",
    "greedy_merge",
    "is_simple",
    "is_simple_tags",
    "levenshtein_similarity",
    "load_records",
    "nfc",
    "normalize_for_match",
    "parse_decomposition",
    "parse_factscore_units",
    "pos_tag",
    "resolve_evidence",
    "round_half_even",
    "sha256_hex",
    "split_sentences",
    "tokenize",
    "unit_pr",
    "validate_record",
    "__version__",
]
