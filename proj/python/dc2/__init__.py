"""Divide, conquer and combine for high-resolution image QA.

Thin wrapper around the C++ core; see the project README for the full
pipeline and CLI.
"""

from ._core import (  # noqa: F401
    ChatRequest,
    Region,
    RetrievalHit,
    ScoredRegion,
    VisualMemory,
    __version__,
    ask_mock,
    bilinear_resize,
    cache_key,
    cluster_patches,
    cosine_distance,
    cyclic_permutations,
    filter_objects,
    iou,
    mg,
    miou,
    ml,
    nms,
    normalize_name,
    parse_choice,
    patch_feature,
    recall_at_k,
    retrieve,
    score_query_object,
    split_region,
    uncertainty,
)
