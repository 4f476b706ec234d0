"""Open-vocabulary scene-graph predicate scoring with a two-level prompt
hierarchy: entity-aware prompts over clustered super entities plus dynamically
selected region-aware prompts, combined into per-predicate relation scores.
"""

from ._kernels import BACKEND as kernel_backend
from .clustering import (
    KMeansResult,
    PrePartition,
    SuperEntityMap,
    build_super_map,
    kmeans,
)
from .config import EngineConfig
from .embedding_store import (
    EmbeddingMatrix,
    cosine,
    load_embeddings,
    save_embeddings,
    similarity_matrix,
)
from .errors import RahpError
from .evaluation import (
    EvalReport,
    GroundTruthScene,
    evaluate_corpus,
    match_triplets,
    mean_recall_at_k,
    recall_at_k,
)
from .inference import (
    SceneGraphOut,
    ScoredTriplet,
    build_scene_graph,
    to_probabilities,
)
from .losses import (
    BBox,
    LossWeights,
    bbox_loss,
    distill_l1,
    entity_ce,
    giou,
    predicate_focal,
    total_loss,
)
from .mining import (
    MiningRequest,
    mine_region_descriptions,
    mine_super_names,
    parse_region_descriptions,
)
from .prompts import (
    PromptHierarchy,
    RegionDescriptionSet,
    Vocabulary,
    entity_prompt,
    index_hierarchy,
    region_prompt,
)
from .scorer import (
    ProposalBatch,
    ScorerConfig,
    aggregate,
    entity_score,
    final_scores,
    region_score,
    score_batch,
    select_region_prompts,
)

__version__ = "1.0.0"

__all__ = [
    "BBox",
    "EmbeddingMatrix",
    "EngineConfig",
    "EvalReport",
    "GroundTruthScene",
    "KMeansResult",
    "LossWeights",
    "MiningRequest",
    "PrePartition",
    "PromptHierarchy",
    "ProposalBatch",
    "RahpError",
    "RegionDescriptionSet",
    "SceneGraphOut",
    "ScoredTriplet",
    "ScorerConfig",
    "SuperEntityMap",
    "Vocabulary",
    "aggregate",
    "bbox_loss",
    "build_scene_graph",
    "build_super_map",
    "cosine",
    "distill_l1",
    "entity_ce",
    "entity_prompt",
    "entity_score",
    "evaluate_corpus",
    "final_scores",
    "giou",
    "index_hierarchy",
    "kernel_backend",
    "kmeans",
    "load_embeddings",
    "match_triplets",
    "mean_recall_at_k",
    "mine_region_descriptions",
    "mine_super_names",
    "parse_region_descriptions",
    "predicate_focal",
    "recall_at_k",
    "region_prompt",
    "region_score",
    "save_embeddings",
    "score_batch",
    "select_region_prompts",
    "similarity_matrix",
    "to_probabilities",
    "total_loss",
]
