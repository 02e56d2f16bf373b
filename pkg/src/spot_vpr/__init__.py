"""Structure-only place recognition under similar and opposing viewpoints."""

from .descriptor import CartContext, DescriptorParams, bin_of, describe, double_flip
from .distance import (
    DistanceColumnPair,
    ReferenceBank,
    ShiftSet,
    cd_distance,
    flat_cosine_distance,
    query_distance_columns,
    sc_distance,
    vd_distance,
)
from .io import FrameObservation, GroundTruthTrack, Pose, ReferenceDatabase
from .mapping import AccumulationState, Keyframe, MappingParams, advance_frame, depth_to_points, extract_keyframe
from .matching import (
    DistanceMatrices,
    InsufficientReferences,
    MatchingParams,
    MatchResult,
    append_query_columns,
    dd_match,
    nn_match,
    retrieval_key,
    rk_candidates,
    sequence_best_line,
    sm_match,
)

__version__ = "0.1.0"
