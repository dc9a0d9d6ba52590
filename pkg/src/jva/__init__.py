"""Dyadic joint visual attention from egocentric video and gaze.

The pipeline: project each participant's gaze to pixels, align the two
streams in time, crop a gaze-centered window from each frame, embed the
windows, and score every aligned pair by cosine similarity. Pairs above
the threshold are joint-attention moments; fixation/saccade statistics
(coefficient K) describe each participant's attentional mode per epoch.
"""

from .analytics import (
    DEFAULT_EPOCHS,
    DEFAULT_THRESHOLD,
    EpochReport,
    JvaSegments,
    Segment,
    SessionReport,
    detect_jva,
    emit_report,
    epoch_analysis,
    epoch_spans,
    jva_percentage,
)
from .embedding import (
    BUILTIN_DIM,
    BuiltinBackend,
    EmbeddingTable,
    ExternalBackend,
    FeatureVector,
    ImportBackend,
    SimilarityTimeline,
    cosine_similarity,
    embed_builtin,
    grid_descriptor,
    read_embedding_table,
    similarity_timeline,
    write_embedding_table,
)
from .errors import (
    ConfigError,
    DecodeError,
    DimensionMismatch,
    EmptySeries,
    GazeOutOfFrame,
    InsufficientSamples,
    InvalidSpec,
    JvaError,
    MalformedRow,
    MissingEmbedding,
    MissingTimestampInName,
    MixedUnits,
    NoFramesFound,
    NonMonotonicTimestamp,
    SerializationError,
    SpanMismatch,
    TooFewEvents,
    UnknownFormat,
    WindowTooLarge,
    ZeroVector,
)
from .gaze_io import (
    MISSING,
    OUT_OF_FRAME,
    VALID,
    AlignedPair,
    CameraIntrinsics,
    Direction3,
    GazeSample,
    Pixel2,
    align_streams,
    load_intrinsics,
    parse_gaze_stream,
    project_gaze,
    project_stream,
    write_gaze_csv,
)
from .oculomotor import (
    DetectorParams,
    FixationEvent,
    KSeries,
    SaccadeEvent,
    WindowStats,
    coefficient_k,
    detect_events,
    events_csv,
    k_series_for,
    mean_k,
)
from .synth import (
    GeneratedSession,
    GroundTruth,
    ScenarioSpec,
    ScoreResult,
    generate_session,
    load_scenario,
    load_truth,
    score_against_truth,
)
from .tubes import (
    DEFAULT_WINDOW,
    Frame,
    TubeSlice,
    build_tube,
    extract_roi,
    load_frame,
    scan_frame_dir,
)

__version__ = "0.1.0"
