"""Event-camera gesture and emotion recognition at desk scale.

The pipeline: ingest or synthesize event streams and per-frame features,
align label tags to event timestamps, encode fixed-count dense spike
planes, and classify with a two-branch model (spiking convolutional stack
plus an LSTM over frame features, fused additively).
"""

from .align import (
    SearchTrace,
    find_position,
    scaling_binary_search,
    segment_events,
    split_indices,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataio import (
    DEFAULT_FRAME_LIMIT,
    FrameFeatureSequence,
    ManifestEntry,
    SplitManifest,
    load_sample,
    read_events_file,
    read_feature_file,
    read_manifest,
    split_partition_ok,
    write_events_file,
    write_feature_file,
    write_manifest,
)
from .encode import (
    SCALE_MODES,
    DenseSpikePlanes,
    dense_spike_planes,
    downsample_planes,
    group_sizes,
    read_planes_file,
    scale_planes,
    write_planes_file,
)
from .errors import GestemoError
from .events import (
    DAVIS346,
    LABELED_GESTURES,
    EmotionClass,
    Event,
    EventStream,
    Geometry,
    GestureClass,
    SampleRecord,
    StreamSpec,
    emotion_of,
    make_event,
    synth_stream,
    validate_stream,
)
from .fusion import (
    FusionConfig,
    HeadParams,
    RecurrentParams,
    fuse,
    head_forward,
    init_head_params,
    init_recurrent_params,
    predict,
    recurrent_forward,
)
from .snn import (
    Conv,
    Dense,
    LifConfig,
    Pool,
    SnnArchitecture,
    default_architecture,
    init_params,
    lif_step,
    snn_backward,
    snn_forward,
)
from .stats import (
    ClassStats,
    FiveNumber,
    class_counts,
    dataset_stats,
    event_time_sum,
    frame_length_histogram,
    polarity_box_stats,
)
from .synth import DatasetSpec, build_dataset, synth_features
from .training import (
    AdamConfig,
    AdamState,
    MetricsReport,
    ModelParams,
    TrainConfig,
    TrainData,
    adam_update,
    class_weights,
    confusion_matrix,
    evaluate,
    init_model,
    mse_spike_loss,
    prepare_tensors,
    train,
    weighted_cross_entropy,
)

__version__ = "0.1.0"
