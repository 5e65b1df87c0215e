"""Scene-driven 5.1 surround rendering and audio-pair similarity metrics.

Pipeline: a segmentation mask plus a depth map yield placed regions; each
region gets a mono clip; a direct-path simulation mixes the clips into a
six-channel surround buffer; similarity metrics score audio pairs.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateGeometryError,
    FileError,
    SceneAudioError,
    ValidationError,
)
from .geometry import (
    BoundingBox,
    DepthMap,
    MappingConfig,
    Mask,
    Region,
    aabb,
    detect_regions,
    extract_contours,
    map_to_room,
    min_bounding_polygon,
    sample_depth,
)
from .render import (
    CHANNEL_ORDER,
    DEFAULT_MIC_POSITIONS,
    MicArray,
    MonoClip,
    MultichannelAudio,
    RoomConfig,
    SourcePlacement,
    delay_and_attenuation,
    downmix,
    normalize,
    render,
    resample,
)
from .metrics import (
    DEFAULT_CONFIG,
    FeatureSequence,
    MetricConfig,
    SimilarityReport,
    chroma,
    chroma_similarity,
    compare,
    dtw_distance,
    mfcc,
    spectral_contrast,
    spectral_contrast_similarity,
    zcr,
    zcr_similarity,
)
from .io import (
    RegionSpec,
    RenderParams,
    SceneDescription,
    load_depth,
    load_mask,
    load_metric_audio,
    load_multichannel_wav,
    load_scene,
    load_wav,
    regions_document,
    scene_from_regions,
    scene_placements,
    write_multichannel_wav,
    write_regions_json,
    write_report_json,
)

__all__ = [name for name in dir() if not name.startswith("_")]
