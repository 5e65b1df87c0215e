"""File formats: PNG masks and depth maps, WAV clips, scene/region/report JSON.

Scene documents are validated strictly — unknown keys are rejected so typos
fail loudly instead of silently falling back to defaults. Paths inside a
scene resolve relative to the scene file's directory.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.io import wavfile

from .errors import FileError, ValidationError
from .geometry import (
    BoundingBox,
    DepthMap,
    MappingConfig,
    Mask,
    Region,
    detect_regions,
    map_to_room,
)
from .render import MonoClip, MultichannelAudio, SourcePlacement, resample

log = logging.getLogger(__name__)

PCM16_SCALE = 32768.0
PCM32_SCALE = 2147483648.0
OUTPUT_FORMATS = ("f32", "pcm16")

_SCENE_KEYS = ("image", "regions", "render", "mapping")
_IMAGE_KEYS = ("width", "height")
_REGION_KEYS = ("id", "aabb", "mask", "depth_map", "depth", "audio", "gain")
_RENDER_KEYS = (
    "sample_rate",
    "speed_of_sound",
    "attenuation_clamp",
    "fractional_delay",
    "lfe_lowpass",
    "output_format",
)
_MAPPING_KEYS = ("lateral_extent", "frontal_extent", "vertical_extent", "depth_axis")


@dataclass(frozen=True)
class RenderParams:
    """Render block of a scene: everything the mixer needs besides geometry."""

    sample_rate: int = 16000
    speed_of_sound: float = 343.0
    attenuation_clamp: float = 1.0
    fractional_delay: bool = False
    lfe_lowpass: bool = False
    output_format: str = "f32"

    def __post_init__(self):
        if not (isinstance(self.sample_rate, (int, np.integer)) and self.sample_rate > 0):
            raise ValidationError(f"render sample_rate must be a positive integer, got {self.sample_rate!r}")
        for name in ("speed_of_sound", "attenuation_clamp"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"render {name} must be positive, got {value!r}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ValidationError(
                f"render output_format must be one of {list(OUTPUT_FORMATS)}, got {self.output_format!r}"
            )


@dataclass(frozen=True)
class RegionSpec:
    """One scene region: exactly one geometry mode plus an audio clip."""

    id: str
    audio: Path
    gain: float = 1.0
    aabb: BoundingBox | None = None
    depth: float | None = None
    mask: Path | None = None
    depth_map: Path | None = None

    def __post_init__(self):
        explicit = self.aabb is not None
        from_mask = self.mask is not None or self.depth_map is not None
        if explicit == from_mask:
            raise ValidationError(
                f"region {self.id!r} needs exactly one geometry mode: aabb or mask+depth_map"
            )
        if explicit and self.depth is None:
            raise ValidationError(f"region {self.id!r}: explicit aabb requires a depth value")
        if from_mask and (self.mask is None or self.depth_map is None):
            raise ValidationError(f"region {self.id!r}: mask mode requires both mask and depth_map")
        if not (isinstance(self.gain, (int, float)) and math.isfinite(self.gain) and self.gain >= 0):
            raise ValidationError(f"region {self.id!r}: gain must be >= 0, got {self.gain!r}")


@dataclass(frozen=True)
class SceneDescription:
    image_width: int
    image_height: int
    regions: tuple[RegionSpec, ...]
    render: RenderParams
    mapping: MappingConfig


def _check_keys(obj: dict, allowed, context: str):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ValidationError(f"{context}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise ValidationError(f"{context}: missing required key {key!r}")
    return obj[key]


def _as_int(value, field: str, minimum: int | None = None) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValidationError(f"{field} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ValidationError(f"{field} must be >= {minimum}, got {value}")
    return value


def _as_float(value, field: str, lo: float | None = None, hi: float | None = None) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(f"{field} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{field} must be finite, got {value!r}")
    if lo is not None and value < lo:
        raise ValidationError(f"{field} must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ValidationError(f"{field} must be <= {hi}, got {value}")
    return value


def _as_bool(value, field: str) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(f"{field} must be a boolean, got {value!r}")
    return value


def _as_str(value, field: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{field} must be a non-empty string, got {value!r}")
    return value


def read_json(path) -> dict | list:
    """Parse a JSON file; missing/unreadable -> FileError, bad JSON -> ValidationError."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FileError(f"{path}: file not found") from None
    except OSError as exc:
        raise FileError(f"{path}: cannot read ({exc})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def write_json(document, path):
    """Serialize with a stable layout so identical documents are identical bytes."""
    path = Path(path)
    try:
        path.write_text(json.dumps(document, indent=2) + "\n")
    except OSError as exc:
        raise FileError(f"{path}: cannot write ({exc})") from None


def _open_image(path) -> Image.Image:
    path = Path(path)
    try:
        image = Image.open(path)
        image.load()
    except FileNotFoundError:
        raise FileError(f"{path}: file not found") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise FileError(f"{path}: not a readable image ({exc})") from None
    if image.format != "PNG":
        raise ValidationError(f"{path}: PNG required, got {image.format}")
    return image


def load_mask(path) -> Mask:
    """8-bit single-channel (or palette-indexed) PNG of integer labels."""
    image = _open_image(path)
    if image.mode not in ("L", "P"):
        raise ValidationError(
            f"{path}: mask must be an 8-bit single-channel PNG, got mode {image.mode}"
        )
    return Mask(np.asarray(image, dtype=np.int32))


def load_depth(path) -> DepthMap:
    """Grayscale PNG scaled to [0, 1]: 16-bit / 65535, 8-bit / 255."""
    image = _open_image(path)
    arr = np.asarray(image)
    if image.mode in ("I;16", "I"):
        if arr.min() < 0 or arr.max() > 65535:
            raise ValidationError(f"{path}: depth values exceed 16-bit range")
        return DepthMap(arr.astype(np.float64) / 65535.0)
    if image.mode == "L":
        return DepthMap(arr.astype(np.float64) / 255.0)
    raise ValidationError(f"{path}: depth must be 8- or 16-bit grayscale PNG, got mode {image.mode}")


def _read_wav(path) -> tuple[int, np.ndarray]:
    """Rate and float64 samples scaled to nominal [-1, 1], any channel count."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise FileError(f"{path}: file not found") from None
    except (ValueError, OSError) as exc:
        raise FileError(f"{path}: not a readable WAV ({exc})") from None
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.int32:  # 24- and 32-bit PCM both arrive as int32
        samples = data.astype(np.float64) / PCM32_SCALE
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValidationError(f"{path}: unsupported WAV sample format {data.dtype}")
    return int(rate), samples


def load_wav(path) -> MonoClip:
    """A mono clip; multichannel files are rejected."""
    rate, samples = _read_wav(path)
    if samples.ndim != 1:
        raise ValidationError(
            f"{path}: mono WAV required, got {samples.shape[1]} channels"
        )
    return MonoClip(samples, rate)


def load_multichannel_wav(path) -> MultichannelAudio:
    """A six-channel buffer in file channel order."""
    rate, samples = _read_wav(path)
    if samples.ndim != 2 or samples.shape[1] != 6:
        got = 1 if samples.ndim == 1 else samples.shape[1]
        raise ValidationError(f"{path}: 6-channel WAV required, got {got} channel(s)")
    return MultichannelAudio(samples.T, rate)


def load_metric_audio(path) -> MonoClip | MultichannelAudio:
    """Mono or six-channel input for the metrics path."""
    rate, samples = _read_wav(path)
    if samples.ndim == 1:
        return MonoClip(samples, rate)
    if samples.ndim == 2 and samples.shape[1] == 6:
        return MultichannelAudio(samples.T, rate)
    raise ValidationError(
        f"{path}: metrics need mono or 6-channel WAV, got {samples.shape[1]} channels"
    )


def write_multichannel_wav(audio: MultichannelAudio, path, output_format: str = "f32"):
    """Write the buffer as float32 ("f32") or 16-bit PCM ("pcm16")."""
    if output_format == "f32":
        data = audio.channels.T.astype(np.float32)
    elif output_format == "pcm16":
        scaled = np.round(audio.channels.T * PCM16_SCALE)
        data = np.clip(scaled, -PCM16_SCALE, PCM16_SCALE - 1).astype(np.int16)
    else:
        raise ValidationError(
            f"output_format must be one of {list(OUTPUT_FORMATS)}, got {output_format!r}"
        )
    path = Path(path)
    try:
        wavfile.write(path, audio.sample_rate, data)
    except OSError as exc:
        raise FileError(f"{path}: cannot write ({exc})") from None


def _resolve(base: Path, relative: str, context: str) -> Path:
    candidate = Path(relative)
    if not candidate.is_absolute():
        candidate = base / candidate
    if not candidate.is_file():
        raise FileError(f"{context}: file not found: {candidate}")
    return candidate


def _validate_render_block(block, context: str) -> dict:
    if not isinstance(block, dict):
        raise ValidationError(f"{context} must be an object")
    _check_keys(block, _RENDER_KEYS, context)
    out = {}
    if "sample_rate" in block:
        out["sample_rate"] = _as_int(block["sample_rate"], f"{context}.sample_rate", minimum=1)
    if "speed_of_sound" in block:
        out["speed_of_sound"] = _as_float(block["speed_of_sound"], f"{context}.speed_of_sound")
    if "attenuation_clamp" in block:
        out["attenuation_clamp"] = _as_float(block["attenuation_clamp"], f"{context}.attenuation_clamp")
    if "fractional_delay" in block:
        out["fractional_delay"] = _as_bool(block["fractional_delay"], f"{context}.fractional_delay")
    if "lfe_lowpass" in block:
        out["lfe_lowpass"] = _as_bool(block["lfe_lowpass"], f"{context}.lfe_lowpass")
    if "output_format" in block:
        out["output_format"] = _as_str(block["output_format"], f"{context}.output_format")
    return out


def _validate_mapping_block(block, context: str) -> dict:
    if not isinstance(block, dict):
        raise ValidationError(f"{context} must be an object")
    _check_keys(block, _MAPPING_KEYS, context)
    out = {}
    for name in ("lateral_extent", "frontal_extent", "vertical_extent"):
        if name in block:
            out[name] = _as_float(block[name], f"{context}.{name}")
    if "depth_axis" in block:
        out["depth_axis"] = _as_str(block["depth_axis"], f"{context}.depth_axis")
    return out


def _layer(builtin: dict, *layers: dict) -> dict:
    """Later layers win; None values mean "not set"."""
    merged = dict(builtin)
    for layer in layers:
        for key, value in layer.items():
            if value is not None:
                merged[key] = value
    return merged


def _parse_region(raw, index: int, width: int, height: int, base: Path) -> RegionSpec:
    context = f"regions[{index}]"
    if not isinstance(raw, dict):
        raise ValidationError(f"{context} must be an object")
    _check_keys(raw, _REGION_KEYS, context)
    raw_id = _require(raw, "id", context)
    if isinstance(raw_id, bool) or not isinstance(raw_id, (str, int)):
        raise ValidationError(f"{context}.id must be a string or integer label")
    region_id = str(raw_id)
    audio = _resolve(base, _as_str(_require(raw, "audio", context), f"{context}.audio"), f"{context}.audio")
    gain = _as_float(raw.get("gain", 1.0), f"{context}.gain", lo=0.0)

    has_aabb = "aabb" in raw
    has_mask = "mask" in raw or "depth_map" in raw
    if has_aabb and has_mask:
        raise ValidationError(f"{context}: aabb and mask geometry are mutually exclusive")
    if has_aabb:
        values = raw["aabb"]
        if not (isinstance(values, list) and len(values) == 4):
            raise ValidationError(f"{context}.aabb must be [x_min, x_max, y_min, y_max]")
        x_min, x_max, y_min, y_max = (
            _as_int(v, f"{context}.aabb[{i}]") for i, v in enumerate(values)
        )
        try:
            box = BoundingBox(x_min=x_min, x_max=x_max, y_min=y_min, y_max=y_max)
        except ValidationError as exc:
            raise ValidationError(f"{context}.aabb: {exc}") from None
        if box.x_min < 0 or box.y_min < 0 or box.x_max >= width or box.y_max >= height:
            raise ValidationError(
                f"{context}.aabb {box.as_list()} exceeds image bounds {width}x{height}"
            )
        depth = _as_float(_require(raw, "depth", context), f"{context}.depth", lo=0.0, hi=1.0)
        return RegionSpec(id=region_id, audio=audio, gain=gain, aabb=box, depth=depth)
    if has_mask:
        if "depth" in raw:
            raise ValidationError(f"{context}: depth is taken from depth_map in mask mode")
        mask_path = _resolve(base, _as_str(_require(raw, "mask", context), f"{context}.mask"), f"{context}.mask")
        depth_path = _resolve(
            base, _as_str(_require(raw, "depth_map", context), f"{context}.depth_map"), f"{context}.depth_map"
        )
        return RegionSpec(id=region_id, audio=audio, gain=gain, mask=mask_path, depth_map=depth_path)
    raise ValidationError(f"{context}: needs either aabb+depth or mask+depth_map")


def load_scene(
    path,
    *,
    render_overrides: dict | None = None,
    mapping_overrides: dict | None = None,
    defaults: dict | None = None,
) -> SceneDescription:
    """Parse and validate a scene file.

    Precedence per field: override argument (e.g. CLI flag) > scene file >
    ``defaults`` (e.g. config file) > built-in default.
    """
    path = Path(path)
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: scene root must be an object")
    _check_keys(doc, _SCENE_KEYS, "scene")

    image = _require(doc, "image", "scene")
    if not isinstance(image, dict):
        raise ValidationError("scene.image must be an object")
    _check_keys(image, _IMAGE_KEYS, "scene.image")
    width = _as_int(_require(image, "width", "scene.image"), "scene.image.width", minimum=1)
    height = _as_int(_require(image, "height", "scene.image"), "scene.image.height", minimum=1)

    raw_regions = _require(doc, "regions", "scene")
    if not isinstance(raw_regions, list) or not raw_regions:
        raise ValidationError("scene.regions must be a non-empty array")

    env = defaults or {}
    env_render = _validate_render_block(env.get("render", {}), "config.render")
    env_mapping = _validate_mapping_block(env.get("mapping", {}), "config.mapping")
    scene_render = _validate_render_block(doc.get("render", {}), "scene.render")
    scene_mapping = _validate_mapping_block(doc.get("mapping", {}), "scene.mapping")

    render_kwargs = _layer({}, env_render, scene_render, render_overrides or {})
    mapping_kwargs = _layer({}, env_mapping, scene_mapping, mapping_overrides or {})
    params = RenderParams(**render_kwargs)
    mapping = MappingConfig(**mapping_kwargs)

    base = path.parent
    regions = tuple(
        _parse_region(raw, index, width, height, base) for index, raw in enumerate(raw_regions)
    )
    return SceneDescription(
        image_width=width,
        image_height=height,
        regions=regions,
        render=params,
        mapping=mapping,
    )


def _placement_position(spec: RegionSpec, scene: SceneDescription) -> tuple[float, float, float]:
    if spec.aabb is not None:
        return map_to_room(spec.aabb, spec.depth, (scene.image_width, scene.image_height), scene.mapping)
    mask = load_mask(spec.mask)
    depth_map = load_depth(spec.depth_map)
    if (mask.width, mask.height) != (scene.image_width, scene.image_height):
        raise ValidationError(
            f"region {spec.id!r}: mask {mask.width}x{mask.height} does not match "
            f"scene image {scene.image_width}x{scene.image_height}"
        )
    detected = detect_regions(mask, depth_map, min_area_frac=0.0)
    if not detected:
        raise ValidationError(f"region {spec.id!r}: mask contains no foreground pixels")
    largest = detected[0]
    return map_to_room(largest.box, largest.depth, (scene.image_width, scene.image_height), scene.mapping)


def scene_placements(scene: SceneDescription) -> list[SourcePlacement]:
    """Resolve every region into a placed clip at the render sample rate."""
    placements = []
    for spec in scene.regions:
        clip = resample(load_wav(spec.audio), scene.render.sample_rate)
        placements.append(
            SourcePlacement(
                position=_placement_position(spec, scene),
                clip=clip,
                gain=spec.gain,
            )
        )
    return placements


def regions_document(
    regions: list[Region],
    image_dims: tuple[int, int],
    mapping: MappingConfig | None = None,
) -> dict:
    """JSON-ready document for detected regions, including room positions."""
    if mapping is None:
        mapping = MappingConfig()
    width, height = image_dims
    entries = []
    for region in regions:
        position = map_to_room(region.box, region.depth, (width, height), mapping)
        entries.append(
            {
                "id": region.id,
                "aabb": region.box.as_list(),
                "polygon": None if region.polygon is None else region.polygon.tolist(),
                "depth": region.depth,
                "area": region.area,
                "position": list(position),
            }
        )
    return {
        "image": {"width": width, "height": height},
        "mapping": {
            "lateral_extent": mapping.lateral_extent,
            "frontal_extent": mapping.frontal_extent,
            "vertical_extent": mapping.vertical_extent,
            "depth_axis": mapping.depth_axis,
        },
        "regions": entries,
    }


def write_regions_json(
    regions: list[Region],
    path,
    *,
    image_dims: tuple[int, int],
    mapping: MappingConfig | None = None,
):
    write_json(regions_document(regions, image_dims, mapping), path)


def report_document(report, pair: tuple[str, str] | None = None, params: dict | None = None) -> dict:
    doc = {}
    if pair is not None:
        doc["a"], doc["b"] = str(pair[0]), str(pair[1])
    doc.update(report.to_dict())
    if params is not None:
        doc["params"] = dict(params)
    return doc


def write_report_json(report, path, *, pair=None, params=None):
    write_json(report_document(report, pair=pair, params=params), path)


def scene_from_regions(
    regions_doc: dict,
    clips: dict[str, str],
    render_block: dict | None = None,
) -> dict:
    """Build a scene document by assigning clips to detected regions.

    ``clips`` maps region labels (as strings) to WAV paths, which are stored
    as given. Regions whose label has no clip are skipped with a warning;
    zero assigned clips is an error.
    """
    image = regions_doc["image"]
    scene_regions = []
    for index, entry in enumerate(regions_doc["regions"]):
        label = str(entry["id"])
        clip_path = clips.get(label)
        if clip_path is None:
            log.warning("region %d (label %s): no clip assigned, skipping", index, label)
            continue
        scene_regions.append(
            {
                "id": f"region{index}-label{label}",
                "aabb": list(entry["aabb"]),
                "depth": entry["depth"],
                "audio": str(clip_path),
            }
        )
    if not scene_regions:
        raise ValidationError("no detected region has an assigned clip")
    scene = {
        "image": {"width": image["width"], "height": image["height"]},
        "regions": scene_regions,
    }
    if "mapping" in regions_doc:
        scene["mapping"] = dict(regions_doc["mapping"])
    if render_block:
        scene["render"] = {k: v for k, v in render_block.items() if v is not None}
    return scene
