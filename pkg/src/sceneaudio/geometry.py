"""Region geometry: contour tracing, bounding shapes, and room placement.

Image conventions: ``x`` is the column index and ``y`` the row index, so a
point is ``(x, y)``. Contours and polygons are ``(N, 2)`` integer arrays of
such points. Convex-hull vertices are ordered counterclockwise for a y-up
axis, which is clockwise when drawn in raster orientation.

Room coordinates are metres with 1 pixel = 1 metre: ``x`` points into the
scene (frontal), ``y`` up (vertical), ``z`` left-to-right (lateral).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateGeometryError, ValidationError

# Cross-shaped structuring element: edge-adjacent pixels only.
FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)

# Moore neighbourhood in clockwise raster order, starting due north.
_MOORE = ((0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))
_MOORE_INDEX = {step: i for i, step in enumerate(_MOORE)}


@dataclass(frozen=True)
class Mask:
    """Integer label grid. 0 is background; each positive value is one label."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError("mask must be a non-empty 2D grid")
        if arr.dtype.kind not in "iu":
            raise ValidationError(f"mask labels must be integers, got {arr.dtype}")
        if arr.dtype.kind == "i" and int(arr.min()) < 0:
            raise ValidationError("mask labels must be non-negative")
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel normalized depth in [0, 1]; 0 is the nearest plane."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError("depth map must be a non-empty 2D grid")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("depth map contains non-finite values")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValidationError(f"depth values must lie in [0, 1], got [{lo:g}, {hi:g}]")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned, inclusive pixel bounds."""

    x_min: int
    x_max: int
    y_min: int
    y_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValidationError(f"inverted bounding box {self.as_list()}")

    def as_list(self) -> list[int]:
        return [self.x_min, self.x_max, self.y_min, self.y_max]

    def centroid(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)


@dataclass(frozen=True)
class MappingConfig:
    """Extents (metres) of the room axes that image coordinates map onto."""

    lateral_extent: float = 200.0
    frontal_extent: float = 100.0
    vertical_extent: float = 50.0
    depth_axis: str = "frontal"

    def __post_init__(self):
        for name in ("lateral_extent", "frontal_extent", "vertical_extent"):
            value = getattr(self, name)
            if not (value > 0.0 and np.isfinite(value)):
                raise ValidationError(f"mapping {name} must be positive, got {value!r}")
        if self.depth_axis != "frontal":
            raise ValidationError(
                f"depth_axis {self.depth_axis!r} is reserved; only 'frontal' is supported"
            )


@dataclass(frozen=True)
class Region:
    """One detected region. ``id`` is the mask label that produced it."""

    id: int
    box: BoundingBox
    polygon: np.ndarray | None
    depth: float
    area: int


def _components(mask: Mask):
    """Yield (label, component grid, area, (x, y) origin) for every
    4-connected component of every positive label, in deterministic order."""
    labels = mask.labels
    values = np.unique(labels)
    for value in values:
        if value <= 0:
            continue
        grouped, count = ndimage.label(labels == value, structure=FOUR_CONNECTED)
        slices = ndimage.find_objects(grouped)
        for index in range(1, count + 1):
            window = slices[index - 1]
            component = grouped[window] == index
            origin = (window[1].start, window[0].start)
            yield int(value), component, int(component.sum()), origin


def _trace_boundary(component: np.ndarray, origin: tuple[int, int]) -> np.ndarray:
    """Moore-neighbour boundary trace of a single 4-connected component.

    Walks the 8-neighbourhood clockwise from the backtracked background
    pixel until the (position, backtrack) state recurs, then keeps the
    recurring cycle. Starts from the topmost-leftmost pixel, whose west
    neighbour is always background.
    """
    padded = np.zeros((component.shape[0] + 2, component.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = component
    rows, cols = np.nonzero(padded)
    start = (int(cols[0]), int(rows[0]))  # row-major scan: topmost, then leftmost

    seen: dict[tuple, int] = {}
    trail: list[tuple[int, int]] = []
    current = start
    backtrack = (start[0] - 1, start[1])
    cycle = None
    while (current, backtrack) not in seen:
        seen[(current, backtrack)] = len(trail)
        trail.append(current)
        base = _MOORE_INDEX[(backtrack[0] - current[0], backtrack[1] - current[1])]
        last_background = backtrack
        successor = None
        for step in range(1, 9):
            dx, dy = _MOORE[(base + step) % 8]
            candidate = (current[0] + dx, current[1] + dy)
            if padded[candidate[1], candidate[0]]:
                successor = candidate
                break
            last_background = candidate
        if successor is None:  # isolated pixel
            cycle = trail
            break
        current, backtrack = successor, last_background
    if cycle is None:
        cycle = trail[seen[(current, backtrack)] :]

    offset = cycle.index(start) if start in cycle else 0
    ordered = cycle[offset:] + cycle[:offset]
    points = np.array(ordered, dtype=np.int64)
    points[:, 0] += origin[0] - 1  # undo padding, apply window origin
    points[:, 1] += origin[1] - 1
    return points


def extract_contours(mask: Mask) -> list[tuple[int, np.ndarray]]:
    """Closed outer boundary of every 4-connected component of every label.

    Returns ``(label, contour)`` pairs; each contour is an ``(N, 2)`` array
    of ``(x, y)`` boundary pixels in clockwise raster order, starting at the
    component's topmost-leftmost pixel. A single-pixel component yields a
    one-point contour.
    """
    return [
        (value, _trace_boundary(component, origin))
        for value, component, _area, origin in _components(mask)
    ]


def _as_points(contour) -> np.ndarray:
    points = np.asarray(contour)
    if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] == 0:
        raise ValidationError(f"expected an (N, 2) point array, got shape {points.shape}")
    return points


def min_bounding_polygon(contour) -> np.ndarray:
    """Convex hull of the contour points (Andrew's monotone chain).

    Vertices are a strictly convex subset of the input points, ordered
    counterclockwise for a y-up axis. Raises DegenerateGeometryError when
    fewer than three distinct points exist or all points are collinear.
    """
    points = _as_points(contour)
    unique = sorted({(int(p[0]), int(p[1])) for p in points})
    if len(unique) < 3:
        raise DegenerateGeometryError(
            f"convex hull needs 3 distinct points, got {len(unique)}"
        )

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[int, int]] = []
    for p in unique:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[int, int]] = []
    for p in reversed(unique):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateGeometryError("contour points are collinear")
    return np.array(hull, dtype=np.int64)


def aabb(contour) -> BoundingBox:
    """Tight axis-aligned bounding box of the contour points."""
    points = _as_points(contour)
    return BoundingBox(
        x_min=int(points[:, 0].min()),
        x_max=int(points[:, 0].max()),
        y_min=int(points[:, 1].min()),
        y_max=int(points[:, 1].max()),
    )


def sample_depth(depth: DepthMap, box: BoundingBox) -> float:
    """Median depth over the box interior (inclusive bounds)."""
    if box.x_min < 0 or box.y_min < 0 or box.x_max >= depth.width or box.y_max >= depth.height:
        raise ValidationError(
            f"box {box.as_list()} exceeds depth map {depth.width}x{depth.height}"
        )
    window = depth.values[box.y_min : box.y_max + 1, box.x_min : box.x_max + 1]
    return float(np.median(window))


def map_to_room(
    box: BoundingBox,
    depth: float,
    image_dims: tuple[int, int],
    cfg: MappingConfig | None = None,
) -> tuple[float, float, float]:
    """Place a region in the room from its box centroid and depth.

    The image plane becomes a billboard: depth scales the frontal extent,
    the vertical offset from the image centreline scales the vertical
    extent (up positive), and the horizontal offset scales the lateral
    extent (right positive). Returns ``(frontal, vertical, lateral)``.
    """
    if cfg is None:
        cfg = MappingConfig()
    if not (0.0 <= depth <= 1.0):
        raise ValidationError(f"depth must lie in [0, 1], got {depth!r}")
    width, height = image_dims
    if width <= 0 or height <= 0:
        raise ValidationError(f"image dimensions must be positive, got {image_dims}")
    u, v = box.centroid()
    frontal = depth * cfg.frontal_extent
    vertical = (0.5 - v / height) * cfg.vertical_extent
    lateral = (u / width - 0.5) * cfg.lateral_extent
    return (frontal, vertical, lateral)


def detect_regions(
    mask: Mask, depth: DepthMap, min_area_frac: float = 0.005
) -> list[Region]:
    """Detect labelled regions and summarize their geometry.

    Components smaller than ``min_area_frac`` of the image are dropped
    (area is the component pixel count). Components whose contour has no
    convex hull keep ``polygon=None``. Result is sorted by descending area.
    """
    if (mask.height, mask.width) != (depth.height, depth.width):
        raise ValidationError(
            f"mask {mask.width}x{mask.height} and depth "
            f"{depth.width}x{depth.height} dimensions differ"
        )
    if not (0.0 <= min_area_frac <= 1.0):
        raise ValidationError(f"min_area_frac must lie in [0, 1], got {min_area_frac!r}")
    threshold = min_area_frac * mask.width * mask.height
    regions = []
    for value, component, area, origin in _components(mask):
        if area < threshold:
            continue
        contour = _trace_boundary(component, origin)
        box = aabb(contour)
        try:
            polygon = min_bounding_polygon(contour)
        except DegenerateGeometryError:
            polygon = None
        regions.append(
            Region(
                id=value,
                box=box,
                polygon=polygon,
                depth=sample_depth(depth, box),
                area=area,
            )
        )
    regions.sort(key=lambda region: -region.area)
    return regions
