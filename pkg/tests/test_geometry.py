import numpy as np
import pytest
from scipy import ndimage

import oracles
from sceneaudio import (
    BoundingBox,
    DegenerateGeometryError,
    DepthMap,
    MappingConfig,
    Mask,
    ValidationError,
    aabb,
    detect_regions,
    extract_contours,
    map_to_room,
    min_bounding_polygon,
    sample_depth,
)


def block_mask(height, width, y0, y1, x0, x1, value=1):
    labels = np.zeros((height, width), dtype=np.uint8)
    labels[y0:y1, x0:x1] = value
    return labels


class TestMaskAndDepthTypes:
    def test_mask_rejects_floats(self):
        with pytest.raises(ValidationError):
            Mask(np.zeros((4, 4), dtype=np.float64))

    def test_mask_rejects_negative_labels(self):
        with pytest.raises(ValidationError):
            Mask(np.full((4, 4), -1, dtype=np.int32))

    def test_mask_rejects_empty_and_1d(self):
        with pytest.raises(ValidationError):
            Mask(np.zeros((0, 4), dtype=np.uint8))
        with pytest.raises(ValidationError):
            Mask(np.zeros(16, dtype=np.uint8))

    def test_depth_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            DepthMap(np.full((2, 2), 1.5))
        with pytest.raises(ValidationError):
            DepthMap(np.full((2, 2), -0.1))
        with pytest.raises(ValidationError):
            DepthMap(np.full((2, 2), np.nan))


class TestContours:
    def test_three_by_three_block(self):
        mask = Mask(block_mask(6, 8, 1, 4, 2, 5))
        [(value, contour)] = extract_contours(mask)
        assert value == 1
        expected = [
            (2, 1), (3, 1), (4, 1), (4, 2), (4, 3), (3, 3), (2, 3), (2, 2),
        ]
        assert contour.tolist() == [list(p) for p in expected]

    def test_single_pixel(self):
        mask = Mask(block_mask(5, 5, 2, 3, 3, 4))
        [(_, contour)] = extract_contours(mask)
        assert contour.tolist() == [[3, 2]]

    def test_horizontal_line_walks_out_and_back(self):
        mask = Mask(block_mask(5, 6, 2, 3, 1, 4))
        [(_, contour)] = extract_contours(mask)
        assert contour.tolist() == [[1, 2], [2, 2], [3, 2], [2, 2]]

    def test_multiple_labels_and_components(self):
        labels = np.zeros((10, 12), dtype=np.uint8)
        labels[1:3, 1:3] = 1
        labels[6:9, 2:5] = 1  # second component of label 1
        labels[2:5, 7:11] = 2
        pairs = extract_contours(Mask(labels))
        assert [value for value, _ in pairs] == [1, 1, 2]

    def test_contour_properties_on_random_blobs(self):
        rng = np.random.default_rng(2024)
        for _ in range(25):
            grid = np.zeros((24, 24), dtype=np.uint8)
            y, x = 12, 12
            for _ in range(120):  # 4-connected random walk stays one component
                grid[y, x] = 1
                dy, dx = [(0, 1), (0, -1), (1, 0), (-1, 0)][rng.integers(4)]
                y = min(max(y + dy, 1), 22)
                x = min(max(x + dx, 1), 22)
            [(_, contour)] = extract_contours(Mask(grid))
            points = [tuple(p) for p in contour.tolist()]

            for px, py in points:
                assert grid[py, px] == 1
            # consecutive points (cyclically) touch in the 8-neighbourhood
            for (x0, y0), (x1, y1) in zip(points, points[1:] + points[:1]):
                assert max(abs(x0 - x1), abs(y0 - y1)) <= 1

            filled = ndimage.binary_fill_holes(grid)
            exterior = ~filled
            padded = np.pad(exterior, 1, constant_values=True)

            def touches_exterior(px, py, reach):
                neighbours = []
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        if (dx, dy) == (0, 0):
                            continue
                        if reach == 4 and abs(dx) + abs(dy) != 1:
                            continue
                        neighbours.append(padded[py + 1 + dy, px + 1 + dx])
                return any(neighbours)

            traced = set(points)
            for px, py in traced:  # traced pixels lie on the outer boundary
                assert touches_exterior(px, py, reach=8)
            ys, xs = np.nonzero(grid)
            for px, py in zip(xs, ys):  # edge-exposed pixels all get traced
                if touches_exterior(px, py, reach=4):
                    assert (px, py) in traced

            # starts at the topmost-leftmost pixel
            first = min(zip(ys, xs))
            assert points[0] == (first[1], first[0])


class TestHull:
    def test_requires_three_distinct_points(self):
        with pytest.raises(DegenerateGeometryError):
            min_bounding_polygon(np.array([[0, 0], [1, 1]]))
        with pytest.raises(DegenerateGeometryError):
            min_bounding_polygon(np.array([[2, 2], [2, 2], [2, 2]]))

    def test_collinear_is_degenerate(self):
        points = np.array([[0, 0], [1, 1], [2, 2], [3, 3]])
        with pytest.raises(DegenerateGeometryError):
            min_bounding_polygon(points)

    def test_square_with_interior_points(self):
        points = np.array([[0, 0], [4, 0], [4, 4], [0, 4], [2, 2], [1, 3], [2, 0]])
        hull = min_bounding_polygon(points)
        assert sorted(map(tuple, hull.tolist())) == [(0, 0), (0, 4), (4, 0), (4, 4)]

    def test_hull_properties_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            points = rng.integers(0, 101, size=(rng.integers(3, 40), 2))
            try:
                hull = [tuple(p) for p in min_bounding_polygon(points).tolist()]
            except DegenerateGeometryError:
                xs, ys = points[:, 0], points[:, 1]
                assert np.unique(points, axis=0).shape[0] < 3 or np.all(
                    (points[1:, 0] - points[0, 0]) * (points[:-1, 1] - points[0, 1])
                    == (points[:-1, 0] - points[0, 0]) * (points[1:, 1] - points[0, 1])
                ) or oracles.polygon_area(np.unique(points, axis=0)) == 0
                continue

            point_set = {tuple(p) for p in points.tolist()}
            assert set(hull) <= point_set  # vertices come from the input
            for p in points.tolist():
                assert oracles.point_in_convex_ccw(hull, p)
            assert oracles.polygon_area(hull) > 0  # counterclockwise
            n = len(hull)
            for i in range(n):  # strictly convex: no collinear triples kept
                turn = oracles.cross(hull[i], hull[(i + 1) % n], hull[(i + 2) % n])
                assert turn > 0

            box = aabb(points)
            box_area = (box.x_max - box.x_min) * (box.y_max - box.y_min)
            assert oracles.polygon_area(hull) <= box_area

    def test_translation_equivariance_exact(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            points = rng.integers(-50, 300, size=(12, 2))
            offset = rng.integers(-1000, 1000, size=2)
            try:
                base = min_bounding_polygon(points)
            except DegenerateGeometryError:
                continue
            shifted = min_bounding_polygon(points + offset)
            assert np.array_equal(shifted, base + offset)
            box, shifted_box = aabb(points), aabb(points + offset)
            assert shifted_box.as_list() == [
                box.x_min + offset[0], box.x_max + offset[0],
                box.y_min + offset[1], box.y_max + offset[1],
            ]


class TestAabbAndDepth:
    def test_aabb_matches_linear_scan(self, rng):
        for _ in range(100):
            points = rng.integers(-200, 200, size=(rng.integers(1, 30), 2))
            box = aabb(points)
            xs = [int(p[0]) for p in points]
            ys = [int(p[1]) for p in points]
            assert (box.x_min, box.x_max) == (min(xs), max(xs))
            assert (box.y_min, box.y_max) == (min(ys), max(ys))

    def test_inverted_box_rejected(self):
        with pytest.raises(ValidationError):
            BoundingBox(x_min=3, x_max=2, y_min=0, y_max=0)

    def test_median_hand_case(self):
        depth = DepthMap(np.array([[0.1, 0.9, 0.9]]))
        assert sample_depth(depth, BoundingBox(0, 2, 0, 0)) == 0.9

    def test_median_matches_sorting_oracle(self, rng):
        for _ in range(50):
            h, w = rng.integers(1, 12, size=2)
            depth = DepthMap(rng.random((h, w)))
            x0 = int(rng.integers(0, w))
            x1 = int(rng.integers(x0, w))
            y0 = int(rng.integers(0, h))
            y1 = int(rng.integers(y0, h))
            box = BoundingBox(x0, x1, y0, y1)
            window = depth.values[y0 : y1 + 1, x0 : x1 + 1].ravel()
            assert sample_depth(depth, box) == pytest.approx(
                oracles.median_by_sorting(window), abs=1e-12
            )

    def test_box_outside_depth_rejected(self):
        depth = DepthMap(np.zeros((4, 4)))
        with pytest.raises(ValidationError):
            sample_depth(depth, BoundingBox(0, 4, 0, 3))


class TestRoomMapping:
    def test_center_zero_depth_is_origin(self):
        box = BoundingBox(x_min=256, x_max=768, y_min=256, y_max=768)
        assert map_to_room(box, 0.0, (1024, 1024)) == (0.0, 0.0, 0.0)

    def test_right_edge_centreline_full_depth(self):
        box = BoundingBox(x_min=200, x_max=200, y_min=100, y_max=100)
        assert map_to_room(box, 1.0, (200, 200)) == (100.0, 0.0, 100.0)

    def test_quarter_position_half_depth(self):
        box = BoundingBox(x_min=50, x_max=50, y_min=150, y_max=150)
        frontal, vertical, lateral = map_to_room(box, 0.5, (200, 200))
        assert (frontal, vertical, lateral) == (50.0, -12.5, -50.0)

    def test_extents_scale_linearly(self, rng):
        cfg = MappingConfig(lateral_extent=40.0, frontal_extent=8.0, vertical_extent=2.0)
        box = BoundingBox(0, 0, 0, 0)
        frontal, vertical, lateral = map_to_room(box, 1.0, (10, 10), cfg)
        assert frontal == 8.0
        assert vertical == (0.5 - 0.0) * 2.0
        assert lateral == (0.0 - 0.5) * 40.0

    def test_depth_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            map_to_room(BoundingBox(0, 0, 0, 0), 1.5, (10, 10))

    def test_reserved_depth_axis_rejected(self):
        with pytest.raises(ValidationError):
            MappingConfig(depth_axis="vertical")


class TestDetectRegions:
    def test_two_blocks_sorted_by_area(self):
        labels = np.zeros((100, 100), dtype=np.uint8)
        labels[10:20, 10:20] = 1  # 100 px
        labels[40:70, 40:80] = 2  # 1200 px
        depth = np.zeros((100, 100))
        depth[10:20, 10:20] = 0.25
        depth[40:70, 40:80] = 0.75
        regions = detect_regions(Mask(labels), DepthMap(depth))
        assert [r.id for r in regions] == [2, 1]
        assert [r.area for r in regions] == [1200, 100]
        assert regions[0].box.as_list() == [40, 79, 40, 69]
        assert regions[1].box.as_list() == [10, 19, 10, 19]
        assert regions[0].depth == 0.75
        assert regions[1].depth == 0.25

    def test_min_area_filter(self):
        labels = np.zeros((100, 100), dtype=np.uint8)
        labels[0:2, 0:2] = 1  # 4 px, below 0.005 * 10000 = 50
        labels[10:30, 10:30] = 2
        regions = detect_regions(Mask(labels), DepthMap(np.zeros((100, 100))))
        assert [r.id for r in regions] == [2]
        regions = detect_regions(
            Mask(labels), DepthMap(np.zeros((100, 100))), min_area_frac=0.0
        )
        assert sorted(r.id for r in regions) == [1, 2]

    def test_split_label_keeps_one_id_per_component(self):
        labels = np.zeros((50, 50), dtype=np.uint8)
        labels[5:15, 5:15] = 3
        labels[30:45, 30:45] = 3
        regions = detect_regions(Mask(labels), DepthMap(np.zeros((50, 50))), min_area_frac=0.0)
        assert [r.id for r in regions] == [3, 3]
        assert regions[0].area == 225 and regions[1].area == 100

    def test_area_is_pixel_count_not_box_area(self):
        labels = np.zeros((40, 40), dtype=np.uint8)
        labels[5:25, 5:8] = 1  # L-shape: vertical bar ...
        labels[22:25, 5:20] = 1  # ... plus horizontal bar
        [region] = detect_regions(Mask(labels), DepthMap(np.zeros((40, 40))), min_area_frac=0.0)
        assert region.area == int((labels == 1).sum())
        box = region.box
        assert region.area < (box.x_max - box.x_min + 1) * (box.y_max - box.y_min + 1)

    def test_degenerate_polygon_is_none(self):
        labels = np.zeros((20, 20), dtype=np.uint8)
        labels[4, 3:9] = 1  # 1-px line: collinear contour
        [region] = detect_regions(Mask(labels), DepthMap(np.zeros((20, 20))), min_area_frac=0.0)
        assert region.polygon is None
        assert region.box.as_list() == [3, 8, 4, 4]

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            detect_regions(Mask(np.zeros((4, 4), dtype=np.uint8)), DepthMap(np.zeros((4, 5))))

    def test_empty_mask_gives_no_regions(self):
        assert detect_regions(Mask(np.zeros((8, 8), dtype=np.uint8)), DepthMap(np.zeros((8, 8)))) == []

    def test_region_depth_is_median_over_box(self):
        labels = np.zeros((10, 10), dtype=np.uint8)
        labels[2:5, 2:5] = 1
        depth = np.zeros((10, 10))
        depth[2:5, 2:5] = 0.4
        depth[3, 3] = 1.0  # outlier inside the box
        [region] = detect_regions(Mask(labels), DepthMap(depth), min_area_frac=0.0)
        assert region.depth == 0.4
