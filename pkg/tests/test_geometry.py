import pytest
from hypothesis import given
from hypothesis import strategies as st

from schemnet.geometry import BBox

boxes = st.builds(
    BBox,
    st.integers(-50, 50), st.integers(-50, 50),
    st.integers(1, 60), st.integers(1, 60),
)


class TestBasics:
    def test_edges(self):
        b = BBox(2, 3, 4, 5)
        assert (b.x2, b.y2) == (6, 8)
        assert b.center == (4.0, 5.5)

    def test_zero_size_rejected(self):
        with pytest.raises(ValueError):
            BBox(0, 0, 0, 1)

    def test_contains_boundary(self):
        b = BBox(0, 0, 4, 4)
        assert b.contains(0, 0) and b.contains(3.9, 3.9)
        assert not b.contains(4, 0)

    def test_clamp(self):
        assert BBox(-2, -2, 6, 6).clamp(10, 10).as_list() == [0, 0, 4, 4]
        with pytest.raises(ValueError):
            BBox(20, 20, 4, 4).clamp(10, 10)


class TestIoU:
    def test_identity(self):
        b = BBox(1, 1, 5, 5)
        assert b.iou(b) == 1.0

    def test_disjoint(self):
        assert BBox(0, 0, 2, 2).iou(BBox(10, 10, 2, 2)) == 0.0

    def test_half_overlap(self):
        # 2x2 boxes sharing a 1x2 strip: inter 2, union 6
        assert BBox(0, 0, 2, 2).iou(BBox(1, 0, 2, 2)) == pytest.approx(1 / 3)

    @given(boxes, boxes)
    def test_symmetric_and_bounded(self, a, b):
        assert a.iou(b) == b.iou(a)
        assert 0.0 <= a.iou(b) <= 1.0

    @given(boxes, boxes)
    def test_intersects_agrees_with_iou(self, a, b):
        assert a.intersects(b) == (a.iou(b) > 0.0)


class TestDistance:
    def test_interior_uses_nearest_edge(self):
        assert BBox(0, 0, 4, 4).distance_to_point(2, 2) == 1.0
        assert BBox(0, 0, 4, 4).distance_to_point(0, 2) == 0.0

    def test_axis_distance(self):
        assert BBox(0, 0, 4, 4).distance_to_point(10, 2) == pytest.approx(7.0)

    def test_corner_distance(self):
        assert BBox(0, 0, 4, 4).distance_to_point(7, 8) == pytest.approx((4**2 + 5**2) ** 0.5)

    @given(boxes, st.integers(-80, 80), st.integers(-80, 80))
    def test_nonnegative(self, b, px, py):
        assert b.distance_to_point(px, py) >= 0.0

    @given(boxes, st.integers(0, 10))
    def test_expand_contains_original(self, b, m):
        e = b.expand(m)
        assert e.x <= b.x and e.y <= b.y and e.x2 >= b.x2 and e.y2 >= b.y2
