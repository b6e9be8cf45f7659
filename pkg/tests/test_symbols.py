import numpy as np
import pytest

from schemnet.detect import ComponentType, TERMINAL_ROLES
from schemnet.symbols import GROUND_H, GROUND_W, SYMBOL_SIZE, default_library


class TestLibrary:
    def test_every_type_has_poses(self):
        lib = default_library()
        for ctype in ComponentType:
            assert lib.poses[ctype], ctype

    def test_masks_square_except_ground(self):
        lib = default_library()
        for ctype, poses in lib.poses.items():
            for pose in poses:
                if ctype is ComponentType.ground:
                    assert sorted(pose.mask.shape) == sorted((GROUND_H, GROUND_W))
                else:
                    assert pose.mask.shape == (SYMBOL_SIZE, SYMBOL_SIZE)

    def test_poses_deduplicated(self):
        lib = default_library()
        for poses in lib.poses.values():
            seen = []
            for pose in poses:
                for other in seen:
                    assert not (other.mask.shape == pose.mask.shape
                                and np.array_equal(other.mask, pose.mask)
                                and other.terminals == pose.terminals)
                seen.append(pose)

    def test_terminal_roles_complete(self):
        lib = default_library()
        for ctype, poses in lib.poses.items():
            want = set(TERMINAL_ROLES[ctype])
            for pose in poses:
                assert {r for r, _ in pose.terminals} == want

    def test_terminals_on_perimeter(self):
        lib = default_library()
        for poses in lib.poses.values():
            for pose in poses:
                h, w = pose.mask.shape
                for _, (x, y) in pose.terminals:
                    assert 0 <= x < w and 0 <= y < h
                    assert x in (0, w - 1) or y in (0, h - 1)

    def test_terminals_touch_ink(self):
        lib = default_library()
        for poses in lib.poses.values():
            for pose in poses:
                for _, (x, y) in pose.terminals:
                    assert pose.mask[y, x]

    def test_rot0_exists_everywhere(self):
        lib = default_library()
        for ctype in ComponentType:
            assert lib.pose(ctype, "rot0") is not None

    def test_unknown_tag_raises(self):
        with pytest.raises(KeyError):
            default_library().pose(ComponentType.resistor, "rot45")

    def test_scaled_mask(self):
        pose = default_library().pose(ComponentType.resistor, "rot0")
        s2 = pose.scaled_mask(2)
        assert s2.shape == (2 * SYMBOL_SIZE, 2 * SYMBOL_SIZE)
        assert int(s2.sum()) == 4 * int(pose.mask.sum())
        assert np.array_equal(pose.scaled_mask(1), pose.mask)

    def test_rot180_is_double_rot90(self):
        lib = default_library()
        pose0 = lib.pose(ComponentType.diode, "rot0")
        pose180 = lib.pose(ComponentType.diode, "rot180")
        assert np.array_equal(np.rot90(pose0.mask, 2), pose180.mask)

    def test_all_rotations_present(self):
        lib = default_library()
        tags = {p.tag for p in lib.poses[ComponentType.diode]}
        assert {"rot0", "rot90", "rot180", "rot270"} <= tags
