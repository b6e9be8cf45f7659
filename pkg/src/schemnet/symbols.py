"""Symbol library shared by the synthetic renderer and the template detector.

Each symbol is a stroke list (3 px lines/circles) rasterized once into an ink
mask; poses cover the 4 cardinal rotations plus horizontal mirrors so flipped
renders stay detectable. Internal spacings deliberately avoid the 8 px wire
routing pitch so wiring never mimics a symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .detect import ComponentType

STROKE = 3
SYMBOL_SIZE = 40  # all non-ground symbols use a 40x40 box
GROUND_W, GROUND_H = 24, 16


@dataclass(frozen=True)
class Pose:
    """One placeable orientation of a symbol: ink mask + terminal anchors."""

    mask: np.ndarray  # (h, w) bool
    terminals: tuple[tuple[str, tuple[int, int]], ...]  # (role, (x, y) in-mask)
    tag: str  # e.g. "rot90", "mirror-rot0"

    def scaled_mask(self, s: int) -> np.ndarray:
        if s == 1:
            return self.mask
        return np.kron(self.mask, np.ones((s, s), dtype=bool))

    @property
    def ink(self) -> int:
        return int(self.mask.sum())


def _render_strokes(strokes, w: int, h: int) -> np.ndarray:
    canvas = np.zeros((h, w), np.uint8)
    for st in strokes:
        if st[0] == "line":
            _, x1, y1, x2, y2 = st
            cv2.line(canvas, (x1, y1), (x2, y2), 255, STROKE)
        elif st[0] == "circle":
            _, cx, cy, r = st
            cv2.circle(canvas, (cx, cy), r, 255, STROKE)
        else:
            raise ValueError(f"unknown stroke {st[0]}")
    return canvas.astype(bool)


def _line(x1, y1, x2, y2):
    return ("line", x1, y1, x2, y2)


def _symbol_strokes() -> dict[ComponentType, tuple[list, dict[str, tuple[int, int]]]]:
    """Orientation-0 stroke lists and terminal anchors.

    Two-terminal symbols flow left (t1) to right (t2); transistors put the
    control terminal on the left with collector/drain top-right and
    emitter/source bottom-right; ground hangs below its wire (stem up).
    """
    c = SYMBOL_SIZE // 2  # 20
    e = SYMBOL_SIZE - 1  # 39
    two_term = {"t1": (0, c), "t2": (e, c)}
    table = {}
    table[ComponentType.resistor] = (
        [
            _line(0, c, 7, c),
            _line(7, c, 10, 12), _line(10, 12, 16, 28), _line(16, 28, 22, 12),
            _line(22, 12, 28, 28), _line(28, 28, 31, c),
            _line(31, c, e, c),
        ],
        two_term,
    )
    table[ComponentType.capacitor] = (
        [
            _line(0, c, 17, c), _line(17, 9, 17, 31),
            _line(22, 9, 22, 31), _line(22, c, e, c),
        ],
        two_term,
    )
    table[ComponentType.inductor] = (
        [
            _line(0, c, 6, c),
            _line(6, c, 6, 11), _line(6, 11, 15, 11), _line(15, 11, 15, c),
            _line(15, 11, 24, 11), _line(24, 11, 24, c),
            _line(24, 11, 33, 11), _line(33, 11, 33, c),
            _line(33, c, e, c),
        ],
        two_term,
    )
    table[ComponentType.diode] = (
        [
            _line(0, c, 12, c),
            _line(12, 10, 12, 30), _line(12, 10, 26, c), _line(12, 30, 26, c),
            _line(26, 9, 26, 31), _line(26, c, e, c),
        ],
        two_term,
    )
    table[ComponentType.voltage_source] = (
        [
            _line(0, c, 8, c), ("circle", c, c, 12), _line(32, c, e, c),
            _line(11, 15, 17, 15), _line(14, 12, 14, 18),  # plus (t1 side)
            _line(23, 25, 29, 25),  # minus
        ],
        two_term,
    )
    table[ComponentType.current_source] = (
        [
            _line(0, c, 8, c), ("circle", c, c, 12), _line(32, c, e, c),
            _line(13, c, 27, c),  # arrow shaft toward t2
            _line(27, c, 21, 14), _line(27, c, 21, 26),
        ],
        two_term,
    )
    table[ComponentType.npn] = (
        [
            _line(0, c, 14, c), _line(14, 8, 14, 32),
            _line(14, 14, 28, 4), _line(28, 4, 28, 0),
            _line(14, 26, 28, 36), _line(28, 36, 28, e),
            _line(28, 36, 19, 34), _line(28, 36, 25, 27),  # emitter arrow out
        ],
        {"base": (0, c), "collector": (28, 0), "emitter": (28, e)},
    )
    table[ComponentType.pnp] = (
        [
            _line(0, c, 14, c), _line(14, 8, 14, 32),
            _line(14, 14, 28, 4), _line(28, 4, 28, 0),
            _line(14, 26, 28, 36), _line(28, 36, 28, e),
            _line(14, 26, 23, 28), _line(14, 26, 17, 35),  # emitter arrow in
        ],
        {"base": (0, c), "collector": (28, 0), "emitter": (28, e)},
    )
    table[ComponentType.nmos] = (
        [
            _line(0, c, 12, c), _line(12, 12, 12, 28),
            _line(17, 8, 17, 32),
            _line(17, 10, 28, 10), _line(28, 10, 28, 0),
            _line(17, 30, 28, 30), _line(28, 30, 28, e),
            _line(17, 30, 23, 25),  # source arrow toward channel
        ],
        {"gate": (0, c), "drain": (28, 0), "source": (28, e)},
    )
    table[ComponentType.pmos] = (
        [
            _line(0, c, 5, c), ("circle", 8, c, 3), _line(11, c, 12, c),
            _line(12, 12, 12, 28),
            _line(17, 8, 17, 32),
            _line(17, 10, 28, 10), _line(28, 10, 28, 0),
            _line(17, 30, 28, 30), _line(28, 30, 28, e),
            _line(24, 30, 28, 25),  # source arrow away from channel
        ],
        {"gate": (0, c), "drain": (28, 0), "source": (28, e)},
    )
    table[ComponentType.ground] = (
        [
            _line(12, 0, 12, 5),
            _line(2, 5, 22, 5), _line(6, 9, 18, 9), _line(10, 13, 14, 13),
        ],
        {"gnd": (12, 0)},
    )
    return table


def _rot_point(x: int, y: int, w: int, h: int) -> tuple[int, int]:
    # 90 deg counterclockwise, matching np.rot90(mask, 1): (x, y) -> (y, w-1-x)
    return y, w - 1 - x


class SymbolLibrary:
    """Immutable pose table: ComponentType -> deduplicated list of Pose."""

    def __init__(self):
        self.poses: dict[ComponentType, list[Pose]] = {}
        for ctype, (strokes, terms) in _symbol_strokes().items():
            if ctype is ComponentType.ground:
                w, h = GROUND_W, GROUND_H
            else:
                w = h = SYMBOL_SIZE
            base = _render_strokes(strokes, w, h)
            poses: list[Pose] = []
            for mirrored in (False, True):
                mask = np.fliplr(base) if mirrored else base
                tlist = {
                    role: ((w - 1 - x, y) if mirrored else (x, y))
                    for role, (x, y) in terms.items()
                }
                for k in range(4):
                    m = np.rot90(mask, k)
                    pts = {}
                    for role, (x, y) in tlist.items():
                        px, py, pw, ph = x, y, mask.shape[1], mask.shape[0]
                        for _ in range(k):
                            px, py = _rot_point(px, py, pw, ph)
                            pw, ph = ph, pw
                        pts[role] = (px, py)
                    tag = ("mirror-" if mirrored else "") + f"rot{90 * k}"
                    pose = Pose(
                        mask=np.ascontiguousarray(m),
                        terminals=tuple(sorted(pts.items())),
                        tag=tag,
                    )
                    if not any(
                        p.mask.shape == pose.mask.shape
                        and np.array_equal(p.mask, pose.mask)
                        and p.terminals == pose.terminals
                        for p in poses
                    ):
                        poses.append(pose)
            self.poses[ctype] = poses

    def pose(self, ctype: ComponentType, tag: str) -> Pose:
        for p in self.poses[ctype]:
            if p.tag == tag:
                return p
        raise KeyError(f"{ctype.value} has no pose {tag}")


_DEFAULT: SymbolLibrary | None = None


def default_library() -> SymbolLibrary:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = SymbolLibrary()
    return _DEFAULT
