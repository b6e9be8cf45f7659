"""Pixel-space bounding boxes shared by every pipeline stage."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: (x, y) is the top-left pixel, w/h in pixels (>= 1)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"degenerate bbox {self.x},{self.y},{self.w},{self.h}")

    @property
    def x2(self) -> int:
        return self.x + self.w  # exclusive

    @property
    def y2(self) -> int:
        return self.y + self.h  # exclusive

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def expand(self, margin: int) -> "BBox":
        return BBox(self.x - margin, self.y - margin, self.w + 2 * margin, self.h + 2 * margin)

    def clamp(self, width: int, height: int) -> "BBox":
        x1 = max(0, self.x)
        y1 = max(0, self.y)
        x2 = min(width, self.x2)
        y2 = min(height, self.y2)
        if x2 <= x1 or y2 <= y1:
            raise ValueError("bbox fully outside image")
        return BBox(x1, y1, x2 - x1, y2 - y1)

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px < self.x2 and self.y <= py < self.y2

    def intersects(self, other: "BBox") -> bool:
        return not (other.x >= self.x2 or other.x2 <= self.x
                    or other.y >= self.y2 or other.y2 <= self.y)

    def iou(self, other: "BBox") -> float:
        ix = max(0, min(self.x2, other.x2) - max(self.x, other.x))
        iy = max(0, min(self.y2, other.y2) - max(self.y, other.y))
        inter = ix * iy
        union = self.w * self.h + other.w * other.h - inter
        return inter / union if union else 0.0

    def distance_to_point(self, px: float, py: float) -> float:
        """Euclidean distance from a point to the box perimeter (0 inside-on-edge)."""
        # nearest point on the closed box, then distance; interior points use
        # distance to the nearest edge so a label sitting on a symbol still ranks.
        nx = min(max(px, self.x), self.x2 - 1)
        ny = min(max(py, self.y), self.y2 - 1)
        d = math.hypot(px - nx, py - ny)
        if d > 0:
            return d
        # point inside: distance to closest edge
        return min(px - self.x, self.x2 - 1 - px, py - self.y, self.y2 - 1 - py)

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]
