"""Image ingestion, binarization, morphology, and connected-component labeling.

All values are immutable-by-convention numpy-backed records; every function
returns a new value, so batch callers can process many images concurrently.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .geometry import BBox


class DecodeError(ValueError):
    """Malformed image payload. `offset` is the byte position of the failure."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class GrayImage:
    """8-bit luminance raster, row-major (h, w) uint8 array."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != np.uint8:
            raise ValueError("GrayImage wants a (h, w) uint8 array")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("empty image")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class BinaryImage:
    """Foreground mask; True means ink/stroke regardless of source polarity."""

    bits: np.ndarray

    def __post_init__(self):
        if self.bits.ndim != 2 or self.bits.dtype != np.bool_:
            raise ValueError("BinaryImage wants a (h, w) bool array")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class RegionStats:
    area: int
    bbox: BBox
    seed: tuple[int, int]  # first-encounter (y, x) pixel


@dataclass(frozen=True)
class LabelMap:
    """Row-major region ids, 0 = background; labels are compact 1..region_count
    in first-encounter (row-major) order."""

    labels: np.ndarray
    region_count: int
    region_stats: list[RegionStats] = field(default_factory=list)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


# ---------------------------------------------------------------------------
# loading / writing

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def load_image(payload: bytes) -> GrayImage:
    """Decode a PNG (8-bit gray or RGB, alpha ignored) or binary PGM (P5).

    RGB collapses to luminance by integer rounding of 0.299R + 0.587G + 0.114B.
    """
    if len(payload) == 0:
        raise DecodeError("empty byte stream", 0)
    if payload.startswith(b"P5"):
        return _load_pgm(payload)
    if payload.startswith(_PNG_MAGIC):
        return _load_png(payload)
    raise DecodeError("unrecognized image magic", 0)


def _load_pgm(payload: bytes) -> GrayImage:
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(payload) and payload[pos : pos + 1].isspace():
            pos += 1
        if pos < len(payload) and payload[pos : pos + 1] == b"#":
            while pos < len(payload) and payload[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(payload) and not payload[pos : pos + 1].isspace():
            pos += 1
        if pos == start:
            raise DecodeError("truncated PGM header", pos)
        tok = payload[start:pos]
        if not tok.isdigit():
            raise DecodeError(f"bad PGM header token {tok!r}", start)
        fields.append(int(tok))
    if pos >= len(payload):
        raise DecodeError("truncated PGM header", pos)
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise DecodeError("bad PGM dimensions", 2)
    if maxval != 255:
        raise DecodeError(f"unsupported PGM maxval {maxval}", 2)
    need = width * height
    raw = payload[pos : pos + need]
    if len(raw) < need:
        raise DecodeError("truncated PGM payload", pos + len(raw))
    data = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    return GrayImage(data.copy())


def _load_png(payload: bytes) -> GrayImage:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(io.BytesIO(payload)) as im:
            im.load()
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.uint8)
            else:
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                lum = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
                arr = np.rint(lum).astype(np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"bad PNG payload: {exc}", 0) from exc
    return GrayImage(arr)


def write_pgm(img: GrayImage | BinaryImage) -> bytes:
    """Binary PGM (P5) encoding; binary images map ink->0, background->255."""
    if isinstance(img, BinaryImage):
        data = np.where(img.bits, 0, 255).astype(np.uint8)
    else:
        data = img.data
    header = f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode()
    return header + data.tobytes()


# ---------------------------------------------------------------------------
# binarization

def otsu_threshold(hist: np.ndarray) -> int:
    """Threshold T in 1..255 maximizing between-class variance of {<T} vs {>=T};
    smallest T on ties."""
    total = int(hist.sum())
    values = np.arange(256, dtype=np.float64)
    cum_n = np.cumsum(hist)            # pixels with value < T at index T-1
    cum_s = np.cumsum(hist * values)
    best_t, best_v = 1, -1.0
    grand = cum_s[-1]
    for t in range(1, 256):
        n0 = cum_n[t - 1]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        m0 = cum_s[t - 1] / n0
        m1 = (grand - cum_s[t - 1]) / n1
        v = n0 * n1 * (m0 - m1) ** 2
        if v > best_v + 1e-9:
            best_v, best_t = v, t
    return best_t


def binarize(img: GrayImage) -> BinaryImage:
    """Global Otsu threshold with polarity auto-detection.

    Mean luminance >= 128 means dark-on-light (ink = pixels < T), otherwise
    ink = pixels >= T. Constant images yield an all-background mask.
    """
    data = img.data
    if data.min() == data.max():
        return BinaryImage(np.zeros(data.shape, dtype=bool))
    hist = np.bincount(data.ravel(), minlength=256)
    t = otsu_threshold(hist)
    if data.mean() >= 128:
        bits = data < t
    else:
        bits = data >= t
    return BinaryImage(bits)


# ---------------------------------------------------------------------------
# morphology

def close_gaps(img: BinaryImage, radius: int) -> BinaryImage:
    """Morphological closing with a (2*radius+1)^2 square element.

    Computed as on an infinite background (padded), so isolated pixels survive
    and image borders do not erode. Radius 0 is the identity.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return img
    k = 2 * radius + 1
    structure = np.ones((k, k), dtype=bool)
    pad = 2 * radius
    padded = np.pad(img.bits, pad, mode="constant", constant_values=False)
    closed = ndimage.binary_erosion(
        ndimage.binary_dilation(padded, structure=structure),
        structure=structure,
    )
    return BinaryImage(closed[pad:-pad, pad:-pad].copy())


# ---------------------------------------------------------------------------
# connected-component labeling

@njit(cache=True)
def _two_pass_label(bits, conn8):  # pragma: no cover - exercised via wrapper
    h, w = bits.shape
    labels = np.zeros((h, w), np.int32)
    max_prov = h * w // 2 + 2
    parent = np.zeros(max_prov, np.int32)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if not bits[y, x]:
                continue
            # visited neighbors: W, N (+ NW, NE when 8-connected)
            m = 0
            if x > 0 and bits[y, x - 1]:
                m = labels[y, x - 1]
            if y > 0:
                if bits[y - 1, x]:
                    l = labels[y - 1, x]
                    m = l if m == 0 or l < m else m
                if conn8:
                    if x > 0 and bits[y - 1, x - 1]:
                        l = labels[y - 1, x - 1]
                        m = l if m == 0 or l < m else m
                    if x + 1 < w and bits[y - 1, x + 1]:
                        l = labels[y - 1, x + 1]
                        m = l if m == 0 or l < m else m
            if m == 0:
                parent[nxt] = nxt
                labels[y, x] = nxt
                nxt += 1
                continue
            labels[y, x] = m
            # union every neighbor label into m's root
            r = m
            while parent[r] != r:
                r = parent[r]
            for k in range(4):
                nl = 0
                if k == 0 and x > 0 and bits[y, x - 1]:
                    nl = labels[y, x - 1]
                elif k == 1 and y > 0 and bits[y - 1, x]:
                    nl = labels[y - 1, x]
                elif k == 2 and conn8 and y > 0 and x > 0 and bits[y - 1, x - 1]:
                    nl = labels[y - 1, x - 1]
                elif k == 3 and conn8 and y > 0 and x + 1 < w and bits[y - 1, x + 1]:
                    nl = labels[y - 1, x + 1]
                if nl == 0:
                    continue
                r2 = nl
                while parent[r2] != r2:
                    r2 = parent[r2]
                if r2 != r:
                    if r2 < r:
                        parent[r] = r2
                        r = r2
                    else:
                        parent[r2] = r
    # resolve + compact renumber by first encounter, gather stats
    remap = np.zeros(nxt, np.int32)
    count = 0
    n_max = nxt
    areas = np.zeros(n_max, np.int64)
    x0 = np.zeros(n_max, np.int32)
    y0 = np.zeros(n_max, np.int32)
    x1 = np.zeros(n_max, np.int32)
    y1 = np.zeros(n_max, np.int32)
    sy = np.zeros(n_max, np.int32)
    sx = np.zeros(n_max, np.int32)
    for y in range(h):
        for x in range(w):
            l = labels[y, x]
            if l == 0:
                continue
            r = l
            while parent[r] != r:
                r = parent[r]
            c = remap[r]
            if c == 0:
                count += 1
                c = count
                remap[r] = c
                x0[c] = x
                y0[c] = y
                x1[c] = x
                y1[c] = y
                sy[c] = y
                sx[c] = x
            labels[y, x] = c
            areas[c] += 1
            if x < x0[c]:
                x0[c] = x
            if x > x1[c]:
                x1[c] = x
            if y > y1[c]:
                y1[c] = y
    return labels, count, areas, x0, y0, x1, y1, sy, sx


def label_components(img: BinaryImage, connectivity: int = 8) -> LabelMap:
    """Two-pass union-find labeling; labels compact in row-major
    first-encounter order, deterministic for a given input."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    labels, count, areas, x0, y0, x1, y1, sy, sx = _two_pass_label(
        img.bits, connectivity == 8
    )
    stats = [
        RegionStats(
            area=int(areas[i]),
            bbox=BBox(int(x0[i]), int(y0[i]), int(x1[i] - x0[i] + 1), int(y1[i] - y0[i] + 1)),
            seed=(int(sy[i]), int(sx[i])),
        )
        for i in range(1, count + 1)
    ]
    return LabelMap(labels=labels, region_count=count, region_stats=stats)
