"""Synthetic test shapes: analytic primitives and seeded star-like blobs."""

from __future__ import annotations

import numpy as np

from .geometry import rasterize_polygon

SIZE = 256


def disk(radius: float, center=(128, 128), size: int = SIZE) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    return (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= radius * radius


def rectangle(width: int, height: int, size: int = SIZE, bump: bool = False) -> np.ndarray:
    """Axis-aligned ``width x height`` block centered on the canvas.

    With ``bump`` a single pixel is added above the middle of the top edge.
    """
    img = np.zeros((size, size), dtype=bool)
    x0 = (size - width) // 2
    y0 = (size - height) // 2
    img[y0 : y0 + height, x0 : x0 + width] = True
    if bump:
        img[y0 - 1, x0 + width // 2] = True
    return img


def ellipse(a: float, b: float, angle: float = 0.0, size: int = SIZE) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    x, y = xx - size / 2, yy - size / 2
    c, s = np.cos(angle), np.sin(angle)
    u, v = c * x + s * y, -s * x + c * y
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def polygon(vertices, size: int = SIZE) -> np.ndarray:
    return rasterize_polygon(np.asarray(vertices, dtype=float), (size, size))


def star(arms: int, outer: float, inner: float, size: int = SIZE, phase: float = 0.0):
    k = np.arange(2 * arms)
    rad = np.where(k % 2 == 0, outer, inner)
    t = phase + np.pi * k / arms
    c = size / 2
    return polygon(np.column_stack([c + rad * np.cos(t), c + rad * np.sin(t)]), size)


def blob(seed: int, size: int = SIZE, base: float = 70.0, harmonics: int = 5) -> np.ndarray:
    """Star-shaped region with a smooth random radial profile."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    rad = np.full_like(t, base)
    for k in range(2, 2 + harmonics):
        rad += rng.uniform(-1, 1) * base / (1.5 * k) * np.cos(k * t + rng.uniform(0, 2 * np.pi))
    rad = np.clip(rad, 0.25 * base, 1.6 * base)
    c = size / 2
    return polygon(np.column_stack([c + rad * np.cos(t), c + rad * np.sin(t)]), size)


def hand(size: int = SIZE) -> np.ndarray:
    """A palm with four fingers and a thumb."""
    img = ellipse(45, 55, size=size)
    c = size / 2
    yy, xx = np.mgrid[0:size, 0:size]
    for dx, length in ((-33, 60), (-11, 72), (11, 75), (33, 62)):
        x = c + dx
        img |= (np.abs(xx - x) <= 8) & (yy >= c - 40 - length) & (yy <= c - 20)
        img |= (xx - x) ** 2 + (yy - (c - 40 - length)) ** 2 <= 64
    thumb = polygon([(c + 35, c + 10), (c + 95, c - 25), (c + 103, c - 12), (c + 45, c + 30)], size)
    return img | thumb


def corpus(n: int = 20, seed: int = 0) -> list[tuple[str, str, np.ndarray]]:
    """``n`` named shapes ``(shape_id, class, image)`` cycling through the families."""
    c = SIZE / 2
    fixed = [
        ("disk", lambda i: disk(20 + 10 * (i % 5))),
        ("rect", lambda i: rectangle(100 + 10 * (i % 4), 40 + 6 * (i % 3))),
        ("ellipse", lambda i: ellipse(90 - 5 * (i % 4), 35 + 5 * (i % 3), angle=0.3 * i)),
        ("star", lambda i: star(4 + i % 3, 100, 45, phase=0.2 * i)),
        ("lshape", lambda i: polygon([(40, 40), (40 + 60 + 5 * (i % 3), 40), (100, 150),
                                      (210, 150), (210, 210), (40, 210)])),
        ("cross", lambda i: polygon([(c - 20, 30), (c + 20, 30), (c + 20, c - 20), (226, c - 20),
                                     (226, c + 20), (c + 20, c + 20), (c + 20, 226), (c - 20, 226),
                                     (c - 20, c + 20), (30 + 4 * (i % 3), c + 20),
                                     (30 + 4 * (i % 3), c - 20), (c - 20, c - 20)])),
        ("blob", lambda i: blob(seed * 1000 + i)),
        ("hand", lambda i: hand()),
    ]
    out = []
    for i in range(n):
        name, make = fixed[i % len(fixed)]
        out.append((f"{name}-{i // len(fixed) + 1}", name, make(i)))
    return out
