"""Seeded synthetic corpora: oriented bars and stroke glyphs.

Bars give the conv layer something with a known ideal template; glyphs
imitate handwritten characters (a fixed stroke skeleton per class, jitter
per instance) at a difficulty where few-shot experiments resolve in
minutes.  Images follow the in-memory convention: strokes bright on a
dark background, values in [0,1].  write_corpus_png stores them inverted
(dark ink on white), matching the on-disk convention of load_corpus.
"""

import os

import numpy as np
from PIL import Image

from .episodes import ClassCorpus, ClassRecord


def _paint_disk(canvas: np.ndarray, r: float, c: float, radius: int):
    side = canvas.shape[0]
    ri, ci = int(round(r)), int(round(c))
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            if dr * dr + dc * dc <= radius * radius:
                rr, cc = ri + dr, ci + dc
                if 0 <= rr < side and 0 <= cc < side:
                    canvas[rr, cc] = 1.0


def draw_stroke(canvas: np.ndarray, p0, p1, radius: int = 1):
    """Paint a straight stroke of the given half-thickness onto canvas."""
    length = float(np.hypot(p1[0] - p0[0], p1[1] - p0[1]))
    n = max(int(length * 2), 2)
    for t in np.linspace(0.0, 1.0, n):
        _paint_disk(canvas, p0[0] + t * (p1[0] - p0[0]),
                    p0[1] + t * (p1[1] - p0[1]), radius)


def bar_image(orientation: str, offset: int, side: int = 28,
              thickness: int = 3, rng: np.random.Generator | None = None,
              noise: float = 0.05) -> np.ndarray:
    """A full-length vertical or horizontal bar at a given row/column."""
    img = np.zeros((side, side), dtype=np.float32)
    lo = max(offset - thickness // 2, 0)
    hi = min(offset + (thickness + 1) // 2, side)
    if orientation == "v":
        img[:, lo:hi] = 1.0
    elif orientation == "h":
        img[lo:hi, :] = 1.0
    else:
        raise ValueError(f"orientation must be 'v' or 'h', got {orientation!r}")
    if rng is not None and noise > 0:
        img = np.clip(img + rng.normal(0.0, noise, img.shape), 0.0, 1.0
                      ).astype(np.float32)
    return img


def bar_corpus(rng: np.random.Generator, offsets=(4, 9, 14, 19, 24),
               samples_per_class: int = 20, side: int = 28,
               noise: float = 0.05) -> ClassCorpus:
    """Vertical and horizontal bar classes at distinct offsets.

    Instances jitter the offset by +-1 pixel and add pixel noise, so
    same-class samples are similar but not identical.
    """
    classes = []
    for orientation in ("v", "h"):
        for off in offsets:
            images = []
            for _ in range(samples_per_class):
                j = int(rng.integers(-1, 2))
                images.append(bar_image(orientation, off + j, side=side,
                                        rng=rng, noise=noise))
            classes.append(ClassRecord(f"{orientation}bar{off:02d}", images))
    return ClassCorpus(classes)


def glyph_corpus(rng: np.random.Generator, n_classes: int,
                 samples_per_class: int = 20, side: int = 28,
                 n_strokes: tuple[int, int] = (3, 5),
                 jitter: float = 1.0) -> ClassCorpus:
    """Handwritten-character stand-ins.

    A class is a fixed skeleton of straight strokes with endpoints well
    inside the canvas; each instance redraws the skeleton with Gaussian
    endpoint jitter.  Classes are distinct with overwhelming probability;
    instances of one class stay visually close.
    """
    classes = []
    margin = 4
    for ci in range(n_classes):
        k = int(rng.integers(n_strokes[0], n_strokes[1] + 1))
        skeleton = rng.uniform(margin, side - margin, size=(k, 2, 2))
        images = []
        for _ in range(samples_per_class):
            canvas = np.zeros((side, side), dtype=np.float32)
            pts = skeleton + rng.normal(0.0, jitter, skeleton.shape)
            pts = np.clip(pts, 1, side - 2)
            for s in range(k):
                draw_stroke(canvas, pts[s, 0], pts[s, 1], radius=1)
            images.append(canvas)
        classes.append(ClassRecord(f"glyph{ci:04d}", images))
    return ClassCorpus(classes)


def write_corpus_png(corpus: ClassCorpus, root: str):
    """Store a corpus in the class-per-directory layout, ink-on-white."""
    os.makedirs(root, exist_ok=True)
    for rec in corpus.classes:
        cdir = os.path.join(root, rec.class_id)
        os.makedirs(cdir, exist_ok=True)
        for i, img in enumerate(rec.images):
            arr = np.round((1.0 - img) * 255.0).astype(np.uint8)
            Image.fromarray(arr, mode="L").save(
                os.path.join(cdir, f"{i:03d}.png"))
