"""Dataset ingestion, rotation augmentation, class splits and episode
sampling for N-way K-shot tasks.

On-disk layout is one subdirectory per class containing grayscale raster
images: <root>/<class_id>/<sample>.png.  Images are resized to the model
input side and normalized to [0,1]; Omniglot-style sources (dark strokes
on white paper) are inverted so strokes carry the high intensities that
drive the Poisson encoder.
"""

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

DATASETS = {
    # dataset name -> invert after normalization
    "omniglot": True,
    "double_mnist": False,
}


@dataclass
class ClassRecord:
    class_id: str
    images: list


@dataclass
class ClassCorpus:
    classes: list

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_ids(self) -> list:
        return [c.class_id for c in self.classes]


@dataclass
class Episode:
    """One N-way K-shot task.  Class indices are episode-local (0..N-1),
    assigned positionally to the sampled classes."""

    n_ways: int
    k_shots: int
    support: list   # (image, class index)
    query: list     # (image, class index)
    class_ids: list  # way index -> source class id


def _load_image(path: str, side: int, invert: bool) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im = im.convert("L")
            if im.size != (side, side):
                im = im.resize((side, side), Image.BILINEAR)
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except (OSError, SyntaxError, ValueError) as e:
        raise ValueError(f"cannot decode image {path}: {e}") from e
    if invert:
        arr = 1.0 - arr
    return arr


def load_corpus(dataset: str, root: str, side: int = 28) -> ClassCorpus:
    """Load a class-per-directory image tree into memory."""
    if dataset not in DATASETS:
        raise ValueError(f"unknown dataset {dataset!r}, "
                         f"expected one of {sorted(DATASETS)}")
    if not os.path.isdir(root):
        raise ValueError(f"dataset root {root!r} is not a directory")
    invert = DATASETS[dataset]
    class_dirs = sorted(d for d in os.listdir(root)
                        if os.path.isdir(os.path.join(root, d)))
    if not class_dirs:
        raise ValueError(f"no class directories under {root!r}")
    classes = []
    for cid in class_dirs:
        cdir = os.path.join(root, cid)
        files = sorted(f for f in os.listdir(cdir)
                       if f.lower().endswith((".png", ".jpg", ".jpeg", ".bmp")))
        if not files:
            raise ValueError(f"class directory {cdir!r} has no images")
        images = [_load_image(os.path.join(cdir, f), side, invert)
                  for f in files]
        classes.append(ClassRecord(cid, images))
    return ClassCorpus(classes)


def augment_rotations(corpus: ClassCorpus) -> ClassCorpus:
    """Each class becomes four: rotations by 0, 90, 180, 270 degrees,
    every rotation a distinct class id."""
    out = []
    for rec in corpus.classes:
        for img in rec.images:
            if img.shape[0] != img.shape[1]:
                raise ValueError(
                    f"class {rec.class_id!r} has a non-square image "
                    f"{img.shape}; rotations need square inputs")
        for k, deg in enumerate((0, 90, 180, 270)):
            out.append(ClassRecord(
                f"{rec.class_id}_rot{deg:03d}",
                [np.ascontiguousarray(np.rot90(img, k)) for img in rec.images]))
    return ClassCorpus(out)


def split_classes(corpus: ClassCorpus, n_train: int,
                  rng: np.random.Generator) -> tuple[ClassCorpus, ClassCorpus]:
    """Disjoint random class split, deterministic under a fixed stream."""
    total = corpus.n_classes
    if not 0 < n_train < total:
        raise ValueError(f"n_train must be in (0, {total}), got {n_train}")
    perm = rng.permutation(total)
    train = ClassCorpus([corpus.classes[i] for i in perm[:n_train]])
    test = ClassCorpus([corpus.classes[i] for i in perm[n_train:]])
    return train, test


def write_split_manifest(path: str, train: ClassCorpus, test: ClassCorpus,
                         seed: int, dataset: str):
    """Record the split next to the data so a run can be reproduced."""
    with open(path, "w") as f:
        f.write(f"# dataset={dataset} seed={seed} "
                f"n_train={train.n_classes} n_test={test.n_classes}\n")
        for cid in train.class_ids():
            f.write(f"train {cid}\n")
        for cid in test.class_ids():
            f.write(f"test {cid}\n")


def sample_episode(corpus: ClassCorpus, n_ways: int, k_shots: int,
                   n_query: int, rng: np.random.Generator) -> Episode:
    """Draw an N-way K-shot episode.

    n_query is the total query count, spread round-robin over the ways;
    query samples are disjoint from support as image instances.  Support
    is shuffled into one random-order stream.
    """
    if corpus.n_classes < n_ways:
        raise ValueError(f"corpus has {corpus.n_classes} classes, "
                         f"need {n_ways}")
    chosen = rng.choice(corpus.n_classes, size=n_ways, replace=False)
    per_way_query = np.full(n_ways, n_query // n_ways)
    if n_query % n_ways:
        # remainder probes go to random ways, or small n_query would
        # always test the same label positions
        extra = rng.choice(n_ways, size=n_query % n_ways, replace=False)
        per_way_query[extra] += 1
    support, query = [], []
    for way, ci in enumerate(chosen):
        rec = corpus.classes[ci]
        need = k_shots + per_way_query[way]
        if len(rec.images) < need:
            raise ValueError(
                f"class {rec.class_id!r} has {len(rec.images)} samples, "
                f"episode needs {need}")
        idx = rng.choice(len(rec.images), size=need, replace=False)
        support += [(rec.images[j], way) for j in idx[:k_shots]]
        query += [(rec.images[j], way) for j in idx[k_shots:]]
    support = [support[i] for i in rng.permutation(len(support))]
    query = [query[i] for i in rng.permutation(len(query))]
    return Episode(n_ways, k_shots, support, query,
                   [corpus.classes[ci].class_id for ci in chosen])
