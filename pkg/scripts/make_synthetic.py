#!/usr/bin/env python3
"""Write a synthetic image corpus in the layout the CLI expects.

Creates <root>/train/<class>/*.png and <root>/test/<class>/*.png plus a
split manifest, from either the stroke-glyph generator (default) or the
oriented-bar generator.  Point SNNMETA_DATA_DIR or --data-dir at <root>
afterwards.
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from snnmeta.episodes import split_classes, write_split_manifest
from snnmeta.synthetic import bar_corpus, glyph_corpus, write_corpus_png


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--root", required=True, help="output directory")
    ap.add_argument("--kind", choices=("glyphs", "bars"), default="glyphs")
    ap.add_argument("--classes", type=int, default=40,
                    help="glyph classes before splitting")
    ap.add_argument("--per-class", type=int, default=20)
    ap.add_argument("--train-classes", type=int, default=30)
    ap.add_argument("--jitter", type=float, default=0.4,
                    help="glyph stroke endpoint jitter (px)")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--split-seed", type=int, default=1)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    if args.kind == "glyphs":
        corpus = glyph_corpus(rng, args.classes,
                              samples_per_class=args.per_class,
                              n_strokes=(4, 4), jitter=args.jitter)
    else:
        corpus = bar_corpus(rng, samples_per_class=args.per_class)
    train, test = split_classes(corpus, args.train_classes,
                                np.random.default_rng(args.split_seed))
    os.makedirs(args.root, exist_ok=True)
    write_corpus_png(train, os.path.join(args.root, "train"))
    write_corpus_png(test, os.path.join(args.root, "test"))
    write_split_manifest(os.path.join(args.root, "split.txt"), train, test,
                         args.seed, args.kind)
    print(f"wrote {train.n_classes} train / {test.n_classes} test classes "
          f"({args.per_class} images each) under {args.root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
