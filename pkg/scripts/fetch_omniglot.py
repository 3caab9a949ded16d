#!/usr/bin/env python3
"""Download and unpack the Omniglot handwritten-character images.

Produces the class-per-directory layout the loader expects:

    <root>/train/<alphabet>.<character>/*.png
    <root>/test/<alphabet>.<character>/*.png

The background set (964 characters) becomes train/, the evaluation set
(659 characters) becomes test/.  Images stay 105x105 ink-on-white; the
loader resizes and inverts at read time.

Requires network access to github.com.  In an offline environment use
scripts/make_synthetic.py instead, which writes a generated corpus in
the same layout.
"""

import argparse
import io
import os
import sys
import urllib.request
import zipfile

URLS = {
    "train": "https://github.com/brendenlake/omniglot/raw/master/python/images_background.zip",
    "test": "https://github.com/brendenlake/omniglot/raw/master/python/images_evaluation.zip",
}


def fetch(url: str) -> bytes:
    print(f"fetching {url}")
    with urllib.request.urlopen(url) as resp:
        return resp.read()


def unpack(blob: bytes, dest: str):
    """Flatten alphabet/character/ into <alphabet>.<character>/."""
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        for info in zf.infolist():
            if info.is_dir() or not info.filename.endswith(".png"):
                continue
            parts = info.filename.split("/")
            # images_background/<alphabet>/<character>/<image>.png
            alphabet, character, fname = parts[-3], parts[-2], parts[-1]
            cdir = os.path.join(dest, f"{alphabet}.{character}")
            os.makedirs(cdir, exist_ok=True)
            with open(os.path.join(cdir, fname), "wb") as f:
                f.write(zf.read(info))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--root", required=True, help="output directory")
    args = ap.parse_args()
    for split, url in URLS.items():
        dest = os.path.join(args.root, split)
        if os.path.isdir(dest) and os.listdir(dest):
            print(f"{dest} already populated, skipping")
            continue
        try:
            blob = fetch(url)
        except OSError as exc:
            print(f"download failed ({exc}); if this machine is offline, "
                  f"use scripts/make_synthetic.py instead", file=sys.stderr)
            return 1
        unpack(blob, dest)
        print(f"unpacked {split} -> {dest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
