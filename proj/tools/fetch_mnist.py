#!/usr/bin/env python3
"""Build the committed MNIST IDX files from the `mnist` npm package.

The npm package `mnist` (1.1.0) ships 10,000 genuine MNIST images as JSON,
one file per digit, each image a flat list of 784 pixels in [0,1] rounded to
three decimals (u8/255 rounded; exactly invertible via round(v*255)).

This script interleaves the digits round-robin, recovers the 8-bit pixels,
and writes canonical IDX files: the first 8000 images become the train split
(exactly 800 per class) and the last 2000 the test split. Everything is
deterministic -- rerunning reproduces the committed files byte for byte.

Usage:
  python3 tools/fetch_mnist.py --tarball mnist-1.1.0.tgz --out data/mnist
  python3 tools/fetch_mnist.py --digits-dir path/to/package/src/digits --out data/mnist
  (produce the tarball with: npm pack mnist@1.1.0)
"""

import argparse
import hashlib
import json
import pathlib
import struct
import sys
import tarfile
import tempfile

N_CLASSES = 10
SIDE = 28
N_PIXELS = SIDE * SIDE
TRAIN_COUNT = 8000


def load_digit(digits_dir: pathlib.Path, digit: int) -> list[bytes]:
    with open(digits_dir / f"{digit}.json") as f:
        payload = json.load(f)
    flat = payload["data"]
    if len(flat) % N_PIXELS:
        raise SystemExit(f"{digit}.json: pixel count {len(flat)} not a multiple of {N_PIXELS}")
    images = []
    for start in range(0, len(flat), N_PIXELS):
        px = bytes(round(v * 255) for v in flat[start : start + N_PIXELS])
        images.append(px)
    return images


def interleave(per_digit: list[list[bytes]]) -> tuple[list[bytes], list[int]]:
    images, labels = [], []
    cursor = [0] * N_CLASSES
    remaining = sum(len(d) for d in per_digit)
    while remaining:
        for digit in range(N_CLASSES):
            if cursor[digit] < len(per_digit[digit]):
                images.append(per_digit[digit][cursor[digit]])
                labels.append(digit)
                cursor[digit] += 1
                remaining -= 1
    return images, labels


def write_idx_images(path: pathlib.Path, images: list[bytes]) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), SIDE, SIDE))
        for img in images:
            f.write(img)


def write_idx_labels(path: pathlib.Path, labels: list[int]) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def sha256(path: pathlib.Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--tarball", help="mnist-*.tgz produced by `npm pack mnist`")
    src.add_argument("--digits-dir", help="already-extracted package/src/digits directory")
    ap.add_argument("--out", default="data/mnist", help="output directory (default: data/mnist)")
    args = ap.parse_args()

    if args.tarball:
        tmp = tempfile.TemporaryDirectory()
        with tarfile.open(args.tarball) as tar:
            tar.extractall(tmp.name, filter="data")
        digits_dir = pathlib.Path(tmp.name) / "package" / "src" / "digits"
    else:
        digits_dir = pathlib.Path(args.digits_dir)

    per_digit = [load_digit(digits_dir, d) for d in range(N_CLASSES)]
    counts = [len(d) for d in per_digit]
    print(f"per-digit source counts: {counts} (total {sum(counts)})", file=sys.stderr)

    images, labels = interleave(per_digit)
    if len(images) <= TRAIN_COUNT:
        raise SystemExit(f"need more than {TRAIN_COUNT} images, got {len(images)}")

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    splits = {
        "train": (images[:TRAIN_COUNT], labels[:TRAIN_COUNT]),
        "t10k": (images[TRAIN_COUNT:], labels[TRAIN_COUNT:]),
    }
    for name, (imgs, labs) in splits.items():
        img_path = out / f"{name}-images-idx3-ubyte"
        lab_path = out / f"{name}-labels-idx1-ubyte"
        write_idx_images(img_path, imgs)
        write_idx_labels(lab_path, labs)
        hist = [labs.count(d) for d in range(N_CLASSES)]
        print(f"{name}: {len(imgs)} images, per-class {hist}", file=sys.stderr)
        print(f"  {img_path}  sha256={sha256(img_path)}", file=sys.stderr)
        print(f"  {lab_path}  sha256={sha256(lab_path)}", file=sys.stderr)


if __name__ == "__main__":
    main()
