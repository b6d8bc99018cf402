#!/usr/bin/env python3
"""Fetch MNIST training files in IDX format.

Tries the usual public mirrors first. Without direct internet access it falls
back to the 5000-image MNIST sample shipped inside the mlxtend wheel (fetched
through pip), shuffles it with a fixed seed and writes it out as IDX files.
"""

import argparse
import csv
import gzip
import io
import random
import struct
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

IMAGES = "train-images-idx3-ubyte"
LABELS = "train-labels-idx1-ubyte"
MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "http://yann.lecun.com/exdb/mnist/",
]
SHUFFLE_SEED = 20240601


def try_mirrors(out: Path) -> bool:
    for base in MIRRORS:
        try:
            blobs = {}
            for name in (IMAGES, LABELS):
                with urllib.request.urlopen(base + name + ".gz", timeout=20) as resp:
                    blobs[name] = gzip.decompress(resp.read())
        except Exception as exc:  # network errors of every flavour
            print(f"  {base}: {exc}", file=sys.stderr)
            continue
        for name, data in blobs.items():
            (out / name).write_bytes(data)
        print(f"fetched MNIST from {base}")
        return True
    return False


def write_idx(out: Path, rows):
    images = bytearray(struct.pack(">IIII", 0x803, len(rows), 28, 28))
    labels = bytearray(struct.pack(">II", 0x801, len(rows)))
    for pixels, label in rows:
        images.extend(pixels)
        labels.append(label)
    (out / IMAGES).write_bytes(bytes(images))
    (out / LABELS).write_bytes(bytes(labels))


def from_mlxtend(out: Path) -> bool:
    with tempfile.TemporaryDirectory() as tmp:
        cmd = [sys.executable, "-m", "pip", "download", "mlxtend", "--no-deps", "-d", tmp, "-q"]
        if subprocess.run(cmd).returncode != 0:
            return False
        wheels = list(Path(tmp).glob("mlxtend-*.whl"))
        if not wheels:
            return False
        with zipfile.ZipFile(wheels[0]) as zf:
            member = next((n for n in zf.namelist() if n.endswith("mnist_5k.csv.gz")), None)
            if member is None:
                return False
            text = gzip.decompress(zf.read(member)).decode()
    rows = []
    for rec in csv.reader(io.StringIO(text)):
        values = [int(v) for v in rec]
        if len(values) != 785:
            raise ValueError("unexpected row width in mnist_5k.csv")
        rows.append((bytes(values[:784]), values[784]))
    # The sample is sorted by class; shuffle so any prefix is class balanced.
    random.Random(SHUFFLE_SEED).shuffle(rows)
    write_idx(out, rows)
    print(f"wrote {len(rows)} MNIST images from the mlxtend sample (seeded shuffle {SHUFFLE_SEED})")
    return True


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/mnist", help="output directory")
    parser.add_argument("--no-mirrors", action="store_true", help="skip the public mirrors")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if (out / IMAGES).exists() and (out / LABELS).exists():
        print(f"{out} already holds MNIST")
        return 0
    if not args.no_mirrors and try_mirrors(out):
        return 0
    if from_mlxtend(out):
        return 0
    print("could not obtain MNIST", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
