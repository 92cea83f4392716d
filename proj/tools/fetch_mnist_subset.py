#!/usr/bin/env python3
"""Fetch a 5000-image MNIST subset (500 per digit) and write it as IDX files.

The subset ships inside the mlxtend wheel as mlxtend/data/data/mnist_5k.csv.gz:
one image per row, 784 pixel values in 0..255 followed by the digit label.

    python3 tools/fetch_mnist_subset.py [--wheel PATH] [--out-dir data/mnist]
"""

import argparse
import csv
import gzip
import io
import pathlib
import struct
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def download_wheel(dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
         "mlxtend==0.24.0", "-d", str(dest)],
        check=True,
    )
    return next(pathlib.Path(dest).glob("mlxtend-*.whl"))


def read_rows(wheel):
    with zipfile.ZipFile(wheel) as zf:
        raw = gzip.decompress(zf.read(MEMBER))
    rows = []
    for rec in csv.reader(io.StringIO(raw.decode("ascii"))):
        if not rec:
            continue
        values = [int(float(v)) for v in rec]
        if len(values) != 785:
            raise ValueError(f"expected 785 fields, got {len(values)}")
        rows.append((values[:784], values[784]))
    return rows


def write_idx(rows, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    images = out_dir / "mnist5k-images-idx3-ubyte"
    labels = out_dir / "mnist5k-labels-idx1-ubyte"
    with open(images, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))
    with open(labels, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for _, label in rows))
    return images, labels


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wheel", type=pathlib.Path, help="use an already downloaded mlxtend wheel")
    ap.add_argument("--out-dir", type=pathlib.Path,
                    default=pathlib.Path(__file__).resolve().parent.parent / "data" / "mnist")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or download_wheel(tmp)
        rows = read_rows(wheel)
    images, labels = write_idx(rows, args.out_dir)
    counts = [0] * 10
    for _, label in rows:
        counts[label] += 1
    print(f"wrote {len(rows)} images to {images}")
    print(f"wrote labels to {labels} (per digit: {counts})")


if __name__ == "__main__":
    main()
