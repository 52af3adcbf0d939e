#!/usr/bin/env python3
"""Convert the 5000-digit MNIST sample bundled with mlxtend into gzipped IDX files.

Usage: make_mnist_idx.py <mnist_5k.csv.gz> <out_dir>

The CSV holds one image per row (784 pixel columns, row-major 28x28) followed
by the class label. The output pair mirrors the layout of the original MNIST
distribution so the IDX loader reads it unchanged.
"""
import gzip
import struct
import sys
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    images, labels = bytearray(), bytearray()
    count = 0
    with gzip.open(src, "rt") as fh:
        for line in fh:
            fields = line.strip().split(",")
            if len(fields) != 785:
                continue
            images.extend(int(float(v)) for v in fields[:784])
            labels.append(int(float(fields[784])))
            count += 1
    # mtime=0 keeps the archives byte-reproducible
    with gzip.GzipFile(out / "mnist5k-images-idx3-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        fh.write(bytes(images))
    with gzip.GzipFile(out / "mnist5k-labels-idx1-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">II", 0x00000801, count))
        fh.write(bytes(labels))
    print(f"wrote {count} images to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
