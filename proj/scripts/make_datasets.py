#!/usr/bin/env python3
"""Build the point-cloud fixtures under data/ by surface-sampling Stanford meshes.

The meshes come from two npm packages (`bunny`, MIT; `stanford-dragon`), which
redistribute models from the Stanford 3D Scanning Repository. The bunny package
stores a rescaled copy of the reconstructed bunny; it is mapped back onto the
bounding box of the original scan (units of metres, extent ~0.156 x 0.153 x 0.118)
so that "rotation about the dataset origin" keeps its original meaning.

Usage: scripts/make_datasets.py [--points 10000] [--seed 20210801] [--out data]
Requires: npm (to fetch the packages), numpy.
"""
import argparse
import gzip
import json
import pathlib
import re
import subprocess
import tarfile
import tempfile

import numpy as np

# Axis-aligned bounding box of bun_zipper.ply in the Stanford repository.
BUNNY_MIN = np.array([-0.094688, 0.032987, -0.061874])
BUNNY_EXTENT_X = 0.156


def npm_fetch(pkg, workdir):
    out = subprocess.run(["npm", "pack", pkg], cwd=workdir, check=True,
                         capture_output=True, text=True).stdout.strip().splitlines()[-1]
    with tarfile.open(pathlib.Path(workdir) / out) as tar:
        tar.extractall(pathlib.Path(workdir) / pkg)
    return pathlib.Path(workdir) / pkg / "package"


def load_bunny(root):
    text = (root / "index.js").read_text()
    pos = json.loads(re.search(r"exports\.positions\s*=\s*(\[.*?\]\])", text, re.S).group(1))
    cells = json.loads(re.search(r"exports\.cells\s*=\s*(\[.*?\]\])", text, re.S).group(1))
    v = np.asarray(pos, dtype=np.float64)
    lo, hi = v.min(axis=0), v.max(axis=0)
    scale = BUNNY_EXTENT_X / (hi[0] - lo[0])
    v = (v - lo) * scale + BUNNY_MIN
    return v, np.asarray(cells, dtype=np.int64)


def load_ascii_ply(path):
    with gzip.open(path, "rt") as fh:
        n_v = n_f = 0
        while True:
            line = fh.readline().strip()
            if line.startswith("element vertex"):
                n_v = int(line.split()[-1])
            elif line.startswith("element face"):
                n_f = int(line.split()[-1])
            elif line == "end_header":
                break
        v = np.array([[float(x) for x in fh.readline().split()[:3]] for _ in range(n_v)])
        f = np.array([[int(x) for x in fh.readline().split()[1:4]] for _ in range(n_f)])
    return v, f


def sample_surface(v, f, n, rng):
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    tri = rng.choice(len(f), size=n, p=area / area.sum())
    r1 = np.sqrt(rng.random(n))[:, None]
    r2 = rng.random(n)[:, None]
    return (1 - r1) * a[tri] + r1 * (1 - r2) * b[tri] + r1 * r2 * c[tri]


def write_binary_ply(path, pts):
    header = ("ply\nformat binary_little_endian 1.0\n"
              f"comment surface-sampled by scripts/make_datasets.py\n"
              f"element vertex {len(pts)}\nproperty float x\nproperty float y\n"
              "property float z\nend_header\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(pts.astype("<f4").tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=20210801)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    with tempfile.TemporaryDirectory() as tmp:
        v, f = load_bunny(npm_fetch("bunny", tmp))
        write_binary_ply(out / "bunny.ply", sample_surface(v, f, args.points, rng))
        v, f = load_ascii_ply(npm_fetch("stanford-dragon", tmp) / "models" / "dragon_vrip_res3.ply.gz")
        write_binary_ply(out / "dragon.ply", sample_surface(v, f, args.points, rng))
    print(f"wrote {out / 'bunny.ply'} and {out / 'dragon.ply'}")


if __name__ == "__main__":
    main()
