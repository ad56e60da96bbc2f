"""File writers for solver runs: point CSV, float PFM, preview PGM.

Numbers in the CSV are written with repr, the shortest digit string that
round-trips the exact double, so identical runs produce byte-identical
files.  The PFM stores the raw float32 means (NaN marks masked pixels)
and the PGM is an 8-bit preview with a fixed tone mapping: linear from
the finite minimum to the finite maximum, NaN rendered black.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "read_pfm",
    "write_gradient_csv",
    "write_pfm",
    "write_pgm",
    "write_point_csv",
]


def _fmt(v: float) -> str:
    return repr(float(v))


def write_point_csv(path, points, estimates) -> None:
    """Rows of x,y[,z],mean,stderr,n,avg_steps,avg_queries.

    points and estimates run in lockstep; pass only the in-domain pairs
    when exterior points were masked out.
    """
    dim = len(points[0]) if points else 2
    cols = ["x", "y", "z"][:dim] + ["mean", "stderr", "n", "avg_steps", "avg_queries"]
    lines = [",".join(cols)]
    for p, e in zip(points, estimates):
        row = [_fmt(c) for c in p]
        row += [_fmt(e.mean), _fmt(e.stderr), str(e.n),
                _fmt(e.steps / e.n), _fmt(e.distance_queries / e.n)]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def write_gradient_csv(path, points, estimates) -> None:
    """Gradient rows: x,y[,z],u_mean,u_stderr,gx..,gx_stderr..,n."""
    dim = len(points[0]) if points else 2
    axes = ["x", "y", "z"][:dim]
    cols = axes + ["u_mean", "u_stderr"]
    cols += [f"g{a}" for a in axes] + [f"g{a}_stderr" for a in axes] + ["n"]
    lines = [",".join(cols)]
    for p, e in zip(points, estimates):
        row = [_fmt(c) for c in p] + [_fmt(e.u_mean), _fmt(e.u_stderr)]
        row += [_fmt(g) for g in e.gradient]
        row += [_fmt(s) for s in e.gradient_stderr]
        row.append(str(e.n))
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def write_pfm(path, image: np.ndarray) -> None:
    """Grayscale PFM, little endian, rows written bottom to top."""
    img = np.asarray(image, dtype=np.float32)
    if img.ndim != 2:
        raise ValueError("PFM image must be 2D")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(np.flipud(img).astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise ValueError("not a grayscale PFM file")
        w, h = (int(t) for t in fh.readline().split())
        scale = float(fh.readline())
        data = fh.read(4 * w * h)
    kind = "<f4" if scale < 0.0 else ">f4"
    img = np.frombuffer(data, dtype=kind).reshape(h, w)
    return np.flipud(img).astype(np.float32)


def write_pgm(path, image: np.ndarray) -> None:
    """8-bit preview: finite min maps to 0, finite max to 255, NaN to 0.

    A flat image (or one with no finite pixels) renders mid-gray so the
    preview stays deterministic without dividing by zero.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM image must be 2D")
    finite = np.isfinite(img)
    if finite.any():
        lo = float(img[finite].min())
        hi = float(img[finite].max())
    else:
        lo = hi = 0.0
    if hi > lo:
        scaled = (img - lo) / (hi - lo) * 255.0
    else:
        scaled = np.full_like(img, 128.0)
    scaled = np.where(finite, scaled, 0.0)
    pixels = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(pixels.tobytes())
