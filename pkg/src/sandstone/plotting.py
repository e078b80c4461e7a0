"""Matplotlib figures for the report outputs (Agg backend, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import PatchCollection  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402

_META = {"Software": None}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_sandpile(final, path, title: str | None = None) -> None:
    from .lattice import render_heights

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(render_heights(final), cmap="gray", vmin=0, vmax=255, origin="lower", interpolation="nearest")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_gamma(raster, path) -> None:
    a0, a1, b0, b1 = (float(v) for v in raster.rect)
    mid = (raster.lo() + raster.hi()) / 2
    lo, hi = (2.0, 3.0) if raster.lattice == "square" else (3.0, 4.0)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(mid, cmap="gray_r", vmin=lo, vmax=hi, extent=(a0, a1, b0, b1), interpolation="nearest")
    fig.colorbar(im, ax=ax, label="c0")
    ax.set_xlabel("a")
    ax.set_ylabel("b" if raster.lattice == "square" else "beta")
    _save(fig, path)


def plot_packing(P, path) -> None:
    circles = [c for c in P.circles if not c.is_line]
    fig, ax = plt.subplots(figsize=(6, 6))
    patches = [Circle(c.center, c.radius) for c in circles]
    ax.add_collection(PatchCollection(patches, facecolor="none", edgecolor="black", linewidth=0.4))
    xs = [c.center[0] for c in circles]
    ys = [c.center[1] for c in circles]
    rs = [c.radius for c in circles]
    x0 = min(x - r for x, r in zip(xs, rs))
    x1 = max(x + r for x, r in zip(xs, rs))
    y0 = min(y - r for y, r in zip(ys, rs))
    y1 = max(y + r for y, r in zip(ys, rs))
    for c in P.circles:
        if c.is_line:
            n = np.array(c.normal)
            base = n * c.offset
            t = np.array([-n[1], n[0]])
            span = 2 * max(x1 - x0, y1 - y0)
            seg = np.array([base - span * t, base + span * t])
            ax.plot(seg[:, 0], seg[:, 1], color="black", linewidth=0.4)
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    ax.set_aspect("equal")
    ax.set_axis_off()
    _save(fig, path)


def plot_triangulation(T, path) -> None:
    traces = np.array([float(r.patch.hessian.trace) for r in T.patches])
    polys, vals = [], []
    for i, tri in enumerate(T.initial.triangles):
        polys.append(Polygon(tri.polygon(), closed=True))
        vals.append(traces[i])
    for n in T.nodes:
        polys.append(Polygon(n.triangle.polygon(), closed=True))
        vals.append(traces[n.patch_id])
    fig, ax = plt.subplots(figsize=(6, 6))
    coll = PatchCollection(polys, cmap="gray_r", linewidth=0)
    coll.set_array(np.array(vals))
    coll.set_clim(2.0, traces.max())
    ax.add_collection(coll)
    hull = T.hull()
    ax.plot(*np.vstack([hull, hull[:1]]).T, color="0.6", linewidth=0.5)
    ax.set_xlim(hull[:, 0].min(), hull[:, 0].max())
    ax.set_ylim(hull[:, 1].min(), hull[:, 1].max())
    ax.set_aspect("equal")
    ax.set_axis_off()
    fig.colorbar(coll, ax=ax, label="Laplacian")
    _save(fig, path)


def plot_odometer_profile(odometer: np.ndarray, path) -> None:
    """Odometer along the horizontal axis through the origin."""
    R = odometer.shape[0] // 2
    row = odometer[R]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(len(row)) - R, row, color="black", linewidth=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("topplings")
    _save(fig, path)
