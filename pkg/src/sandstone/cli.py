"""Command-line entry point: ``sandstone <subcommand> ...``.

Exit codes: 0 ok, 1 verification failure, 2 window overflow, 3 precision not
met, 4 bad input geometry.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import circles, fractal, gamma, lattice, symmat
from .errors import GeometryError, SandstoneError, WindowOverflowError

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_OVERFLOW = 2
EXIT_PRECISION = 3
EXIT_GEOMETRY = 4

DEFAULT_SEED = 20130917


def rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def dyadic(text: str) -> Fraction:
    p = rational(text)
    if p <= 0 or p.numerator != 1 or p.denominator & (p.denominator - 1):
        raise argparse.ArgumentTypeError(f"precision must be 1/2^k, got {text!r}")
    return p


def nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _load_json(text: str):
    path = Path(text)
    if path.exists():
        text = path.read_text()
    return json.loads(text)


def parse_circles(items) -> list:
    """``[{"center": [x, y], "radius": r} | {"normal": [nx, ny], "offset": d}, ...]``."""
    out = []
    for item in items:
        if "radius" in item:
            out.append(circles.GenCircle.circle([float(Fraction(str(v))) for v in item["center"]],
                                                float(Fraction(str(item["radius"])))))
        else:
            out.append(circles.GenCircle.line([float(Fraction(str(v))) for v in item["normal"]],
                                              float(Fraction(str(item["offset"])))))
    return out


def parse_matrices(items) -> list:
    """``[[a, b, c], ...]`` (numbers or "p/q" strings) or circle objects."""
    out = []
    for item in items:
        if isinstance(item, dict):
            out.append(circles.circle_to_matrix(parse_circles([item])[0]))
        else:
            a, b, c = (float(Fraction(str(v))) for v in item)
            out.append(symmat.m_of(a, b, c))
    return out


# ---------------------------------------------------------------- sandpile


def cmd_sandpile(args) -> int:
    lat = lattice.get_lattice(args.lattice)
    radius = args.window if args.window is not None else lattice.default_radius(args.chips)
    try:
        res = lattice.stabilize_pile(args.chips, radius, lat)
    except WindowOverflowError as exc:
        print(f"error: {exc} (radius {radius})", file=sys.stderr)
        return EXIT_OVERFLOW
    cropped = lattice.crop_to_support(res.final)
    lattice.write_pgm(args.out, lattice.render_heights(cropped))
    if args.odometer:
        if str(args.odometer).endswith(".csv"):
            lattice.write_odometer_csv(args.odometer, res.odometer, res.final.domain)
        else:
            lattice.write_odometer_bin(args.odometer, res.odometer, res.final.domain)
    if args.figure:
        from .plotting import plot_sandpile

        plot_sandpile(cropped, args.figure, f"n = {args.chips}")
    total = res.final.total()
    print(f"chips,{args.chips}")
    print(f"sum,{total}")
    print(f"conserved,{int(total == args.chips)}")
    print(f"topplings,{res.topplings}")
    print(f"max_height,{int(res.final.values.max(initial=0))}")
    print(f"image,{cropped.values.shape[1]}x{cropped.values.shape[0]}")
    return EXIT_OK if total == args.chips else EXIT_VERIFY


# ---------------------------------------------------------------- gamma


def _write_image(path, img: np.ndarray) -> None:
    if str(path).lower().endswith(".png"):
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        plt.imsave(path, img, cmap="gray", vmin=0, vmax=255, metadata={"Software": None})
    else:
        lattice.write_pgm(path, img)


def cmd_gamma(args) -> int:
    threads = args.threads or gamma.default_threads()
    R = gamma.raster_gamma(args.rect, args.grid, args.precision, args.lattice, threads, args.cap)
    _write_image(args.out, R.image())
    if args.csv:
        Path(args.csv).write_text(R.csv_text())
    if args.figure:
        from .plotting import plot_gamma

        plot_gamma(R, args.figure)
    n_uncert = sum(not (iv.certified and iv.width <= R.precision) for iv in R.intervals)
    print(f"pixels,{len(R.intervals)}")
    print(f"uncertified,{n_uncert}")
    print(f"min_c0,{float(min(iv.lo for iv in R.intervals))}")
    print(f"max_c0,{float(max(iv.hi for iv in R.intervals))}")
    return EXIT_OK if n_uncert == 0 else EXIT_PRECISION


# ---------------------------------------------------------------- packing


def cmd_packing(args) -> int:
    try:
        if args.generators == "band":
            P = circles.band_packing(args.levels, args.frame, args.translates)
        else:
            gens = parse_circles(_load_json(args.generators))
            if len(gens) != 3:
                raise GeometryError("need exactly three generators")
            P = circles.downward_packing(*gens, args.levels)
    except (GeometryError, SandstoneError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    text = P.to_svg() if str(args.out).endswith(".svg") else P.to_json()
    Path(args.out).write_text(text)
    if args.figure:
        from .plotting import plot_packing

        plot_packing(P, args.figure)
    rep = circles.validate_geometry(P)
    print(f"circles,{len(P)}")
    print(f"max_descartes_error,{rep['max_descartes_error']:.3e}")
    print(f"angle_configurations,{rep['configurations']}")
    print(f"angle_violations,{rep['total_violations']}")
    ok = rep["max_descartes_error"] <= 1e-9 and rep["total_violations"] == 0
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_fractal(args) -> int:
    try:
        mats = parse_matrices(_load_json(args.matrices))
        if len(mats) != 3:
            raise GeometryError("need exactly three matrices")
        T = fractal.build_triangulation(*mats, args.levels, args.depth)
    except (SandstoneError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    text = fractal.to_svg(T) if str(args.out).endswith(".svg") else fractal.to_json(T)
    Path(args.out).write_text(text)
    if args.figure:
        from .plotting import plot_triangulation

        plot_triangulation(T, args.figure)
    rep = fractal.verify_c11(T)
    gens = [circles.matrix_to_circle(A) for A in mats]
    P = circles.downward_packing(*gens, args.levels)
    unmatched = sum(P.find(circles.matrix_to_circle(r.patch.hessian)) is None for r in T.patches)
    print(f"proper_triangles,{len(T.nodes)}")
    print(f"max_relative_mismatch,{rep['max_relative_mismatch']:.3e}")
    print(f"hessians_off_packing,{unmatched}")
    ok = rep["max_relative_mismatch"] <= 1e-9 and unmatched == 0
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------- verify


def _suite_sandpile(rng) -> list:
    rows = []
    ok = True
    for _ in range(10):
        m = int(rng.integers(3, 7))
        vals = rng.integers(-2, 7, size=(m, m)).astype(np.int32)
        cfg = lattice.ChipConfig(lattice.Domain.torus(m), vals)
        ref = lattice.stabilize(cfg)
        for order in ("rowmajor", "random", "priority"):
            r = lattice.stabilize(cfg, order=order, seed=int(rng.integers(1 << 30)))
            ok &= r.status == ref.status
            if ref.status == lattice.STABLE:
                ok &= bool((r.final.values == ref.final.values).all() and (r.odometer == ref.odometer).all())
    rows.append(("abelian determinism (3 orders)", ok))
    res = lattice.stabilize_pile(4096)
    rows.append(("conservation n=4096", res.final.total() == 4096))
    return rows


def _suite_gamma(rng) -> list:
    rows = []
    I0 = gamma.c0(0, 0, Fraction(1, 64))
    I1 = gamma.c0(1, 0, Fraction(1, 64))
    rows.append(("c0(0,0) near 2", I0.lo == 2 and I0.hi <= Fraction(33, 16)))
    rows.append(("c0(1,0) reaches 3", I1.hi == 3))
    ok = True
    for _ in range(5):
        a = Fraction(int(rng.integers(0, 8)), 4)
        b = Fraction(int(rng.integers(0, 8)), 4)
        A, B = gamma.c0(a, b, Fraction(1, 32)), gamma.c0(a + 2, b, Fraction(1, 32))
        ok &= abs(A.mid - B.mid) <= Fraction(1, 16)
    rows.append(("translation symmetry", ok))
    ok = True
    for _ in range(10):
        A = symmat.m_of(*(Fraction(int(rng.integers(-8, 9)), int(rng.integers(1, 5))) for _ in range(3)))
        ok &= Fraction(int(gamma.build_eta(A).values.sum()), gamma.torus_size(A) ** 2) == A.trace
    rows.append(("density identity", ok))
    return rows


def _suite_geometry(rng) -> list:
    rows = []
    G = circles.GenCircle
    P = circles.band_packing(5, "ford")
    rep = circles.validate_geometry(P)
    rows.append(("descartes identity (band)", rep["max_descartes_error"] <= 1e-9))
    r1, r2, r3 = (float(x) for x in np.exp(rng.uniform(-1, 1, 3)))
    a, b = r1 + r2, r1 + r3
    x = (a * a + b * b - (r2 + r3) ** 2) / (2 * a)
    gens = [G.circle((0, 0), r1), G.circle((a, 0), r2), G.circle((x, math.sqrt(b * b - x * x)), r3)]
    rep = circles.validate_geometry(circles.downward_packing(*gens, 4))
    rows.append(("angle bounds", rep["total_violations"] == 0))
    rows.append(("median lines", rep["max_median_error"] <= 1e-9))
    return rows


def _suite_fractal(rng) -> list:
    rows = []
    tri = fractal.triangle_from_vertices((0, 0), (1, 0), tuple(rng.uniform(0.2, 0.8, 2)), 12)
    rows.append(("area 4/7", abs(tri.area() / tri.vertex_triangle_area() - 4 / 7) <= 1e-3))
    G = circles.GenCircle
    gens = [G.circle((1, 0), 1), G.circle((1, 2), 1), G.circle((0.25, 1), 0.25)]
    T = fractal.build_triangulation(*(circles.circle_to_matrix(c) for c in gens), 4, 8)
    r = fractal.area_ratios(T)
    rows.append(("area 4/21", bool(np.abs(r - 4 / 21).max() <= 1e-3)))
    rows.append(("C11 matching", fractal.verify_c11(T)["max_relative_mismatch"] <= 1e-9))
    return rows


SUITES = {
    "sandpile": _suite_sandpile,
    "gamma": _suite_gamma,
    "geometry": _suite_geometry,
    "fractal": _suite_fractal,
}


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    names = list(SUITES) if args.suite == "all" else [args.suite]
    failed = 0
    print("suite,check,result")
    for name in names:
        for check, ok in SUITES[name](rng):
            print(f"{name},{check},{'pass' if ok else 'FAIL'}")
            failed += not ok
    return EXIT_OK if failed == 0 else EXIT_VERIFY


# ---------------------------------------------------------------- report


def cmd_report(args) -> int:
    """Small end-to-end run: CSV tables plus one figure per artifact."""
    from . import plotting

    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    res = lattice.stabilize_pile(args.chips)
    cropped = lattice.crop_to_support(res.final)
    lattice.write_pgm(out / "sandpile.pgm", lattice.render_heights(cropped))
    plotting.plot_sandpile(cropped, out / "sandpile.png", f"n = {args.chips}")
    plotting.plot_odometer_profile(res.odometer, out / "odometer.png")
    counts = np.bincount(cropped.values.ravel(), minlength=4)
    with open(out / "sandpile.csv", "w") as fh:
        fh.write("height,sites\n")
        for h, c in enumerate(counts):
            fh.write(f"{h},{int(c)}\n")

    R = gamma.raster_gamma((0, 2, 0, 2), (args.grid, args.grid), Fraction(1, 16), "square", args.threads)
    (out / "gamma.csv").write_text(R.csv_text())
    plotting.plot_gamma(R, out / "gamma.png")

    P = circles.band_packing(args.levels, "ford")
    (out / "packing.json").write_text(P.to_json())
    plotting.plot_packing(P, out / "packing.png")

    G = circles.GenCircle
    gens = [G.circle((1, 0), 1), G.circle((1, 2), 1), G.circle((0.25, 1), 0.25)]
    T = fractal.build_triangulation(*(circles.circle_to_matrix(c) for c in gens), args.levels, 8)
    plotting.plot_triangulation(T, out / "triangulation.png")
    with open(out / "triangulation.csv", "w") as fh:
        fh.write("level,triangles,area_ratio_min,area_ratio_max,coverage\n")
        ratios = fractal.area_ratios(T)
        cov = fractal.coverage(T)
        levels = np.array([n.level for n in T.nodes])
        for lvl in sorted(set(levels.tolist())):
            r = ratios[levels == lvl]
            fh.write(f"{lvl},{len(r)},{r.min():.9f},{r.max():.9f},{cov[lvl]:.6f}\n")
    print(f"report,{out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sandstone", description="Sandpiles, Apollonian packings and the set of stabilizable matrices.")
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for randomized suites")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sandpile", help="stabilize N chips at the origin")
    p.add_argument("--chips", type=nonneg_int, required=True)
    p.add_argument("--out", required=True, help="P5 graymap of the final heights")
    p.add_argument("--odometer", help="odometer dump (.csv, otherwise binary)")
    p.add_argument("--window", type=nonneg_int, help="window radius (default ceil(2 sqrt N))")
    p.add_argument("--lattice", choices=["square", "tri"], default="square")
    p.add_argument("--figure", help="PNG rendering")
    p.set_defaults(func=cmd_sandpile)

    p = sub.add_parser("gamma", help="raster of certified c0 intervals")
    p.add_argument("--rect", nargs=4, type=rational, required=True, metavar=("A0", "A1", "B0", "B1"))
    p.add_argument("--grid", nargs=2, type=int, required=True, metavar=("W", "H"))
    p.add_argument("--precision", type=dyadic, default=Fraction(1, 32))
    p.add_argument("--lattice", choices=["square", "tri"], default="square")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--cap", type=int, default=gamma.DEFAULT_TORUS_CAP, help="largest torus side")
    p.add_argument("--out", required=True, help="image (.pgm or .png)")
    p.add_argument("--csv")
    p.add_argument("--figure", help="PNG with axes and colour bar")
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("packing", help="band or downward packing")
    p.add_argument("--generators", default="band", help='"band", or JSON list of three circles/lines')
    p.add_argument("--levels", type=nonneg_int, default=4)
    p.add_argument("--frame", choices=["vertical", "ford"], default="vertical")
    p.add_argument("--translates", type=nonneg_int, default=0)
    p.add_argument("--out", required=True, help=".json or .svg")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_packing)

    p = sub.add_parser("fractal", help="triangulation with quadratic patches")
    p.add_argument("--matrices", required=True, help="JSON list of three [a, b, c] or circles")
    p.add_argument("--levels", type=nonneg_int, default=3)
    p.add_argument("--depth", type=nonneg_int, default=8)
    p.add_argument("--out", required=True, help=".svg or .json")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_fractal)

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--suite", choices=["all", *SUITES], default="all")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="CSV tables and figures in one directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--chips", type=nonneg_int, default=20000)
    p.add_argument("--grid", type=int, default=17)
    p.add_argument("--levels", type=nonneg_int, default=4)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "lattice", None) == "tri":
        args.lattice = "triangular"
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
