"""Lattices, chip configurations and the toppling engine.

Arrays are indexed ``[row, col]`` with ``col = x + origin[0]`` and
``row = y + origin[1]``.  On a torus of side ``m`` the origin is ``(0, 0)`` and
indices wrap.
"""

from __future__ import annotations

import heapq
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import WindowOverflowError

STABLE = "stable"
ABORTED = "aborted_all_toppled"

_STATUS = {0: STABLE, 1: ABORTED}


@dataclass(frozen=True)
class Lattice:
    name: str
    offsets: tuple
    stable_max: int
    basis: tuple

    @property
    def degree(self) -> int:
        return len(self.offsets)

    def dx(self) -> np.ndarray:
        return np.array([o[0] for o in self.offsets], dtype=np.int64)

    def dy(self) -> np.ndarray:
        return np.array([o[1] for o in self.offsets], dtype=np.int64)

    def embed(self, x, y):
        """Plane coordinates of lattice point ``(x, y)``."""
        (e1x, e1y), (e2x, e2y) = self.basis
        return (x * e1x + y * e2x, x * e1y + y * e2y)


SQUARE = Lattice("square", ((1, 0), (-1, 0), (0, 1), (0, -1)), 3, ((1.0, 0.0), (0.0, 1.0)))
TRIANGULAR = Lattice(
    "triangular",
    ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)),
    5,
    ((1.0, 0.0), (0.5, math.sqrt(3) / 2)),
)

_LATTICES = {"square": SQUARE, "triangular": TRIANGULAR, "tri": TRIANGULAR}


def get_lattice(name: str | Lattice) -> Lattice:
    if isinstance(name, Lattice):
        return name
    try:
        return _LATTICES[name]
    except KeyError:
        raise ValueError(f"unknown lattice {name!r}") from None


@dataclass(frozen=True)
class Domain:
    kind: str  # "window" or "torus"
    width: int
    height: int
    origin: tuple = (0, 0)

    @classmethod
    def window(cls, width: int, height: int, origin=None) -> "Domain":
        if origin is None:
            origin = (width // 2, height // 2)
        return cls("window", int(width), int(height), (int(origin[0]), int(origin[1])))

    @classmethod
    def centered(cls, radius: int) -> "Domain":
        return cls.window(2 * radius + 1, 2 * radius + 1, (radius, radius))

    @classmethod
    def torus(cls, m: int) -> "Domain":
        if m < 1:
            raise ValueError("torus size must be >= 1")
        return cls("torus", int(m), int(m), (0, 0))

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    @property
    def shape(self) -> tuple:
        return (self.height, self.width)

    def index(self, x: int, y: int) -> tuple:
        if self.is_torus:
            return ((y % self.height), (x % self.width))
        r, c = y + self.origin[1], x + self.origin[0]
        if not (0 <= r < self.height and 0 <= c < self.width):
            raise IndexError(f"site {(x, y)} outside the window")
        return (r, c)


@dataclass
class ChipConfig:
    domain: Domain
    values: np.ndarray
    lattice: Lattice = SQUARE

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.int32)
        if self.values.shape != self.domain.shape:
            raise ValueError(f"values shape {self.values.shape} != domain shape {self.domain.shape}")

    @classmethod
    def zeros(cls, domain: Domain, lattice: Lattice = SQUARE) -> "ChipConfig":
        return cls(domain, np.zeros(domain.shape, dtype=np.int32), lattice)

    @classmethod
    def single_pile(cls, n: int, radius: int | None = None, lattice: Lattice = SQUARE) -> "ChipConfig":
        if n < 0:
            raise ValueError("chip count must be >= 0")
        if radius is None:
            radius = default_radius(n)
        cfg = cls.zeros(Domain.centered(radius), lattice)
        cfg.values[radius, radius] = n
        return cfg

    def __getitem__(self, site):
        return int(self.values[self.domain.index(*site)])

    def total(self) -> int:
        return int(self.values.sum(dtype=np.int64))

    def is_stable(self) -> bool:
        return bool((self.values <= self.lattice.stable_max).all())


@dataclass
class StabilizeResult:
    final: ChipConfig
    odometer: np.ndarray
    status: str
    visits: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def topplings(self) -> int:
        return int(self.odometer.sum(dtype=np.int64))


def default_radius(n: int) -> int:
    """Window radius for a pile of ``n`` chips."""
    return max(1, math.ceil(2 * math.sqrt(n)))


def laplacian(u: np.ndarray, site, lattice: Lattice = SQUARE, domain: Domain | None = None) -> int:
    """Discrete Laplacian of ``u`` at ``site`` (a lattice point ``(x, y)``)."""
    if domain is None:
        domain = Domain.window(u.shape[1], u.shape[0], (0, 0))
    x, y = site
    here = int(u[domain.index(x, y)])
    total = 0
    for ox, oy in lattice.offsets:
        try:
            total += int(u[domain.index(x + ox, y + oy)]) - here
        except IndexError:
            raise IndexError(f"site {site} is not interior to the window") from None
    return total


def laplacian_field(u: np.ndarray, lattice: Lattice = SQUARE, torus: bool = True) -> np.ndarray:
    """Laplacian at every site; windows get zeros on the outer ring."""
    u = np.asarray(u, dtype=np.int64)
    out = -lattice.degree * u
    if torus:
        for ox, oy in lattice.offsets:
            out = out + np.roll(u, (-oy, -ox), axis=(0, 1))
        return out
    h, w = u.shape
    res = np.zeros_like(u)
    inner = out[1:h - 1, 1:w - 1].copy()
    for ox, oy in lattice.offsets:
        inner += u[1 + oy:h - 1 + oy, 1 + ox:w - 1 + ox]
    res[1:h - 1, 1:w - 1] = inner
    return res


@njit(cache=True, nogil=True)
def _fifo_stabilize(chips, odo, dx, dy, stable_max, torus, abort):
    """Bulk-toppling FIFO engine.

    Returns (status, visits) with status 0 stable, 1 aborted, 2 overflow.
    """
    h, w = chips.shape
    deg = dx.shape[0]
    n = h * w
    queue = np.empty(n, dtype=np.int64)
    inq = np.zeros(n, dtype=np.bool_)
    head = 0
    size = 0
    never = 0
    for r in range(h):
        for c in range(w):
            if odo[r, c] == 0:
                never += 1
            if chips[r, c] > stable_max:
                queue[(head + size) % n] = r * w + c
                size += 1
                inq[r * w + c] = True
    visits = 0
    while size > 0:
        s = queue[head]
        head += 1
        if head == n:
            head = 0
        size -= 1
        inq[s] = False
        r = s // w
        c = s - r * w
        k = chips[r, c] // deg
        if k <= 0:
            continue
        if not torus and (r == 0 or c == 0 or r == h - 1 or c == w - 1):
            return 2, visits
        visits += 1
        chips[r, c] -= k * deg
        if odo[r, c] == 0:
            never -= 1
        odo[r, c] += k
        for t in range(deg):
            rr = r + dy[t]
            cc = c + dx[t]
            if torus:
                rr %= h
                cc %= w
            chips[rr, cc] += k
            if chips[rr, cc] > stable_max:
                ss = rr * w + cc
                if not inq[ss]:
                    queue[(head + size) % n] = ss
                    size += 1
                    inq[ss] = True
        if torus and abort and never == 0:
            return 1, visits
    return 0, visits


@njit(cache=True, nogil=True)
def _quadrant_sweep(q, odo):
    """Sweep engine for a pile symmetric under both axis reflections.

    ``q[y, x]`` holds the sites with ``x, y >= 0``; a transfer from the first
    row or column into row/column 0 counts twice because the mirror image
    sends the same amount.  Returns the sweep count, or -1 on overflow.
    """
    h, w = q.shape
    r1 = 0
    c1 = 0
    sweeps = 0
    active = True
    while active:
        active = False
        sweeps += 1
        nr1 = 0
        nc1 = 0
        for r in range(r1 + 1):
            for c in range(c1 + 1):
                k = q[r, c] >> 2
                if k > 0:
                    if r == h - 1 or c == w - 1:
                        return -1
                    active = True
                    q[r, c] -= 4 * k
                    odo[r, c] += k
                    q[r, c + 1] += k
                    q[r + 1, c] += k
                    if c == 1:
                        q[r, 0] += 2 * k
                    elif c > 1:
                        q[r, c - 1] += k
                    if r == 1:
                        q[0, c] += 2 * k
                    elif r > 1:
                        q[r - 1, c] += k
                    if r + 1 > nr1:
                        nr1 = r + 1
                    if c + 1 > nc1:
                        nc1 = c + 1
        r1 = min(nr1, h - 1)
        c1 = min(nc1, w - 1)
    return sweeps


def _unfold(q: np.ndarray) -> np.ndarray:
    R = q.shape[0] - 1
    full = np.empty((2 * R + 1, 2 * R + 1), dtype=q.dtype)
    full[R:, R:] = q
    full[R:, :R + 1] = q[:, ::-1]
    full[:R + 1, R:] = q[::-1, :]
    full[:R + 1, :R + 1] = q[::-1, ::-1]
    return full


def stabilize_pile(n: int, radius: int | None = None, lattice: Lattice = SQUARE) -> StabilizeResult:
    """Stabilize ``n`` chips at the origin of a centred window.

    On the square lattice only one quadrant is simulated; the result is
    identical to :func:`stabilize` on the full window.
    """
    cfg = ChipConfig.single_pile(n, radius, lattice)
    if lattice.name != "square":
        return stabilize(cfg)
    R = cfg.domain.origin[0]
    q = np.zeros((R + 1, R + 1), dtype=np.int32)
    q[0, 0] = n
    odo = np.zeros(q.shape, dtype=np.int64)
    sweeps = _quadrant_sweep(q, odo)
    if sweeps < 0:
        raise WindowOverflowError("a boundary site would topple; enlarge the window")
    final = ChipConfig(cfg.domain, _unfold(q), lattice)
    return StabilizeResult(final, _unfold(odo), STABLE, int(sweeps))


def stabilize(config: ChipConfig, order: str = "fifo", seed: int | None = None,
              abort: bool = True) -> StabilizeResult:
    """Stabilize ``config``; the input is not modified.

    ``order`` selects the engine: ``fifo`` (bulk toppling, compiled) or one of the
    unit-toppling reference orders ``rowmajor``, ``random``, ``priority``.
    """
    lat = config.lattice
    torus = config.domain.is_torus
    chips = config.values.copy()
    odo = np.zeros(chips.shape, dtype=np.int64)
    if order == "fifo":
        code, visits = _fifo_stabilize(chips, odo, lat.dx(), lat.dy(), lat.stable_max, torus, abort and torus)
    else:
        code, visits = _reference_stabilize(chips, odo, lat, torus, abort and torus, order, seed)
    if code == 2:
        raise WindowOverflowError("a boundary site would topple; enlarge the window")
    return StabilizeResult(ChipConfig(config.domain, chips, lat), odo, _STATUS[code], int(visits))


def _reference_stabilize(chips, odo, lat, torus, abort, order, seed):
    """Unit topplings in a prescribed order; pure Python, for small instances."""
    h, w = chips.shape
    deg = lat.degree
    never = h * w
    rng = np.random.default_rng(seed)

    def neighbours(r, c):
        for ox, oy in lat.offsets:
            rr, cc = r + oy, c + ox
            if torus:
                rr %= h
                cc %= w
            yield rr, cc

    def topple(r, c):
        nonlocal never
        if not torus and (r == 0 or c == 0 or r == h - 1 or c == w - 1):
            return 2
        chips[r, c] -= deg
        if odo[r, c] == 0:
            never -= 1
        odo[r, c] += 1
        for rr, cc in neighbours(r, c):
            chips[rr, cc] += 1
        if abort and never == 0:
            return 1
        return None

    visits = 0
    if order == "rowmajor":
        while True:
            moved = False
            for r in range(h):
                for c in range(w):
                    if chips[r, c] > lat.stable_max:
                        moved = True
                        visits += 1
                        code = topple(r, c)
                        if code is not None:
                            return code, visits
            if not moved:
                return 0, visits
    if order == "random":
        while True:
            unstable = np.argwhere(chips > lat.stable_max)
            if len(unstable) == 0:
                return 0, visits
            r, c = unstable[rng.integers(len(unstable))]
            visits += 1
            code = topple(int(r), int(c))
            if code is not None:
                return code, visits
    if order == "priority":
        heap = [(-int(chips[r, c]), r, c) for r, c in np.argwhere(chips > lat.stable_max).tolist()]
        heapq.heapify(heap)
        while heap:
            neg, r, c = heapq.heappop(heap)
            if -neg != chips[r, c] or chips[r, c] <= lat.stable_max:
                continue
            visits += 1
            code = topple(r, c)
            if code is not None:
                return code, visits
            for rr, cc in [(r, c), *neighbours(r, c)]:
                if chips[rr, cc] > lat.stable_max:
                    heapq.heappush(heap, (-int(chips[rr, cc]), rr, cc))
        return 0, visits
    raise ValueError(f"unknown order {order!r}")


def is_stabilizing(eta: np.ndarray, w: np.ndarray, lattice: Lattice = SQUARE) -> bool:
    """Whether ``eta + Laplacian(w)`` is stable on the torus."""
    return bool((eta + laplacian_field(w, lattice, torus=True) <= lattice.stable_max).all())


def render_heights(final: ChipConfig) -> np.ndarray:
    """Gray raster with heights ``0..stable_max`` equally spaced over 0..255."""
    smax = final.lattice.stable_max
    v = np.clip(final.values, 0, smax).astype(np.int64)
    return ((v * 255 + smax // 2) // smax).astype(np.uint8)


def crop_to_support(config: ChipConfig) -> ChipConfig:
    """Smallest origin-centred square window containing the support."""
    d = config.domain
    rows, cols = np.nonzero(config.values)
    ox, oy = d.origin
    if len(rows) == 0:
        rad = 0
    else:
        rad = int(max(np.abs(rows - oy).max(), np.abs(cols - ox).max()))
    sub = config.values[oy - rad:oy + rad + 1, ox - rad:ox + rad + 1]
    return ChipConfig(Domain.centered(rad), sub.copy(), config.lattice)


def pgm_bytes(raster: np.ndarray) -> bytes:
    raster = np.ascontiguousarray(raster, dtype=np.uint8)
    h, w = raster.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + raster.tobytes()


def write_pgm(path, raster: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(raster))


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary graymap")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)


ODOMETER_MAGIC = b"SANDODO1"


def write_odometer_csv(path, odometer: np.ndarray, domain: Domain) -> None:
    ox, oy = domain.origin
    rows, cols = np.nonzero(odometer)
    with open(path, "w") as fh:
        fh.write("x,y,v\n")
        for r, c in zip(rows.tolist(), cols.tolist()):
            fh.write(f"{c - ox},{r - oy},{int(odometer[r, c])}\n")


def write_odometer_bin(path, odometer: np.ndarray, domain: Domain) -> None:
    """Magic, then int64 LE width, height, origin x, origin y, then values row-major."""
    h, w = odometer.shape
    with open(path, "wb") as fh:
        fh.write(ODOMETER_MAGIC)
        fh.write(struct.pack("<4q", w, h, domain.origin[0], domain.origin[1]))
        fh.write(np.ascontiguousarray(odometer, dtype="<i8").tobytes())


def read_odometer_bin(path) -> tuple[np.ndarray, Domain]:
    with open(path, "rb") as fh:
        if fh.read(8) != ODOMETER_MAGIC:
            raise ValueError("bad odometer magic")
        w, h, ox, oy = struct.unpack("<4q", fh.read(32))
        vals = np.frombuffer(fh.read(), dtype="<i8").reshape(h, w)
    return vals.copy(), Domain.window(w, h, (ox, oy))
