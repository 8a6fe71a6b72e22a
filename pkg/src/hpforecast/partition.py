"""Hierarchical partitions of a feature space.

A partition is stored as a tree of :class:`Segment` records. Each segment
carries a membership predicate; children of a segment split its region into
pairwise disjoint pieces. Routing walks from the root to the unique leaf
containing a point.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import InvalidArgument, OutOfDomain, ResourceLimit

DEFAULT_ENUMERATION_CAP = 10**6


# -- predicates -------------------------------------------------------------

@dataclass(frozen=True)
class Universal:
    def contains(self, x) -> bool:
        return True

    def to_dict(self) -> dict:
        return {"kind": "universal"}


@dataclass(frozen=True)
class GridRect:
    """Pixel rectangle ``[x0, x1) x [y0, y1)``; x is the column coordinate."""

    x0: int
    x1: int
    y0: int
    y1: int

    def contains(self, x) -> bool:
        return self.x0 <= x[0] < self.x1 and self.y0 <= x[1] < self.y1

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def to_dict(self) -> dict:
        return {"kind": "grid", "x": [self.x0, self.x1], "y": [self.y0, self.y1]}


@dataclass(frozen=True)
class Interval:
    """Half-open interval ``[lo, hi)`` on the first coordinate."""

    lo: float
    hi: float

    def contains(self, x) -> bool:
        v = x[0] if np.ndim(x) else x
        return self.lo <= v < self.hi

    def to_dict(self) -> dict:
        return {"kind": "interval", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Halfspace:
    """``side * (normal . x - offset) >= 0`` for side +1, ``< 0`` for side -1."""

    normal: tuple[float, ...]
    offset: float
    side: int

    def contains(self, x) -> bool:
        s = float(np.dot(self.normal, np.asarray(x, dtype=float))) - self.offset
        return s >= 0.0 if self.side > 0 else s < 0.0


@dataclass(frozen=True)
class HalfspaceChain:
    constraints: tuple[Halfspace, ...] = ()

    def contains(self, x) -> bool:
        return all(c.contains(x) for c in self.constraints)

    def to_dict(self) -> dict:
        return {
            "kind": "halfspace-chain",
            "constraints": [
                {"normal": list(c.normal), "offset": c.offset, "side": c.side}
                for c in self.constraints
            ],
        }


Predicate = Union[Universal, GridRect, Interval, HalfspaceChain]


def predicate_from_dict(d: dict) -> Predicate:
    kind = d["kind"]
    if kind == "universal":
        return Universal()
    if kind == "grid":
        return GridRect(int(d["x"][0]), int(d["x"][1]), int(d["y"][0]), int(d["y"][1]))
    if kind == "interval":
        return Interval(float(d["lo"]), float(d["hi"]))
    if kind == "halfspace-chain":
        return HalfspaceChain(tuple(
            Halfspace(tuple(float(v) for v in c["normal"]), float(c["offset"]), int(c["side"]))
            for c in d["constraints"]
        ))
    raise InvalidArgument(f"unknown predicate kind {kind!r}")


# -- tree -------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    id: int
    parent: int | None
    children: tuple[int, ...]
    predicate: Predicate

    @property
    def divisible(self) -> bool:
        return bool(self.children)


@dataclass(frozen=True)
class InducedPartition:
    segment_ids: frozenset[int]

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.segment_ids))

    def __len__(self) -> int:
        return len(self.segment_ids)

    def __contains__(self, sid) -> bool:
        return sid in self.segment_ids


@dataclass(frozen=True)
class HierarchicalPartition:
    segments: tuple[Segment, ...]
    root: int = 0
    _depth: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = self.segments
        if any(s.id != i for i, s in enumerate(segs)):
            raise InvalidArgument("segment ids must equal their positions")
        roots = [s.id for s in segs if s.parent is None]
        if roots != [self.root]:
            raise InvalidArgument(f"expected exactly one root {self.root}, found {roots}")
        for s in segs:
            if len(s.children) == 1:
                raise InvalidArgument(f"segment {s.id} has a single child")
            for c in s.children:
                if segs[c].parent != s.id:
                    raise InvalidArgument(f"segment {c} does not point back to parent {s.id}")
        depth = [0] * len(segs)
        order = [self.root]
        for sid in order:
            for c in segs[sid].children:
                depth[c] = depth[sid] + 1
                order.append(c)
        if len(order) != len(segs):
            raise InvalidArgument("segments do not form a single tree")
        object.__setattr__(self, "_depth", tuple(depth))

    def __len__(self) -> int:
        return len(self.segments)

    def __getitem__(self, sid: int) -> Segment:
        return self.segments[sid]

    def depth(self, sid: int) -> int:
        return self._depth[sid]

    @property
    def levels(self) -> int:
        return max(self._depth) + 1

    def divisible_ids(self) -> list[int]:
        return [s.id for s in self.segments if s.children]

    def leaf_ids(self) -> list[int]:
        return [s.id for s in self.segments if not s.children]

    def ancestors(self, sid: int) -> list[int]:
        """Strict ancestors of ``sid``, nearest first."""
        out = []
        p = self.segments[sid].parent
        while p is not None:
            out.append(p)
            p = self.segments[p].parent
        return out

    def contains(self, sid: int, x) -> bool:
        return self.segments[sid].predicate.contains(x)

    def route(self, x) -> list[int]:
        seg = self.segments[self.root]
        if not seg.predicate.contains(x):
            raise OutOfDomain(f"point {x!r} is outside the root region")
        path = [seg.id]
        while seg.children:
            for c in seg.children:
                child = self.segments[c]
                if child.predicate.contains(x):
                    seg = child
                    break
            else:
                raise OutOfDomain(f"no child of segment {seg.id} contains {x!r}")
            path.append(seg.id)
        return path

    # -- serialization --

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "segments": [
                {"id": s.id, "parent": s.parent, "children": list(s.children),
                 "predicate": s.predicate.to_dict()}
                for s in self.segments
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HierarchicalPartition":
        segs = tuple(
            Segment(int(s["id"]), None if s["parent"] is None else int(s["parent"]),
                    tuple(int(c) for c in s["children"]), predicate_from_dict(s["predicate"]))
            for s in d["segments"]
        )
        return cls(segs, int(d["root"]))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "HierarchicalPartition":
        return cls.from_dict(json.loads(text))


class _Builder:
    def __init__(self):
        self.parent: list[int | None] = []
        self.children: list[list[int]] = []
        self.pred: list[Predicate] = []

    def add(self, parent: int | None, pred: Predicate) -> int:
        sid = len(self.pred)
        self.parent.append(parent)
        self.children.append([])
        self.pred.append(pred)
        if parent is not None:
            self.children[parent].append(sid)
        return sid

    def build(self) -> HierarchicalPartition:
        return HierarchicalPartition(tuple(
            Segment(i, self.parent[i], tuple(self.children[i]), self.pred[i])
            for i in range(len(self.pred))
        ))


def single_segment(predicate: Predicate | None = None) -> HierarchicalPartition:
    return HierarchicalPartition((Segment(0, None, (), predicate or Universal()),))


# -- builders ---------------------------------------------------------------

def build_quadtree(width: int, height: int, levels: int) -> HierarchicalPartition:
    """Quad-tree over the pixel grid ``[0, width) x [0, height)``.

    Children are ordered top-left, top-right, bottom-left, bottom-right. Odd
    sides split at the floor midpoint, so the left/top half is the smaller.
    """
    if levels < 1:
        raise InvalidArgument("levels must be >= 1")
    need = 2 ** (levels - 1)
    if width < need or height < need:
        raise InvalidArgument(
            f"{width}x{height} grid too small for {levels} levels (need >= {need} per side)")
    b = _Builder()
    queue = [(b.add(None, GridRect(0, width, 0, height)), 1)]
    for sid, level in queue:
        if level == levels:
            continue
        r = b.pred[sid]
        mx = r.x0 + r.width // 2
        my = r.y0 + r.height // 2
        for y0, y1 in ((r.y0, my), (my, r.y1)):
            for x0, x1 in ((r.x0, mx), (mx, r.x1)):
                queue.append((b.add(sid, GridRect(x0, x1, y0, y1)), level + 1))
    return b.build()


def _per_depth(value, depth: int) -> float:
    if np.ndim(value) == 0:
        return float(value)
    return float(value[depth])


def build_random_halfspaces(dim: int, depth: int, mu=0.0, sigma=1.0,
                            seed: int = 0) -> HierarchicalPartition:
    """Complete binary tree of random hyperplane splits.

    Each internal node draws ``a ~ N(0, I)`` and an offset with mean ``mu`` and
    variance ``sigma``; its children are ``a.x/|a| - b >= 0`` (child 0) and
    ``< 0`` (child 1). ``mu`` and ``sigma`` may be scalars or per-depth
    sequences of length ``depth``.
    """
    if dim < 1 or depth < 0:
        raise InvalidArgument("need dim >= 1 and depth >= 0")
    for d in range(depth):
        if _per_depth(sigma, d) < 0:
            raise InvalidArgument("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    b = _Builder()
    queue = [(b.add(None, HalfspaceChain()), 0)]
    for sid, level in queue:
        if level == depth:
            continue
        a = rng.standard_normal(dim)
        while not np.any(a):
            a = rng.standard_normal(dim)
        normal = tuple(float(v) for v in a / np.linalg.norm(a))
        offset = float(rng.normal(_per_depth(mu, level), math.sqrt(_per_depth(sigma, level))))
        base = b.pred[sid].constraints
        for side in (1, -1):
            child = HalfspaceChain(base + (Halfspace(normal, offset, side),))
            queue.append((b.add(sid, child), level + 1))
    return b.build()


def halfspace_tree(splits: dict[tuple[int, ...], tuple[Sequence[float], float]],
                   dim: int) -> HierarchicalPartition:
    """Binary halfspace tree from explicit splits keyed by child-index paths.

    ``splits[()]`` splits the root, ``splits[(0,)]`` splits its first child,
    and so on. Normals are normalised.
    """
    b = _Builder()
    queue = [(b.add(None, HalfspaceChain()), ())]
    for sid, key in queue:
        if key not in splits:
            continue
        a, off = splits[key]
        a = np.asarray(a, dtype=float)
        if a.shape != (dim,) or not np.any(a):
            raise InvalidArgument(f"bad normal at {key}")
        normal = tuple(float(v) for v in a / np.linalg.norm(a))
        for i, side in enumerate((1, -1)):
            child = HalfspaceChain(b.pred[sid].constraints + (Halfspace(normal, float(off), side),))
            queue.append((b.add(sid, child), key + (i,)))
    return b.build()


def interval_tree(spec) -> HierarchicalPartition:
    """Build from a nested ``(lo, hi, [child specs])`` description."""
    b = _Builder()

    def walk(node, parent):
        lo, hi, kids = node
        sid = b.add(parent, Interval(float(lo), float(hi)))
        if kids:
            edges = [k[0] for k in kids] + [kids[-1][1]]
            if edges[0] != lo or edges[-1] != hi or any(
                    kids[i][1] != kids[i + 1][0] for i in range(len(kids) - 1)):
                raise InvalidArgument(f"children of [{lo}, {hi}) do not tile it")
        for k in kids:
            walk(k, sid)

    walk(spec, None)
    return b.build()


def figure1_partition() -> HierarchicalPartition:
    """The eight-segment example partition of ``[0, 1)`` used throughout the tests."""
    return interval_tree((0, 1, [
        (0, 0.7, [(0, 0.2, []), (0.2, 0.5, [(0.2, 0.3, []), (0.3, 0.5, [])]), (0.5, 0.7, [])]),
        (0.7, 1, []),
    ]))


# -- induced partitions -----------------------------------------------------

def count_induced_partitions(h: HierarchicalPartition, sid: int | None = None) -> int:
    sid = h.root if sid is None else sid
    seg = h[sid]
    if not seg.children:
        return 1
    return 1 + math.prod(count_induced_partitions(h, c) for c in seg.children)


def enumerate_induced_partitions(h: HierarchicalPartition,
                                 cap: int = DEFAULT_ENUMERATION_CAP) -> list[InducedPartition]:
    n = count_induced_partitions(h)
    if n > cap:
        raise ResourceLimit(f"{n} induced partitions exceed cap {cap}")

    def walk(sid):
        seg = h[sid]
        out = [frozenset((sid,))]
        if seg.children:
            for combo in product(*(walk(c) for c in seg.children)):
                out.append(frozenset().union(*combo))
        return out

    return [InducedPartition(s) for s in walk(h.root)]


def is_induced(h: HierarchicalPartition, p) -> bool:
    ids = set(p)
    if not ids or any(not (0 <= s < len(h)) for s in ids):
        return False
    for leaf in h.leaf_ids():
        path = [leaf] + h.ancestors(leaf)
        if sum(1 for s in path if s in ids) != 1:
            return False
    return True


def count_divisible_supersets(h: HierarchicalPartition, p) -> int:
    """Number of divisible segments containing (or equal to) some member of ``p``."""
    ids = set(p)
    if not is_induced(h, ids):
        raise InvalidArgument(f"{sorted(ids)} is not a partition induced by h")
    hit = set()
    for s in ids:
        hit.update(a for a in [s] + h.ancestors(s) if h[a].children)
    return len(hit)


def sample_domain(h: HierarchicalPartition, n: int, rng: np.random.Generator,
                  dim: int | None = None) -> np.ndarray:
    """Draw ``n`` points from the root region (standard normal if unbounded)."""
    pred = h[h.root].predicate
    if isinstance(pred, GridRect):
        return np.column_stack([rng.uniform(pred.x0, pred.x1, n), rng.uniform(pred.y0, pred.y1, n)])
    if isinstance(pred, Interval):
        return rng.uniform(pred.lo, pred.hi, (n, 1))
    if dim is None:
        dim = _infer_dim(h)
    return rng.standard_normal((n, dim))


def _infer_dim(h: HierarchicalPartition) -> int:
    for s in h.segments:
        if isinstance(s.predicate, HalfspaceChain) and s.predicate.constraints:
            return len(s.predicate.constraints[0].normal)
    raise InvalidArgument("cannot infer dimension of an unbounded single-segment partition")
