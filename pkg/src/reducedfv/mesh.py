"""Tensor-product Voronoi box grids for a rectangular channel.

Nodes sit on a uniform ``nx x ny`` lattice including the corners. Each node
owns the dual box around it (half boxes along the edges, quarter boxes in
the corners). Boundary faces are the segments between neighbouring boundary
nodes; every node owns the half of each incident boundary face that is
closest to it.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

REGIONS = ("inlet", "outlet", "inert", "catalytic")
EDGES = ("bottom", "right", "top", "left")

# outward unit normals per edge
_EDGE_NORMALS = {
    "bottom": (0.0, -1.0),
    "right": (1.0, 0.0),
    "top": (0.0, 1.0),
    "left": (-1.0, 0.0),
}

MAX_LEVEL = 12


class GridError(ValueError):
    """Raised for inconsistent grid construction or tagging requests."""


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelGrid:
    """Uniform tensor grid on ``(0, Lx) x (0, Ly)`` with Voronoi box geometry.

    Node ``k`` has lattice position ``(i, j)`` with ``k = i + nx * j``.
    ``bface_region`` is ``None`` until :func:`tag_boundary` has been applied.
    """

    nx: int
    ny: int
    Lx: float
    Ly: float
    level: int | None
    node_coords: np.ndarray
    cell_measure: np.ndarray
    bface_nodes: np.ndarray
    bface_length: np.ndarray
    bface_normal: np.ndarray
    bface_edge: np.ndarray
    bface_region: np.ndarray | None = None
    catalytic_span: tuple[float, float] | None = field(default=None)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def dx(self) -> float:
        return self.Lx / (self.nx - 1)

    @property
    def dy(self) -> float:
        return self.Ly / (self.ny - 1)

    @property
    def tagged(self) -> bool:
        return self.bface_region is not None

    def node_index(self, i, j):
        return np.asarray(i) + self.nx * np.asarray(j)

    def interior_faces(self):
        """Return the Voronoi faces between neighbouring nodes.

        Returns
        -------
        pairs : (m, 2) int array
            Node indices ``(K, L)``; the normal points from K to L.
        h : (m,) array
            Distance between the two nodes.
        s : (m,) array
            Length of the shared Voronoi face.
        mid : (m, 2) array
            Midpoint of the Voronoi face.
        normal : (m, 2) array
            Unit normal from K to L.
        """
        nx, ny, dx, dy = self.nx, self.ny, self.dx, self.dy
        x = np.linspace(0.0, self.Lx, nx)
        y = np.linspace(0.0, self.Ly, ny)

        # extent of the dual box of lattice line j (y-direction) / i (x-direction)
        ylo = np.maximum(y - dy / 2, 0.0)
        yhi = np.minimum(y + dy / 2, self.Ly)
        xlo = np.maximum(x - dx / 2, 0.0)
        xhi = np.minimum(x + dx / 2, self.Lx)

        ii, jj = np.meshgrid(np.arange(nx - 1), np.arange(ny), indexing="xy")
        ii, jj = ii.ravel(), jj.ravel()
        xpairs = np.column_stack([self.node_index(ii, jj), self.node_index(ii + 1, jj)])
        xs = (yhi - ylo)[jj]
        xmid = np.column_stack([x[ii] + dx / 2, 0.5 * (ylo + yhi)[jj]])
        xh = np.full(len(ii), dx)
        xn = np.tile([1.0, 0.0], (len(ii), 1))

        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny - 1), indexing="xy")
        ii, jj = ii.ravel(), jj.ravel()
        ypairs = np.column_stack([self.node_index(ii, jj), self.node_index(ii, jj + 1)])
        ys = (xhi - xlo)[ii]
        ymid = np.column_stack([0.5 * (xlo + xhi)[ii], y[jj] + dy / 2])
        yh = np.full(len(ii), dy)
        yn = np.tile([0.0, 1.0], (len(ii), 1))

        return (
            np.vstack([xpairs, ypairs]),
            np.concatenate([xh, yh]),
            np.concatenate([xs, ys]),
            np.vstack([xmid, ymid]),
            np.vstack([xn, yn]),
        )

    def boundary_segments(self, region: str):
        """Per-node boundary portions carrying ``region``.

        Each boundary face contributes one half to each endpoint. Halves of
        the same node on the same edge are merged into one segment.

        Returns
        -------
        nodes : (m,) int array
        length : (m,) array
            Segment length (the node's boundary measure on that edge).
        mid : (m, 2) array
            Segment midpoint.
        normal : (m, 2) array
            Outward unit normal.
        """
        if not self.tagged:
            raise GridError("grid has no boundary tags; call tag_boundary first")
        sel = np.flatnonzero(self.bface_region == region)
        segs: dict[tuple[int, str], list[np.ndarray]] = {}
        for f in sel:
            a, b = self.bface_nodes[f]
            pa, pb = self.node_coords[a], self.node_coords[b]
            fm = 0.5 * (pa + pb)
            for node, p in ((a, pa), (b, pb)):
                segs.setdefault((int(node), str(self.bface_edge[f])), []).extend([p, fm])
        nodes, length, mid, normal = [], [], [], []
        for (node, edge), pts in sorted(segs.items()):
            pts = np.array(pts)
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            nodes.append(node)
            length.append(float(np.linalg.norm(hi - lo)))
            mid.append(0.5 * (lo + hi))
            normal.append(_EDGE_NORMALS[edge])
        return (
            np.array(nodes, dtype=int),
            np.array(length),
            np.array(mid).reshape(-1, 2),
            np.array(normal).reshape(-1, 2),
        )

    def region_nodes(self, region: str) -> np.ndarray:
        """Sorted unique endpoints of all faces tagged ``region``."""
        if not self.tagged:
            raise GridError("grid has no boundary tags; call tag_boundary first")
        return np.unique(self.bface_nodes[self.bface_region == region])

    def summary(self) -> dict:
        row = dict(
            level=self.level,
            nx=self.nx,
            ny=self.ny,
            dx=self.dx,
            dy=self.dy,
        )
        if self.tagged:
            row["n_catalytic"] = len(self.region_nodes("catalytic"))
        return row


@dataclass(frozen=True)
class CatalyticIndex:
    """Catalytic nodes ordered along the surface and their boundary measures."""

    nodes: np.ndarray
    sigma: np.ndarray
    coords: np.ndarray

    def __len__(self):
        return len(self.nodes)


def build_grid(level: int, Lx: float = 5.0, Ly: float = 1.0) -> ChannelGrid:
    """Build the channel grid with ``10 * 2**level`` nodes per direction."""
    if level < 0:
        raise GridError(f"level must be non-negative, got {level}")
    if level > MAX_LEVEL:
        raise GridError(f"level {level} exceeds the supported maximum {MAX_LEVEL}")
    n = 10 * 2**level
    return build_tensor_grid(n, n, Lx, Ly, level=level)


def build_tensor_grid(nx: int, ny: int, Lx: float, Ly: float, level=None) -> ChannelGrid:
    if nx < 2 or ny < 2:
        raise GridError("need at least two nodes per direction")
    if Lx <= 0 or Ly <= 0:
        raise GridError("domain lengths must be positive")
    x = np.linspace(0.0, Lx, nx)
    y = np.linspace(0.0, Ly, ny)
    X, Y = np.meshgrid(x, y, indexing="xy")
    coords = np.column_stack([X.ravel(), Y.ravel()])

    dx, dy = Lx / (nx - 1), Ly / (ny - 1)
    wx = np.full(nx, dx)
    wx[[0, -1]] = dx / 2
    wy = np.full(ny, dy)
    wy[[0, -1]] = dy / 2
    measure = np.outer(wy, wx).ravel()

    idx = lambda i, j: i + nx * j  # noqa: E731
    nodes, lengths, normals, edges = [], [], [], []
    for i in range(nx - 1):
        nodes.append((idx(i, 0), idx(i + 1, 0)))
        lengths.append(dx)
        edges.append("bottom")
    for j in range(ny - 1):
        nodes.append((idx(nx - 1, j), idx(nx - 1, j + 1)))
        lengths.append(dy)
        edges.append("right")
    for i in range(nx - 1):
        nodes.append((idx(i, ny - 1), idx(i + 1, ny - 1)))
        lengths.append(dx)
        edges.append("top")
    for j in range(ny - 1):
        nodes.append((idx(0, j), idx(0, j + 1)))
        lengths.append(dy)
        edges.append("left")
    normals = [_EDGE_NORMALS[e] for e in edges]

    return ChannelGrid(
        nx=nx,
        ny=ny,
        Lx=float(Lx),
        Ly=float(Ly),
        level=level,
        node_coords=_frozen(coords),
        cell_measure=_frozen(measure),
        bface_nodes=_frozen(np.array(nodes, dtype=int)),
        bface_length=_frozen(np.array(lengths)),
        bface_normal=_frozen(np.array(normals)),
        bface_edge=_frozen(np.array(edges)),
    )


def tag_boundary(
    grid: ChannelGrid,
    catalytic_span: tuple[float, float] | None = (2.0, 3.0),
    *,
    left: str = "inlet",
    right: str = "outlet",
    top: str = "inert",
    bottom: str = "inert",
) -> ChannelGrid:
    """Assign a region tag to every boundary face.

    Edges get the region given by the keyword of the same name. A bottom face
    is overridden to ``catalytic`` when its open intersection with
    ``catalytic_span`` has positive length.
    """
    per_edge = dict(left=left, right=right, top=top, bottom=bottom)
    for edge, region in per_edge.items():
        if region not in REGIONS:
            raise GridError(f"unknown region {region!r} for {edge} edge")

    region = np.array([per_edge[e] for e in grid.bface_edge], dtype=object)
    if catalytic_span is not None:
        a, b = catalytic_span
        if not (0.0 <= a < b <= grid.Lx):
            raise GridError(f"catalytic span {catalytic_span} not inside (0, {grid.Lx})")
        bot = np.flatnonzero(grid.bface_edge == "bottom")
        xa = grid.node_coords[grid.bface_nodes[bot, 0], 0]
        xb = grid.node_coords[grid.bface_nodes[bot, 1], 0]
        overlap = np.minimum(xb, b) - np.maximum(xa, a)
        hit = bot[overlap > 0]
        if len(hit) == 0:
            raise GridError(f"catalytic span {catalytic_span} covers no boundary face")
        region[hit] = "catalytic"
    if not np.any(region == "catalytic"):
        raise GridError("no boundary face tagged catalytic")

    region = region.astype(str)
    region.setflags(write=False)
    return dataclasses.replace(grid, bface_region=region, catalytic_span=catalytic_span)


def catalytic_index(grid: ChannelGrid) -> CatalyticIndex:
    """Enumerate catalytic nodes (sorted by x, then y) with their measures."""
    faces = np.flatnonzero(grid.bface_region == "catalytic") if grid.tagged else []
    if len(faces) == 0:
        raise GridError("grid has no catalytic faces")
    sigma = np.zeros(grid.n_nodes)
    half = grid.bface_length[faces] / 2
    np.add.at(sigma, grid.bface_nodes[faces, 0], half)
    np.add.at(sigma, grid.bface_nodes[faces, 1], half)
    nodes = np.flatnonzero(sigma > 0)
    xy = grid.node_coords[nodes]
    order = np.lexsort((xy[:, 1], xy[:, 0]))
    nodes = nodes[order]
    return CatalyticIndex(
        nodes=_frozen(nodes),
        sigma=_frozen(sigma[nodes]),
        coords=_frozen(grid.node_coords[nodes]),
    )


def channel(level: int, Lx=5.0, Ly=1.0, catalytic_span=(2.0, 3.0)):
    """Tagged default channel grid and its catalytic index."""
    grid = tag_boundary(build_grid(level, Lx, Ly), catalytic_span)
    return grid, catalytic_index(grid)


def dof_counts(level: int, n_species: int = 3, Lx=5.0, Ly=1.0, catalytic_span=(2.0, 3.0)):
    """Global (all species) and reduced degrees of freedom at ``level``."""
    grid, cat = channel(level, Lx, Ly, catalytic_span)
    return n_species * grid.n_nodes, len(cat)
