"""Exponential-fitting finite volume drift-diffusion operator.

The face flux between neighbouring nodes K and L is the Scharfetter-Gummel
flux

    j_KL = s * D / h * (B(-Pe) * Y_K - B(Pe) * Y_L),   Pe = (v . n_KL) * h / D

with ``B(x) = x / (exp(x) - 1)``. Rows of ``A`` hold the total outward flux
of each box, so ``A @ Y = b`` is the discrete balance with all boundary data
moved into ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import ChannelGrid

_SERIES_THRESHOLD = 1e-2


class OperatorError(RuntimeError):
    pass


def bernoulli(x):
    """Bernoulli function ``x / (exp(x) - 1)`` with ``B(0) = 1``.

    A truncated Taylor series is used for ``|x| < 1e-2``; large positive
    arguments are rewritten in terms of ``exp(-x)`` to avoid overflow.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < _SERIES_THRESHOLD
    pos = (x > 0) & ~small
    neg = (x < 0) & ~small

    xs = x[small]
    x2 = xs * xs
    out[small] = 1.0 - xs / 2 + x2 / 12 - x2 * x2 / 720

    xp = x[pos]
    e = np.exp(-xp)
    out[pos] = xp * e / -np.expm1(-xp)

    xn = x[neg]
    out[neg] = xn / np.expm1(xn)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class VelocityField:
    name: str
    func: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

    def __call__(self, points):
        """Evaluate at an ``(n, 2)`` array of points; returns ``(n, 2)``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        vx, vy = self.func(points[:, 0], points[:, 1])
        return np.column_stack(
            [np.broadcast_to(vx, len(points)), np.broadcast_to(vy, len(points))]
        )


def hagen_poiseuille(v_in: float, Ly: float = 1.0) -> VelocityField:
    """Parabolic channel flow ``v_in * (y * (Ly - y), 0)`` directed towards +x."""
    if v_in < 0:
        raise ValueError("v_in must be non-negative")
    return VelocityField(
        f"hagen_poiseuille(v_in={v_in:g})",
        lambda x, y: (v_in * y * (Ly - y), np.zeros_like(y)),
    )


def zero_velocity() -> VelocityField:
    return VelocityField("zero", lambda x, y: (np.zeros_like(x), np.zeros_like(y)))


@dataclass
class TransportOperator:
    """Assembled operator shared by every species.

    ``A`` carries Dirichlet rows replaced by the identity; ``A_flux`` is the
    same matrix before row replacement and is used to evaluate inlet fluxes.
    ``b0`` has one row per species.
    """

    grid: ChannelGrid
    velocity: VelocityField
    D: float
    A: sp.csc_matrix
    A_flux: sp.csr_matrix
    b0: np.ndarray
    Y_in: np.ndarray
    dirichlet_nodes: np.ndarray
    has_source: bool
    outlet_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    outlet_coeff: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_factorizations: int = 0
    n_solve_calls: int = 0
    n_rhs_solved: int = 0
    _lu: object = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_species(self) -> int:
        return self.b0.shape[0]

    def factorize(self):
        if self._lu is None:
            state = (
                f"n={self.n}, D={self.D:g}, velocity={self.velocity.name}, "
                f"{len(self.dirichlet_nodes)} Dirichlet nodes"
            )
            try:
                lu = spla.splu(self.A.tocsc())
            except RuntimeError as err:
                raise OperatorError(f"singular transport operator ({state}): {err}") from err
            pivots = np.abs(lu.U.diagonal())
            if pivots.min() <= self.n * np.finfo(float).eps * pivots.max():
                raise OperatorError(
                    f"singular transport operator ({state}): "
                    f"pivot ratio {pivots.min() / pivots.max():.2e}"
                )
            self._lu = lu
            self.n_factorizations += 1
        return self._lu

    def solve(self, rhs):
        """Solve ``A x = rhs`` with the cached LU factors.

        ``rhs`` may be a vector or an ``(n, m)`` block of right-hand sides.
        """
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, operator has {self.n}")
        lu = self.factorize()
        x = lu.solve(rhs)
        self.n_solve_calls += 1
        self.n_rhs_solved += 1 if rhs.ndim == 1 else rhs.shape[1]
        return x

    def x0(self):
        """Solution of the reaction-free problem, one row per species.

        Without a volume source and with constant inlet data the solution is
        the inlet value everywhere, so no solve is needed.
        """
        if not self.has_source:
            return np.repeat(self.Y_in[:, None], self.n, axis=1)
        return self.solve(self.b0.T).T

    def flux_vector(self, nodes, measure):
        """Right-hand side for unit outward flux density on the given portions."""
        b = np.zeros(self.n)
        np.add.at(b, nodes, -np.asarray(measure, dtype=float))
        b[self.dirichlet_nodes] = 0.0
        return b

    def boundary_fluxes(self, Y):
        """Total outward inlet and outlet fluxes of a nodal field ``Y``."""
        Y = np.asarray(Y, dtype=float)
        r = self.A_flux @ Y
        inlet = -np.sum(r[self.dirichlet_nodes])
        outlet = np.sum(self.outlet_coeff * Y[self.outlet_nodes])
        return inlet, outlet


def assemble(
    grid: ChannelGrid,
    velocity: VelocityField,
    D: float,
    Y_in,
    f: Callable | None = None,
) -> TransportOperator:
    """Assemble the drift-diffusion operator on a tagged grid.

    Parameters
    ----------
    grid : ChannelGrid
        Tagged grid. Inlet faces are Dirichlet, outlet faces carry the
        convective outflow, inert and catalytic faces are homogeneous Neumann
        for the linear operator.
    velocity : VelocityField
    D : float
        Common diffusion coefficient.
    Y_in : float or sequence
        Inlet value per species.
    f : callable, optional
        Source term ``f(x, y)`` returning one value per species (or a scalar
        broadcast to all species) at each point. Integrated with the
        midpoint rule over each box.
    """
    if D <= 0:
        raise ValueError("diffusion coefficient must be positive")
    if not grid.tagged:
        raise ValueError("grid must be tagged before assembly")
    Y_in = np.atleast_1d(np.asarray(Y_in, dtype=float))
    n = grid.n_nodes

    pairs, h, s, mid, normal = grid.interior_faces()
    vn = np.einsum("ij,ij->i", velocity(mid), normal)
    pe = vn * h / D
    t = s * D / h
    bm, bp = t * bernoulli(-pe), t * bernoulli(pe)
    K, L = pairs[:, 0], pairs[:, 1]
    rows = np.concatenate([K, K, L, L])
    cols = np.concatenate([K, L, K, L])
    vals = np.concatenate([bm, -bp, -bm, bp])

    onodes, olen, omid, onormal = grid.boundary_segments("outlet")
    ocoeff = olen * np.einsum("ij,ij->i", velocity(omid), onormal)
    rows = np.concatenate([rows, onodes])
    cols = np.concatenate([cols, onodes])
    vals = np.concatenate([vals, ocoeff])

    A_flux = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A_flux.sum_duplicates()

    dirichlet = grid.region_nodes("inlet")
    cat = grid.region_nodes("catalytic")
    if np.intersect1d(dirichlet, cat).size:
        raise ValueError("catalytic nodes must not coincide with Dirichlet nodes")

    keep = np.ones(n)
    keep[dirichlet] = 0.0
    A = sp.diags(keep) @ A_flux + sp.diags(1.0 - keep)
    A = sp.csc_matrix(A)
    A.eliminate_zeros()

    b0 = np.zeros((len(Y_in), n))
    if f is not None:
        vol = np.asarray(
            [np.broadcast_to(f(x, y), len(Y_in)) for x, y in grid.node_coords]
        ).T
        b0 += vol * grid.cell_measure
    b0[:, dirichlet] = Y_in[:, None]

    return TransportOperator(
        grid=grid,
        velocity=velocity,
        D=float(D),
        A=A,
        A_flux=A_flux,
        b0=b0,
        Y_in=Y_in,
        dirichlet_nodes=dirichlet,
        has_source=f is not None,
        outlet_nodes=onodes,
        outlet_coeff=ocoeff,
    )


def face_flux(s, h, D, vn, yk, yl):
    """Scharfetter-Gummel flux from K to L across a single face."""
    pe = vn * h / D
    return s * D / h * (bernoulli(-pe) * yk - bernoulli(pe) * yl)
