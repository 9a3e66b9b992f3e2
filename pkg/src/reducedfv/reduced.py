"""Reduced boundary basis: offline Green's-like traces and online collocation.

Offline, every catalytic node K gets a basis field ``x_K`` solving
``A x_K = b_K`` where ``b_K`` prescribes unit outward flux density on the
catalytic portion of box K. Only the traces ``G[L, K] = x_K[L]`` at the
catalytic nodes are kept.

Online, the coefficients ``alpha`` solve

    alpha_L = R(Y0(x_L) + (-nu) * sum_K alpha_K G[L, K])

for every catalytic node L. One coefficient per node serves all species;
species values follow from the stoichiometric scaling.
"""
from __future__ import annotations

import dataclasses
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .kinetics import ReactionModel
from .mesh import CatalyticIndex, ChannelGrid
from .operator import TransportOperator

_CHUNK = 32


class ConvergenceError(RuntimeError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class ReducedBasis:
    """Boundary traces of the reduced basis.

    ``G`` has one row per catalytic node and one column per basis function.
    Without compression the basis functions are the single-node ones and
    ``G`` is square. ``membership[L, g]`` is 1 when node L belongs to group g.
    """

    G: np.ndarray
    y0_trace: np.ndarray
    sigma: np.ndarray
    nodes: np.ndarray
    membership: np.ndarray
    x0: np.ndarray | None = None
    fields: np.ndarray | None = None
    offline_time: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_basis(self) -> int:
        return self.G.shape[1]

    @property
    def n_species(self) -> int:
        return self.y0_trace.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """Measure-weighted group averaging, shape ``(n_basis, n_nodes)``."""
        w = self.membership.T * self.sigma
        return w / w.sum(axis=1, keepdims=True)

    @property
    def compressed(self) -> bool:
        return self.n_basis != self.n_nodes


@dataclass
class ReducedSolution:
    alpha: np.ndarray
    boundary_trace: np.ndarray
    newton_iters: int
    residual_norm: float
    online_time: float
    history: list = field(default_factory=list)
    negative_state: bool = False
    continuation: bool = False


def offline(op: TransportOperator, grid: ChannelGrid, cat: CatalyticIndex, keep_fields=False):
    """Compute the reaction-free solution and the traces of all basis fields."""
    t0 = time.perf_counter()
    nodes = np.asarray(cat.nodes)
    m = len(nodes)
    x0 = op.x0()
    G = np.empty((m, m))
    fields = np.empty((op.n, m)) if keep_fields else None
    for start in range(0, m, _CHUNK):
        cols = range(start, min(start + _CHUNK, m))
        B = np.column_stack([op.flux_vector([nodes[c]], [cat.sigma[c]]) for c in cols])
        try:
            X = op.solve(B)
        except Exception as err:
            raise RuntimeError(
                f"basis solve failed for basis indices {cols.start}..{cols.stop - 1}"
            ) from err
        G[:, cols.start : cols.stop] = X[nodes]
        if keep_fields:
            fields[:, cols.start : cols.stop] = X
    elapsed = time.perf_counter() - t0
    return ReducedBasis(
        G=G,
        y0_trace=x0[:, nodes].copy(),
        sigma=np.asarray(cat.sigma, dtype=float).copy(),
        nodes=nodes.copy(),
        membership=np.eye(m),
        x0=x0,
        fields=fields,
        offline_time=elapsed,
        meta=dict(level=grid.level, D=op.D, velocity=op.velocity.name),
    )


def compress(basis: ReducedBasis, groups) -> ReducedBasis:
    """Merge basis functions over a partition of the catalytic nodes.

    ``groups`` is a sequence of sequences of positions ``0 .. n_nodes - 1``
    (positions in ``basis.nodes``, not grid node indices).
    """
    if basis.compressed:
        raise ValueError("basis is already compressed")
    m = basis.n_nodes
    members = [np.asarray(g, dtype=int) for g in groups]
    flat = np.concatenate(members) if members else np.zeros(0, int)
    if any(len(g) == 0 for g in members) or len(flat) != m or set(flat.tolist()) != set(range(m)):
        raise ValueError(f"groups must partition the {m} catalytic nodes")
    M = np.zeros((m, len(members)))
    for g, idx in enumerate(members):
        M[idx, g] = 1.0
    return dataclasses.replace(basis, G=basis.G @ M, membership=M, fields=None)


def contiguous_groups(n_nodes: int, n_groups: int):
    """Split positions ``0..n_nodes-1`` into ``n_groups`` contiguous runs."""
    if not 1 <= n_groups <= n_nodes:
        raise ValueError(f"need 1 <= n_groups <= {n_nodes}")
    return [a.tolist() for a in np.array_split(np.arange(n_nodes), n_groups)]


def boundary_values(basis: ReducedBasis, model: ReactionModel, alpha):
    """Species values at the catalytic nodes for coefficients ``alpha``."""
    return basis.y0_trace + model.flux_sign[:, None] * (basis.G @ alpha)[None, :]


def residual(basis: ReducedBasis, model: ReactionModel, alpha):
    Y = boundary_values(basis, model, alpha)
    return alpha - basis.weights @ model.rate(Y)


def jacobian(basis: ReducedBasis, model: ReactionModel, alpha):
    Y = boundary_values(basis, model, alpha)
    # d rate_L / d alpha_M = sum_s dR/dY_s(L) * (-nu_s) * G[L, M]
    dR = model.flux_sign @ model.rate_grad(Y)
    return np.eye(basis.n_basis) - basis.weights @ (dR[:, None] * basis.G)


def newton(fun, jac, x0, ftol=1e-11, max_iters=200, armijo=1e-4, max_halvings=30):
    """Newton iteration with backtracking on ``|F|^2``.

    Returns ``(x, iterations, residual_max_norm, history)``; the iteration
    count includes the final pass that detects convergence.
    """
    x = np.array(x0, dtype=float)
    history = []
    F = fun(x)
    for it in range(1, max_iters + 1):
        nrm = float(np.max(np.abs(F))) if F.size else 0.0
        history.append(nrm)
        if nrm <= ftol:
            return x, it, nrm, history
        if not np.isfinite(nrm):
            break
        d = np.linalg.solve(jac(x), -F)
        phi = F @ F
        lam = 1.0
        for _ in range(max_halvings):
            Fn = fun(x + lam * d)
            if Fn @ Fn <= (1.0 - 2.0 * armijo * lam) * phi:
                break
            lam *= 0.5
        x = x + lam * d
        F = Fn
    raise ConvergenceError(
        f"Newton did not reach ftol={ftol:g} in {max_iters} iterations "
        f"(last residual {history[-1]:.3e})",
        history,
    )


def online(
    basis: ReducedBasis,
    model: ReactionModel,
    ftol: float = 1e-11,
    max_iters: int = 200,
    continuation: bool = True,
    alpha0=None,
) -> ReducedSolution:
    """Solve the boundary collocation system for the basis coefficients."""
    if model.n_species != basis.n_species:
        raise ValueError(
            f"model has {model.n_species} species, basis has {basis.n_species}"
        )
    t0 = time.perf_counter()
    start = np.zeros(basis.n_basis) if alpha0 is None else np.asarray(alpha0, float)

    def run(mdl, a0):
        return newton(
            lambda a: residual(basis, mdl, a),
            lambda a: jacobian(basis, mdl, a),
            a0,
            ftol=ftol,
            max_iters=max_iters,
        )

    used_continuation = False
    try:
        alpha, iters, nrm, history = run(model, start)
    except ConvergenceError:
        if not continuation or model.k == 0:
            raise
        used_continuation = True
        alpha, iters, history = start, 0, []
        for kk in (model.k / 100, model.k / 10, model.k):
            alpha, n_it, nrm, h = run(model.with_k(kk), alpha)
            iters += n_it
            history += h

    Y = boundary_values(basis, model, alpha)
    return ReducedSolution(
        alpha=alpha,
        boundary_trace=Y,
        newton_iters=iters,
        residual_norm=nrm,
        online_time=time.perf_counter() - t0,
        history=history,
        negative_state=bool(np.any(Y < -ftol)),
        continuation=used_continuation,
    )


def reconstruct(op: TransportOperator, basis: ReducedBasis, sol: ReducedSolution, model: ReactionModel):
    """Full nodal fields, shape ``(n_species, n)``, from one linear solve."""
    coef = basis.membership @ sol.alpha
    b = op.flux_vector(basis.nodes, basis.sigma * coef)
    z = op.solve(b)
    x0 = basis.x0 if basis.x0 is not None else op.x0()
    return x0 + model.flux_sign[:, None] * z[None, :]


_SECTIONS = ("nodes", "sigma", "membership", "y0_trace", "G")


def save_basis(basis: ReducedBasis, path, **header):
    """Write the boundary part of a basis as a sectioned CSV text file."""
    head = dict(
        level=basis.meta.get("level"),
        n_catalytic=basis.n_nodes,
        n_basis=basis.n_basis,
        n_species=basis.n_species,
        D=basis.meta.get("D"),
    )
    head.update(header)
    with open(path, "w") as fh:
        fh.write("# reducedfv basis v1\n")
        for key, val in head.items():
            fh.write(f"{key}={val}\n")
        for name in _SECTIONS:
            arr = np.atleast_2d(getattr(basis, name))
            fh.write(f"[{name}]\n")
            np.savetxt(fh, arr, delimiter=",", fmt="%.17g")


def load_basis(path) -> ReducedBasis:
    header, sections, current = {}, {}, None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("["):
                current = line[1:-1]
                sections[current] = []
            elif current is None:
                key, _, val = line.partition("=")
                header[key] = val
            else:
                sections[current].append(line)
    arrays = {
        name: np.loadtxt(io.StringIO("\n".join(rows)), delimiter=",", ndmin=2)
        for name, rows in sections.items()
    }
    meta = {k: _parse(v) for k, v in header.items()}
    return ReducedBasis(
        G=arrays["G"],
        y0_trace=arrays["y0_trace"],
        sigma=arrays["sigma"].ravel(),
        nodes=arrays["nodes"].ravel().astype(int),
        membership=arrays["membership"],
        meta=meta,
    )


def _parse(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return None if text == "None" else text
