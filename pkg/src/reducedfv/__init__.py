"""Reduced boundary basis solver for drift-diffusion with reactive walls."""
from .kinetics import ReactionModel, boundary_flux, make_model, mass_action, mass_action_co_oxidation
from .mesh import CatalyticIndex, ChannelGrid, build_grid, catalytic_index, channel, tag_boundary
from .operator import TransportOperator, VelocityField, assemble, bernoulli, hagen_poiseuille
from .reduced import ReducedBasis, ReducedSolution, compress, offline, online, reconstruct
from .reference import GlobalSolution, global_solve

__all__ = [
    "CatalyticIndex", "ChannelGrid", "GlobalSolution", "ReactionModel", "ReducedBasis",
    "ReducedSolution", "TransportOperator", "VelocityField", "assemble", "bernoulli",
    "boundary_flux", "build_grid", "catalytic_index", "channel", "compress", "global_solve",
    "hagen_poiseuille", "make_model", "mass_action", "mass_action_co_oxidation", "offline",
    "online", "reconstruct", "tag_boundary",
]
