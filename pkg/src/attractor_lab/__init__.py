"""Equilibria, spectra, connections and connection matrices of a nonlocal
Chafee-Infante problem, with a model flow on the disk for comparison."""

from .discretization import Field
from .equilibria import EquilibriumRecord, enumerate_equilibria, solve_nonlocal_equilibrium
from .errors import LabError
from .model import ConstantDiffusion, Cubic, ProblemSpec, SaturatingDiffusion, energy
from .spectrum import SpectrumReport, conley_index_dim, spectrum_of

__all__ = [
    "ConstantDiffusion", "Cubic", "EquilibriumRecord", "Field", "LabError", "ProblemSpec",
    "SaturatingDiffusion", "SpectrumReport", "conley_index_dim", "energy",
    "enumerate_equilibria", "solve_nonlocal_equilibrium", "spectrum_of",
]
