"""Transition kernels, one- and two-time laws, and n-time chains of the renewal Markov pair."""

from .chain import (FddChain, UnitPotential, age_convolution, compose_p_example1, compose_p_example2,
                    compose_q_example1, compose_q_example2, example1_two_time_cells, fdd_chain)
from .kernels import inverse_subordinator_law, joint_xyvr, levy_bar, levy_phi, p_kernel, q_kernel, stable_g
from .laws import (Atom, DensityPart, JointGrid, KernelDensity, MassReport, StateXV, StateYR,
                   marginal_density, mass_report, moments, total_mass)
from .two_time import TwoTimeLaw, joint_inverse_two_times

__all__ = [
    "Atom", "DensityPart", "FddChain", "JointGrid", "KernelDensity", "MassReport", "StateXV", "StateYR",
    "TwoTimeLaw", "UnitPotential", "age_convolution", "compose_p_example1", "compose_p_example2",
    "compose_q_example1", "compose_q_example2", "example1_two_time_cells", "fdd_chain",
    "inverse_subordinator_law", "joint_inverse_two_times", "joint_xyvr", "levy_bar", "levy_phi", "marginal_density", "mass_report",
    "moments", "p_kernel", "q_kernel", "stable_g", "total_mass",
]
