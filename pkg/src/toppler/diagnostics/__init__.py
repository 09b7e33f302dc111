"""Functionals, kernels and random walk statistics."""

from .functionals import (EnergyReport, Unsupported, avg_level, check_energy_m2, check_trace,
                          energy, find_large_mass, second_moment)
from .kernel import (KernelRangeError, KernelTable, exact_diagonal, fit_kappa, harmonic_residual,
                     potential_kernel)
from .walks import (RwStats, closed_forms, exact_exit_time, mc_exit_time, mc_green_decay,
                    mc_speed)
