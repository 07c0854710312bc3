"""Numerical solution of the BCS gap equation with a non-constant kernel."""
from .errors import (BCSGapError, ConfigError, ConvergenceError, DomainError, IntegrationError,
                     InvariantViolation, ParameterError, StencilError)
from .model import (ConstantDOS, ConstantKernel, EnergyGrid, FreeElectronDOS, PhysicalParams,
                    SeparableKernel, TabulatedDOS, TabulatedKernel, ZeroDOS, validate_kernel)
from .simplified import (SimplifiedSolution, coupling_for_tc, delta0_closed_form, simplified_rhs,
                         solve_simplified, transition_temperature)
from .solver import (GapProblem, GapSolution, GapSurface, SolverOptions, critical_temperature,
                     locate_tc, solve_fixed_point, sweep_temperature, uniqueness_probe)
from .thermo import ThermoContext, entropy_and_cv, omega_n, psi, thermo_curve
from .critical import analyze_jump, delta_cv, estimate_limits, g_function

__version__ = "0.1.0"
