"""Lagrangian and Hamiltonian first-order field theories on Lie algebroids."""

from .algebroid import (LieAlgebroid, MorphismData, SectionField, StructureReport, bracket,
                        exterior_differential, morphism_residual, validate_structure_equations)
from .errors import (AfieldsError, BoundaryNode, DimensionError, InstabilityDetected, JacobiViolation,
                     NoConvergence, NotEvolutionary, SingularHessian, UnsupportedDegree)
from .grid import GridField, fd_jet, field_from_csv, field_to_csv, first_prolongation
from .hamiltonian import (HamiltonianSystem, hamilton_geometric_residual, hamilton_residual,
                          hamilton_residuals, integrate_hamilton_k1, liouville_sections,
                          solve_hamilton_section)
from .lagrangian import (LagrangianSystem, cartan_sections, energy, euler_lagrange_residual,
                         euler_lagrange_residuals, geometric_equation_residual, hessian,
                         solve_sopde_coefficients)
from .legendre import (LegendreMap, induced_hamiltonian, legendre_forward, legendre_invert,
                       pullback_check, solution_transport)
from .models import (atiyah_trivial, euler_poincare_lagrangian, harmonic_map_lagrangian,
                     lie_algebra_algebroid, lie_poisson_hamiltonian, load_model,
                     poisson_cotangent_algebroid, poisson_sigma_lagrangian, so3_algebroid,
                     standard_algebroid)
from .prolongation import (CoWhitneyPoint, ProlongedElement, Side, WhitneyPoint, liouville_section,
                           prolong, sopde_check, vertical_endomorphism, vertical_lift)
from .solver import ConvergenceReport, convergence_study, march_evolutionary

__all__ = [
    "AfieldsError", "atiyah_trivial", "BoundaryNode", "bracket", "cartan_sections", "convergence_study",
    "ConvergenceReport", "CoWhitneyPoint", "DimensionError", "energy", "euler_lagrange_residual",
    "euler_lagrange_residuals", "euler_poincare_lagrangian", "exterior_differential", "fd_jet",
    "field_from_csv", "field_to_csv", "first_prolongation", "geometric_equation_residual", "GridField",
    "hamilton_geometric_residual", "hamilton_residual", "hamilton_residuals", "HamiltonianSystem",
    "harmonic_map_lagrangian", "hessian", "induced_hamiltonian", "InstabilityDetected",
    "integrate_hamilton_k1", "JacobiViolation", "LagrangianSystem", "legendre_forward", "legendre_invert",
    "LegendreMap", "lie_algebra_algebroid", "lie_poisson_hamiltonian", "LieAlgebroid", "liouville_section",
    "liouville_sections", "load_model", "march_evolutionary", "morphism_residual", "MorphismData",
    "NoConvergence", "NotEvolutionary", "poisson_cotangent_algebroid", "poisson_sigma_lagrangian", "prolong",
    "ProlongedElement", "pullback_check", "SectionField", "Side", "SingularHessian", "so3_algebroid",
    "solution_transport", "solve_hamilton_section", "solve_sopde_coefficients", "sopde_check",
    "standard_algebroid", "StructureReport", "UnsupportedDegree", "validate_structure_equations",
    "vertical_endomorphism", "vertical_lift", "WhitneyPoint",
]
