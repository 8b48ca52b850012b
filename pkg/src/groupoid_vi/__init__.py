"""Variational integrators on pair, Lie-group and trivial-bundle groupoids.

The package builds the exact discrete Lagrangian of a regular continuous
Lagrangian by two-point shooting through a high-accuracy reference flow
and uses it as the ground truth for a catalogue of practical discrete
Lagrangians: value agreement fixes the discretization order, one-step
flow comparison fixes the integrator order, and the discrete Legendre
machinery supplies momenta, energies and Casimirs along trajectories.
"""

from . import cli, discrete, dynamics, errorlab, errors, exact, geometry, schemes
from .discrete import (DiscreteLagrangian, NewtonConfig, SimulationRecord,
                       del_residual, dlegendre_minus, dlegendre_plus, evolve,
                       hamiltonian_evolve, regularity_matrix, simulate)
from .dynamics import (FlowConfig, LagrangianSystem, Trajectory, el_vector_field,
                       energy, flow, free_particle, groupoid_reconstruction,
                       hamiltonian_flow, harmonic_oscillator,
                       heavy_top_trivial_bundle, legendre, legendre_inverse,
                       quadratic_pair_system, rigid_body)
from .errorlab import (ConservationReport, OrderReport, conservation_report,
                       dl_order, flow_order, probes_from_states,
                       psi_reduction_check, symplecticity_defect,
                       theorem51_check, theorem55_check)
from .exact import (ConvexityCertificate, ShootingConfig, action_integral,
                    as_discrete_lagrangian, certify_h0,
                    exact_discrete_lagrangian, exact_dlegendre_minus,
                    exact_dlegendre_plus, exponential_map,
                    reconstruction_shooting, retraction_minus, retraction_plus)
from .geometry import (AlgebroidVector, GroupoidElement, Instance, MatrixGroup,
                       Momentum, PairEuclidean, TrivialBundle, algebra_vector,
                       alpha, beta, bracket, bundle_arrow, bundle_vector,
                       chart_coords, coad, compose, dexp_left, dexpinv_left,
                       dtau_left, group_arrow, group_exp, group_log,
                       identity_at, inverse, pair_arrow, so3, tangent)
from .schemes import (ButcherTable, MIDPOINT_TABLE, SchemeSpec,
                      affine_tau_matrix, bundle_product,
                      default_matrix_extension, midpoint_pair, rk_variational,
                      rkmk_variational, symmetrized, symmetrized_affine,
                      tau_alpha_group)

__version__ = "0.1.0"
