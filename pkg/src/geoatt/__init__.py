"""Geodesic attitude feedback on SO(n).

Feedback law and closed loop (:mod:`geoatt.feedback`), structure-preserving
integrators (:mod:`geoatt.integrate`), closed-form solutions
(:mod:`geoatt.exact`) and stability analytics (:mod:`geoatt.analysis`),
on top of small dense linear algebra (:mod:`geoatt.linalg`,
:mod:`geoatt.eig`).
"""

from .analysis import (
    BasinReport,
    EquilibriumClass,
    classify_equilibrium,
    geodesic_deviation,
    kernel_dimension,
    linearization_matrix,
    monte_carlo_basin,
    predicted_identity_spectrum,
    unstable_count,
)
from .eig import spectrum
from .errors import *  # noqa: F401,F403
from .exact import So3ExactSolution, exact_H, exact_params, exact_r11, exact_r21, exact_traces, reconstruct_R, verify_block_relations
from .feedback import closed_loop_rhs, control_effort, control_U, lyapunov, reduced_rhs
from .integrate import SimulationSpec, SphereTrajectory, Trajectory, propagate, simulate, simulate_reduced, step
from .linalg import (
    ProjectionPair,
    check_prp_lemma,
    complex_atanh,
    exp_skew,
    expm,
    haar_sample,
    hyperbolic_Pt,
    in_negative_spectrum_set,
    validate_rotation,
)

__version__ = "0.1.0"
