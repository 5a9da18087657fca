"""Time-optimal path parameterization for cooperating manipulators.

The coupled robot-object dynamics are reduced to the path coordinate ``s`` and
the minimum-time problem in ``(a, b) = (s'', s'^2)`` is solved as a
second-order cone program, with rigid grasps, frictional grasps carrying
internal forces, or a fixed wrench-distribution rule.
"""

from .conic import ConicProgram, SolveReport, SolverSettings, solve
from .errors import (AuditError, ConfigError, CoopToppError, GraspError, InfeasibleError,
                     KinematicsError, ModelError, SolverError)
from .grasp import ContactModel
from .manipulators import build_model, planar_3r, prismatic_carriage, stanford_arm
from .oracles import (bang_bang_pointmass_oracle, constraint_audit, dp_velocity_profile_oracle,
                      single_dof_reduction)
from .paths import PathGrid, catalog_path, linear_path, polynomial_path, sweep_inverse_kinematics
from .rigid import GraspOffset, RigidObjectModel
from .scenario import (ScenarioConfig, __version__, bench, compare, load_scenario, prepare, run,
                       run_scenario, solve_prepared)
from .transcription import (active_constraint_report, assemble_coefficients, build_program,
                            recover_trajectory, solve_program)
