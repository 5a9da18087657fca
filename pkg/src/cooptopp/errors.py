"""Exception hierarchy.

Every error carries the pipeline stage it was raised from and the process exit
code the command-line front end maps it to.
"""


class CoopToppError(Exception):
    stage = "pipeline"
    exit_code = 1


class ConfigError(CoopToppError):
    stage = "config"
    exit_code = 2


class ModelError(CoopToppError):
    stage = "model"
    exit_code = 2


class KinematicsError(CoopToppError):
    stage = "IK"
    exit_code = 3


class EulerSingularityError(KinematicsError):
    stage = "coefficients"

    def __init__(self, message, s=None):
        super().__init__(message)
        self.s = s


class GraspError(CoopToppError):
    stage = "build"
    exit_code = 4


class InfeasibleError(CoopToppError):
    stage = "build"
    exit_code = 4

    def __init__(self, message, node=None, s=None):
        super().__init__(message)
        self.node = node
        self.s = s


class SolverError(CoopToppError):
    stage = "solve"
    exit_code = 5

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AuditError(CoopToppError):
    stage = "audit"
    exit_code = 6
