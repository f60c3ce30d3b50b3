"""
Implicit RCIS: robust controlled invariant sets from Mealy-machine controllers

This package contains the polytope and LP core, the plant pipeline
(prefeedback and one-step-delay lift), controller machines with their
dominance analysis, the implicit invariant set, the fixed-point oracle,
the QP supervisor and the command line.

Modules import each other by name; put src/ on sys.path (the tests and
scripts do this) rather than importing the package.

Author: Implicit RCIS Research Team
"""

__version__ = "0.3.0"
__author__ = "Implicit RCIS Research Team"

__all__ = [
    "rcis_errors",
    "lp_solver",
    "polytope",
    "linear_system",
    "mealy_machine",
    "implicit_rcis",
    "maximal_rcis_oracle",
    "qp_solver",
    "supervisor",
    "run_config",
    "experiment_logger",
    "rcis_cli",
]
