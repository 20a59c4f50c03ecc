"""binum: distributed bilevel network utility maximization.

Learns per-user fairness parameters of surrogate utilities so that the
resulting network rate allocation maximizes hidden true utilities known only
through user feedback.  Upper level: projected parameter ascent driven by a
distributed hypergradient estimate; lower level: strongly concave rate
allocation solved by safeguarded gradient ascent.
"""

from ._backend import BACKEND
from .topology import Link, Network, TopologyError, User
from .functions import (FunctionError, FunctionSet, Regularizer,
                        SurrogateUtility, TrueUtility, psi_total)
from .lower import (LowerConfig, SolveCertificate, default_x0, phi_grad,
                    phi_hessian, phi_value, solve_lower,
                    solve_single_link_closed_form, strong_concavity_modulus)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Link", "Network", "TopologyError", "User",
    "FunctionError", "FunctionSet", "Regularizer", "SurrogateUtility",
    "TrueUtility", "psi_total",
    "LowerConfig", "SolveCertificate", "default_x0", "phi_grad",
    "phi_hessian", "phi_value", "solve_lower",
    "solve_single_link_closed_form", "strong_concavity_modulus",
    "__version__",
]
