"""Manufactured cases, error functionals and benchmark drivers."""

from .cases import CASES, ManufacturedCase, make_case
from .eoc import eoc, loglog_slope
from .errors import error_F, error_Fstar, rho_squared, rhs_projection
