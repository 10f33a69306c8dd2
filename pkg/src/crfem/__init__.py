"""Crouzeix-Raviart finite elements for the p-Dirichlet problem.

Newton solver, Marini flux reconstruction, primal-dual error estimator and
adaptive refinement on 2D triangulations.
"""

from .afem import AfemConfig, AfemRecord, run_afem, run_uniform
from .duality import check_optimality, dual_energy, marini_reconstruct, primal_energy
from .estimator import EstimatorReport, eta_F, eta_local, osc
from .estimators import PDirichletCR
from .fespace import CrFunction, Rt0Function, S1Function, i_av
from .mesh import (Triangulation, build_lshape_mesh, build_square_mesh, doerfler_mark, red_refine,
                   rgb_refine, write_vtk)
from .nfun import PDelta
from .solver import NewtonConfig, NewtonReport, newton_solve, newton_solve_s1

__version__ = "0.1.0"
