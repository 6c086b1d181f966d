"""Fault-tolerant nested GMRES with a Hessenberg-bound SDC detector."""

from .flexible import (GmresInner, SolveReport, Trichotomy, fgmres_solve, ftgmres_solve,
                       identity_inner)
from .gmres import GmresConfig, GmresOutcome, KrylovState, Status, gmres_solve, reconstruct_solution
from .hessenberg import HessenbergFactor, LsqMode, LsqPolicy, RankReport
from .mmio import read_matrix_market, write_matrix_market
from .sdc import (DetectorAction, DetectorConfig, DetectorEvent, FaultClass, FaultInjector, FaultSpec,
                  Location, MgsPosition, check)
from .sparse import (SparseMatrix, frobenius_norm, gen_poisson, identity, matrix_info,
                     random_sparse, spmv, two_norm_estimate)

__all__ = [
    "DetectorAction", "DetectorConfig", "DetectorEvent", "FaultClass", "FaultInjector", "FaultSpec",
    "GmresConfig", "GmresInner", "GmresOutcome", "HessenbergFactor", "KrylovState", "Location",
    "LsqMode", "LsqPolicy", "MgsPosition", "RankReport", "SolveReport", "SparseMatrix", "Status",
    "Trichotomy", "check", "fgmres_solve", "frobenius_norm", "ftgmres_solve", "gen_poisson",
    "gmres_solve", "identity", "identity_inner", "matrix_info", "random_sparse", "read_matrix_market",
    "reconstruct_solution", "spmv", "two_norm_estimate", "write_matrix_market",
]
