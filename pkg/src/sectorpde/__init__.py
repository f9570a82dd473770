"""Finite elements for -Lap u = W e^{-u} on sectors, disks and polygons.

Modules: geometry (meshes), discretization (P1 operators), nonlinear_solve
(Newton and monotone iteration), singular (corner coefficients), oracles
(closed forms and the radial ODE), conformal (split-plane supersolution),
sector_study, plasma, io, config and cli.
"""

from .errors import (AssemblyError, DivergedError, DomainError, EvaluationError, FitError,
                     InternalError, InvalidSpecError, MapSingularityError, OracleError,
                     PreconditionError, SectorPDEError, SingularEvaluationError, UnsupportedError)
from .geometry import (DIRICHLET, NEUMANN, CornerGeometry, DiskSpec, Mesh, PolygonSpec, SectorSpec,
                       lshape, mesh_disk, mesh_disk_mixed, mesh_polygon, mesh_sector, unit_square)
from .discretization import Field, Operator, assemble_operator, energy_functional, interpolate_field
from .nonlinear_solve import SolveOptions, SolveReport, monotone_iterate, solve_semilinear

__version__ = "0.1.0"
