"""Fast matrix multiplication: bilinear recursion, group-algebra products,
roundoff-bound measurement and the linear algebra built on top of them."""

from .arith import QArray
from .bilinear import (BilinearAlgorithm, OpCounter, RecursionSchedule, SparsityProfile,
                       classical_algorithm, count_multiplications, emit_spec, get_algorithm,
                       multiply_nonstationary, multiply_stationary, parse_spec, read_spec,
                       strassen, validate)
from .errors import (DimensionError, FastMMError, InvalidAlgorithmError, RegimeError,
                     SingularMatrixError, SpecError, STPPViolation)
from .groups import (AbelianGroup, SymPerm, TripleCollection, WreathElement, WreathProduct,
                     fourier_wreath, inverse_fourier_wreath, orbit_representatives, stpp_check,
                     stpp_search, tpp_check)
from .linalg import determinant, get_multiplier, invert, lu_decompose, solve
from .matrix import (Matrix, NormKind, check_partition_condition, multiply_classical, norm,
                     parse_matrix, random_matrix, read_matrix, write_matrix)
from .rounding import RoundingContext, with_rounding
from .stability import (ErrorBoundReport, ExponentProblem, PrePostLevel, classical_mu,
                        measure_error, mu_for_algorithm, mu_nonstationary, mu_stationary,
                        omega_bound)
from .stpp import AbelianSTPFamily, fixture_family, load_family, multiply_stpp

__version__ = "0.1.0"
