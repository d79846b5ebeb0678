"""Koopman representations of graph groupoids, computed exactly on cylinder spaces."""

__version__ = "0.1.0"

from .errors import DegenerateInputError, DomainError, InputError, KoopmanError, ResourceError, SpecificationError
from .graph import (
    CONVENTION_NOTE,
    DirectedGraph,
    FiniteGroup,
    cuntz_graph,
    is_hereditary,
    is_saturated,
    satisfies_condition_K,
    saturated_hereditary_lattice,
    skew_product,
    skew_quotient,
    validate_graph,
)
from .pathspace import Path, paths_of_length, refine, shift
from .groupoid import (
    AlgebraElement,
    BisectionSymbol,
    UnitSpaceAction,
    adjoint,
    cayley_ball,
    convolve,
    edge_symbol,
    lift_shift,
    multiply,
    symbol,
    vertex_symbol,
)
from .measures import (
    MarkovWeights,
    SelfSimilarWeights,
    TransferSpec,
    cylinder_measure,
    edge_cocycle,
    hausdorff_dimension,
    is_transfer_fixed,
    kms_inverse_temperature,
    markov_potential,
    radon_nikodym,
)
from .sparse import SparseRationalMatrix
from .koopman import (
    CylinderBasis,
    KoopmanMatrix,
    compare_norms,
    kernel_ideal,
    koopman_matrix,
    operator_norm,
    regular_matrix,
    verify_cuntz_krieger,
)
from .fractafold import FractafoldAction, FractafoldCell, IFSSpec, fractafold_isometry, mu_infinity, verify_on_fractafold
