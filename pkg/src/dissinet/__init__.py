"""Stability certification and decentralized controller synthesis for
interconnected discrete-time dissipative systems."""

from .matrix_core import (
    DefinitenessVerdict,
    Inertia,
    block_diag,
    block_inverse_2x2,
    definiteness,
    eig_general,
    eig_sym,
    expm_with_integral,
    inertia,
    kron,
    pinv_sym_psd,
    schur_complement,
)
from .graph import (
    LaplacianBundle,
    WeightedGraph,
    barabasi_albert,
    extended_laplacian,
    is_connected,
    laplacian_bundle,
    laplacian_pinv,
    regularized_laplacian,
)
from .dissipativity import (
    DualSupplyRate,
    LinearNode,
    StorageCertificate,
    SupplyRate,
    check_R_necessary,
    detectability,
    dissipation_lmi_matrix,
    dualize_supply,
    passivity_lmi_matrix,
    primalize_supply,
    stabilizability,
    supply_eval,
    virtual_to_qsr,
)
from .lmi import (
    AffineMatrixExpr,
    BlockForm,
    LmiConstraint,
    LmiProblem,
    LmiSolution,
    MatrixVariable,
    SolveOptions,
    solve,
    verify,
)
from .network import (
    Interconnection,
    NetworkModel,
    NonlinearNode,
    assemble_closed_loop,
    build_H,
    comparison_conditions,
    decentralized_check,
    dual_decentralized_check,
    dual_global_condition,
    global_condition,
    qmi_nonempty_check,
    simulate,
    stability_report,
    storage_decrease_check,
)
from .synthesis import (
    SynthesisOptions,
    dual_control,
    joint_decentralized_synthesis,
    primal_control,
)
from .microgrid import (
    DguParams,
    MicrogridSpec,
    build_microgrid,
    ct_stepsize_bound,
    dgu_ct_matrices,
    euler_discretize,
    feasible_region_sample,
    run_pipeline,
    sample_params,
    zoh_discretize,
)

__version__ = "0.1.0"
