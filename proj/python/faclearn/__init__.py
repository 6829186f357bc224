"""Factorized linear algebra and learning over data-integration metadata."""

from ._core import (  # noqa: F401
    ConfigError,
    DivergenceError,
    FactorizedTable,
    GenSpec,
    JoinType,
    Model,
    OpTrace,
    ShapeError,
    SparseMatrix,
    TargetHandle,
    TrainConfig,
    TrainResult,
    ValidationError,
    col_sum,
    feature_names,
    features,
    generate,
    linreg_gradient,
    lmm,
    load_dataset,
    materialize,
    model_cost,
    read_matrix,
    redundancy_stats,
    rmm,
    row_sum,
    scale,
    spmm,
    square,
    stable_learning_rate,
    train,
    transpose,
    transpose_lmm,
    validate,
    write_matrix,
)
