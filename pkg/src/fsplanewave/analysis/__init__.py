"""Error metrics, sweeps, rate fits and bound audits."""

from .audits import (
    BoundAudit,
    FsMapReport,
    SkippedAudit,
    bound_audit_suite,
    default_lambda_grid,
    fs_map_check,
    gap_transfer_audit,
    perturbation_audit,
    random_fs_map_trials,
    random_perturbation_audits,
    relative_form_norm,
    schur_property_audits,
    weighted_norm,
)
from .errors import ErrorRecord, compute_errors, epsilon_bound, triangle_decomposition
from .sweep import (
    CSV_COLUMNS,
    empirical_m0,
    fit_rate,
    pre_knee_mask,
    read_csv,
    records_to_csv,
    solve_point,
    stagnation_floor,
    sweep,
    sweep_rate,
    write_csv,
)
