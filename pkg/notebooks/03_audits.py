# %% [markdown]
# # Checking the analytic bounds numerically
#
# Every inequality used in the error analysis is evaluated on the
# discretized problem and compared with its right-hand side. A violation
# would point to a bug or to a wrong constant.

# %%
from collections import Counter

from fsplanewave import vt_potential
from fsplanewave.analysis import (
    bound_audit_suite,
    default_lambda_grid,
    random_fs_map_trials,
    random_perturbation_audits,
    schur_property_audits,
)
from fsplanewave.operators import FsParams

# %% [markdown]
# Isospectral reduction on random Hermitian matrices: every eigenvalue
# away from the complement spectrum is an eigenvalue of the reduced map,
# with matching multiplicity.

# %%
reports = random_fs_map_trials(100, seed=0)
print(sum(r.passed for r in reports), "of", len(reports), "trials pass")

# %% [markdown]
# Perturbation bounds for eigenvalues and eigenvectors on random 20×20
# instances. The ratio `lhs / rhs` shows how tight each bound is.

# %%
audits = random_perturbation_audits(200, seed=0)
worst = {}
for a in audits:
    if a.rhs > 0:
        worst[a.name] = max(worst.get(a.name, 0.0), a.lhs / a.rhs)
for name, ratio in sorted(worst.items()):
    print(f"{name:28s} max lhs/rhs = {ratio:.3f}")

# %% [markdown]
# Interaction bounds for t=1. For M=2 the series ratio exceeds one, so
# the bounds that assume a convergent series are skipped.

# %%
V = vt_potential(1.0)
for M in (2, 4):
    params = FsParams(M, 500, 4)
    grid = default_lambda_grid(params, V)
    audits, skipped = bound_audit_suite(params, V, grid, return_skipped=True)
    schur = schur_property_audits(M, 1000, V, grid)
    print(f"M={M}: {len(audits)} bounds, {sum(not a.satisfied for a in audits)} violated, "
          f"{len(skipped)} skipped; Schur checks violated: {sum(not a.satisfied for a in schur)}")
    print("   ", dict(Counter(a.name for a in audits)))
