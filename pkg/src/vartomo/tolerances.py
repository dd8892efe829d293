"""Central table of numerical tolerances.

Every module pulls its thresholds from here so that tuning happens in
exactly one place.
"""

# Hermitian construction: entrywise symmetry after (M + M^dag)/2.
HERMITIAN_CONSTRUCT = 1e-12
# Reject inputs whose anti-Hermitian part exceeds this in max-norm.
HERMITIAN_REJECT = 1e-8

# Eigendecomposition reconstruction error, scaled by matrix dimension.
EIG_RECONSTRUCT = 1e-10

# PSD checks: eigenvalues above this floor are clamped to zero ...
PSD_CLAMP = -1e-10
# ... below this the matrix is rejected as not PSD.
PSD_REJECT = -1e-8

# svec/smat roundtrip and Hilbert-Schmidt inner-product agreement.
VEC_ROUNDTRIP = 1e-14
VEC_HS_MATCH = 1e-12

# Operator-basis completeness and orthogonality.
BASIS_COMPLETENESS = 1e-10
BASIS_ORTHOGONALITY = 1e-10

# Effect sets: resolution of identity.
EFFECT_RESOLUTION = 1e-9

# Trace-preservation defect threshold.
TRACE_PRESERVING = 1e-8

# Relative eigenvalue cutoff when counting the rank of a process matrix.
CHI_RANK_REL = 1e-7

# Default solver tolerance (normalized primal/dual residuals).
SOLVER_TOL = 1e-7
