"""Numerical tolerances shared across modules."""

# probability vectors and joint distributions must sum to 1 within this
PROB_TOL = 1e-12
# prefixes with marginal mass at or below this impose no constraint
SUPPORT_TOL = 1e-12
# conditional rows sharing an info label must agree within this
ROW_TOL = 1e-9
# entrywise hermiticity / completeness / trace, and eigenvalue floor
MATRIX_TOL = 1e-10
# imaginary residue allowed in Born-rule probabilities
IMAG_TOL = 1e-10
# default max-abs tolerance for model verification
VERIFY_TOL = 1e-10
# additive smoothing applied to both arguments of the KL divergence
KL_EPS = 1e-12
