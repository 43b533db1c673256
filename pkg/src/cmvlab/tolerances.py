"""Central numeric tolerances (double precision defaults).

Operations take these as keyword defaults so experiments can override them
through configuration without touching library code.
"""

# Unitarity defect allowed for assembled truncations, max |U*U - I| entry.
UNITARITY_TOL = 1e-12

# Agreement demanded between the phase solver and the dense eigensolver.
ORACLE_TOL = 1e-8

# Default bisection/Newton tolerance for eigenvalue angles (radians).
BISECTION_TOL = 1e-12

# Looser angle tolerance used by large Monte Carlo statistics runs, where
# angle errors rescale to n*tol and anything below 1e-4 is invisible.
STATS_ANGLE_TOL = 1e-7

# Guard for the Blaschke rotation denominators (cannot vanish for |a|<1).
ROTATION_DENOM_TOL = 1e-14

# Allowed slack in the total phase winding 2*pi*n over the full circle.
WINDING_TOL = 1e-6

# Adjacent SDE components may invert by at most this much before the path
# is declared a numerical failure (smaller inversions are clamped).
SDE_MONOTONE_TOL = 1e-9
