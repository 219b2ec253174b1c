"""
Greedy MRI Eigensolver

This package approximates the resolvent u(z) = T(z)^-1 v of a nonlinear
eigenproblem by adaptive minimal rational interpolation, then reads
eigenvalues off the surrogate poles and eigenvectors off the residues.
"""

__version__ = "1.0.0"
