"""Elliptic Dedekind sums over imaginary quadratic fields.

Martin's continued fractions, the Eisenstein series E_1 and E_2(0), the
Sczech homomorphism and density witnesses for the graph of normalized sums.
"""

__version__ = "0.1.0"
