"""Combinatorial and numerical tools for degenerating rational maps.

Submodules:
    lamination   exact angles, chords, pullback and the parallel test
    hypgeom      Poincare disk/ball geometry and marked spines
    blaschke     Blaschke products, schemes and circle markings
    treedyn      mapping schemes, tree maps and transition matrices
    treesphere   trees of Riemann spheres
    mating       Hubbard trees and the mateability criterion
    cli          command line front end
"""

from .errors import InputError, NumericalError, QpcfError

__all__ = ["InputError", "NumericalError", "QpcfError"]
__version__ = "0.1.0"
