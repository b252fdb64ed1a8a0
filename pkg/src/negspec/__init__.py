"""Eigenvalue-counting bounds for planar Schrodinger operators whose
potentials live on Ahlfors-regular measures, plus the numerical machinery
to stress-test them: Orlicz norm evaluation, measure generators, annular
decompositions, a finite-element negative-inertia oracle, and sharpness
experiments."""

__version__ = "0.1.0"
