"""Collective decay spectra of dipole-coupled atomic arrays, a CNN regressor for them,
and integrated-gradients attribution of its predictions."""

from .attribution import AttributionMap, band_fraction, crossover_indices, integrated_gradients, magnitude_summary
from .eigen import ConvergenceError, EigenSpectrum, charpoly_oracle, decay_spectrum, eigenvalues_dense
from .kernel import (
    DipoleGeometry,
    GreensPair,
    InteractionKernel,
    KernelImage,
    build_kernel,
    noninteracting_baseline,
    pairwise_rates,
    to_image,
)

__version__ = "0.1.0"
