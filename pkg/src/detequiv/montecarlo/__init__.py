"""Monte Carlo sampling of the random matrix model and empirical spectra."""

from .empirical import (  # noqa: F401
    EIGEN_CAP,
    SVD_CAP,
    ComparisonReport,
    SpectrumSample,
    compare,
    eigenvalues,
    empirical_radial_cdf,
    empirical_stieltjes,
    sample_spectrum,
    singular_values,
)
from .kernels import KernelError, jacobi_svd, qr_eigenvalues  # noqa: F401
from .sampling import LAWS, EntryLaw, get_law, row_generator, sample_entries, sample_matrix  # noqa: F401
