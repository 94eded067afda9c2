"""macrocat: simulation and estimation toolkit for entangled
macroscopically displaced photon states.

Subpackages:

* :mod:`macrocat.fock` - truncated Fock-space states and operators
* :mod:`macrocat.counting` - closed-form photon-counting statistics
* :mod:`macrocat.sampling` - seeded Monte Carlo record generators
* :mod:`macrocat.tomography` - maximum-likelihood state reconstruction
* :mod:`macrocat.pipeline` - end-to-end experiment scenarios
* :mod:`macrocat.cli` - command-line front end
"""

__version__ = "0.1.0"

from .counting import CountModelParams
from .fock import DensityMatrix
from .pipeline import ExperimentConfig

__all__ = ["CountModelParams", "DensityMatrix", "ExperimentConfig", "__version__"]
