"""fieldlab: classical random fields, their state images, and click statistics.

Core layers:

- :mod:`fieldlab.linops` -- dense Hermitian operator algebra and validation.
- :mod:`fieldlab.fieldsim` -- reproducible random-field ensembles and energies.
- :mod:`fieldlab.onticmap` -- covariance -> density-operator correspondence.
- :mod:`fieldlab.superpos` -- maximal component correlation and decoherence.
- :mod:`fieldlab.detect` -- Born readout and the threshold click race.
- :mod:`fieldlab.experiments` -- named end-to-end experiments with reports.

The FastAPI service in :mod:`fieldlab.service` exposes the same operations
over HTTP; the ``fieldlab`` CLI is a thin client for both.
"""

from . import detect, fieldsim, linops, onticmap, superpos

__version__ = "0.1.0"

__all__ = ["linops", "fieldsim", "onticmap", "superpos", "detect", "__version__"]
