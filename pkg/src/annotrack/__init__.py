"""annotrack: geospatial track annotation with a human-in-the-loop ML workflow.

The library layers are importable on their own:

- :mod:`annotrack.geo`: geodesy and kinematics primitives
- :mod:`annotrack.ingest`: user-defined format descriptors and parsing
- :mod:`annotrack.store`: annotation persistence (embedded and relational)
- :mod:`annotrack.pipeline`: runway detection, segmentation, features
- :mod:`annotrack.ml`: Kmeans bootstrap, linear SVM, evaluation
- :mod:`annotrack.workflow`: the annotate-infer-validate iteration
- :mod:`annotrack.synth`: synthetic truth-labeled traffic
- :mod:`annotrack.api`: HTTP service and command line
"""

from .errors import (
    AnnotrackError,
    NotFoundError,
    StorageError,
    UndefinedDirectionError,
    ValidationError,
    WorkflowLockError,
)
from .geo import GeoPoint, LocalFrame, Track, TrackPoint

__version__ = "0.1.0"

__all__ = [
    "AnnotrackError",
    "GeoPoint",
    "LocalFrame",
    "NotFoundError",
    "StorageError",
    "Track",
    "TrackPoint",
    "UndefinedDirectionError",
    "ValidationError",
    "WorkflowLockError",
    "__version__",
]
