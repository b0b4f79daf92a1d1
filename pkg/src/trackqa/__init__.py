"""trackqa: audit, correct and extrapolate bounding-box annotations in
video tracking sequences via canonical-view registration and trajectory
smoothing."""

__version__ = "0.1.0"

from .annotate import BBox, CanonicalTrajectory, Trajectory  # noqa: F401
from .homography import Homography, RansacConfig  # noqa: F401
from .raster import GrayImage  # noqa: F401
from .smooth import Series, SmootherSpec  # noqa: F401
