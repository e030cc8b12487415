"""Face-to-face evacuation of k robots from a unit triangle or square."""
import json
from importlib import resources

from .geometry import Point, Shape, dist, make_shape
from .trajectory import Trajectory, first_visit
from .protocols import (
    Protocol,
    ProtocolError,
    build,
    build_early_meeting,
    build_equal_travel,
    build_square_detour,
    build_triangle_detour1,
    build_triangle_detour2,
)
from .simulator import evac_times, evacuate
from .analysis import critical_times_square, lower_bound_floor, worst_case

__version__ = "0.1.0"


def load_schema(name: str) -> dict:
    """Shipped JSON schema by stem, e.g. ``load_schema("worstcase_report")``."""
    path = resources.files(__name__) / "schemas" / f"{name}.schema.json"
    return json.loads(path.read_text())
