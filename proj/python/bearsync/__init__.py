"""Joint clock offset and relative pose estimation from bearings and odometry."""

import json

from ._bearsync import (
    Error,
    ParseError,
    Trajectory,
    __version__,
    config_hash,
    constraints,
    lift,
    load_bearings,
    presets,
    save_bearings,
    simulate,
    solve_sdp,
    sweep,
)
from ._bearsync import estimate_json as _estimate_json


def estimate(observer, observed, bearing_t, bearing_directions, method="nto", settings=None):
    """Run one estimator and return its report as a dict.

    ``method`` is one of "baseline", "nto" or "ito". ``settings`` takes the
    same keys as a CLI config file, with string values.
    """
    text = _estimate_json(method, observer, observed, bearing_t, bearing_directions,
                          settings or {})
    return json.loads(text)


__all__ = [
    "Error",
    "ParseError",
    "Trajectory",
    "__version__",
    "config_hash",
    "constraints",
    "estimate",
    "lift",
    "load_bearings",
    "presets",
    "save_bearings",
    "simulate",
    "solve_sdp",
    "sweep",
]
