"""Cloud-guided building evacuation simulator.

Evacuees carrying smartphones are routed to exits by a cognitive packet
network (CPN) route service, optionally held together in loose groups by
social potential fields, and upload their localization data either over 3G
or through an energy-aware ad-hoc relay protocol.
"""

from evacnav.building import BuildingGraph, load_building, load_building_file
from evacnav.sim import RunMetrics, SimConfig, run

__all__ = [
    "BuildingGraph",
    "RunMetrics",
    "SimConfig",
    "load_building",
    "load_building_file",
    "run",
]
