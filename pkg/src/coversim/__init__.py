"""Angle-aware multi-drone coverage control with CBF-QP controllers."""

from .cbf_controller import ControllerParams, compute_control, solve_qp
from .config import ScenarioConfig, dump_config, load_config, parse_config
from .coverage_dynamics import FleetState, PerfParams, performance, voronoi_assign
from .field_model import GroundGrid, MappingParams, VirtualField, VirtualPoint, compress, discretize, project
from .sim_engine import SimLog, run, simulate

__version__ = "0.1.0"
