"""GL(n)-invariant dynamics of frame fields: torsion, concomitants, residuals and exact solutions."""
from .chart import ChartPoint, DiffConfig, ProbeSet, load_probes, random_probes
from .errors import TetradError
from .frame import FrameField, gl_transform, torsion
from .kernels import BACKEND
from .lagrangians import LagrangianSpec

__all__ = ["BACKEND", "ChartPoint", "DiffConfig", "FrameField", "LagrangianSpec", "ProbeSet",
           "TetradError", "gl_transform", "load_probes", "random_probes", "torsion"]
__version__ = "0.1.0"
