import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

MAX_AMPLITUDE = 0.5


class ViewAxis(str, Enum):
    X = 'x'
    Y = 'y'
    Z = 'z'

    @property
    def index(self) -> int:
        return 'xyz'.index(self.value)


class ProjectionKind(str, Enum):
    ORTHOGRAPHIC = 'orthographic'
    PERSPECTIVE = 'perspective'


class RenderSpec(BaseModel):
    """Camera and image geometry of the synthetic projection.

    Depth is measured along `view_axis` from `near_mm` (brightest) to `far_mm` (black).
    The vertical half extent is `half_extent_mm`; the horizontal one scales by width/height.
    """
    model_config = ConfigDict(extra='forbid')

    height: int = Field(64, ge=1)
    width: int = Field(64, ge=1)
    view_axis: ViewAxis = ViewAxis.X
    half_extent_mm: float = Field(48.0, gt=0)
    near_mm: float = -50.0
    far_mm: float = 50.0
    projection: ProjectionKind = ProjectionKind.ORTHOGRAPHIC
    camera_distance_mm: float = Field(150.0, gt=0)

    @model_validator(mode='after')
    def near_before_far(self):
        if self.near_mm >= self.far_mm:
            raise ValueError('near_mm must be smaller than far_mm')
        return self


class ShapeCycleSpec(BaseModel):
    """A periodic deformation of an icosphere, sampled at `frames` phases.

    Amplitudes are bounded by 0.5 so every radial and axial factor stays positive.
    """
    model_config = ConfigDict(extra='forbid')

    subdivisions: int = Field(2, ge=0, le=5)
    radius_mm: float = Field(30.0, gt=0)
    frames: int = Field(20, ge=3, le=100)
    scale_amplitudes: tuple[float, float, float] = (0.0, 0.0, 0.25)
    bulge_amplitude: float = 0.1
    bulge_degree: int = Field(2, ge=1, le=6)
    bulge_axis: ViewAxis = ViewAxis.Z
    bulge_phase: float = math.pi / 2
    noise_mm: float = Field(0.0, ge=0)
    render: RenderSpec = RenderSpec()

    def amplitudes_within_bounds(self) -> bool:
        values = (*self.scale_amplitudes, self.bulge_amplitude)
        return all(0.0 <= a <= MAX_AMPLITUDE for a in values)
