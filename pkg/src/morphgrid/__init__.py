"""Forward design of 4D-printed self-morphing bi-layer grid structures.

Workflow: ingest DMA exports (:mod:`.dma`), calibrate material cards
(:mod:`.materials`), identify the printed-in residual stress by shooting
(:mod:`.shooter`), assemble and mesh grid designs (:mod:`.grid`,
:mod:`.unit`), simulate triggering in two stages (:mod:`.sim`), and verify
against measured point pairs (:mod:`.accuracy`).  The CLI and HTTP service
live in :mod:`.workbench`.
"""

from .errors import InputError, MorphGridError, NumericalError  # noqa: F401
from .dma import (  # noqa: F401
    CurveKind,
    DmaCurve,
    FrequencySweep,
    SmootherConfig,
    parse_dma_csv,
    segment_cycles,
    smooth_pspline,
)
from .materials import (  # noqa: F401
    MaterialCard,
    calibrate_card,
    load_material_card,
    recoverable_strain,
    save_material_card,
)
from .grid import (  # noqa: F401
    BendingUnitSpec,
    GridDesign,
    GridMember,
    GridNode,
    JointSpec,
    MemberKind,
    MeshConfig,
    load_design,
    mesh_design,
    save_design,
)
from .unit import LayeredSection, end_distance, section_response, unit_shape  # noqa: F401
from .shooter import (  # noqa: F401
    ShooterConfig,
    ShooterResult,
    TriggeringObservation,
    shoot_residual_stress,
)
from .accuracy import (  # noqa: F401
    AccuracyReport,
    PointPair,
    build_report,
    confidence_interval,
    pair_error,
)

__version__ = "0.1.0"
