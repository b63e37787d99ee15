"""Shared fixtures: calibrated cards and single-unit design builders.

Card calibration is session-scoped because the relaxation-series fit takes
a noticeable fraction of a second and every physics test wants the same two
cards.
"""

from pathlib import Path

import pytest

from morphgrid.dma import parse_dma_csv
from morphgrid.grid import (
    BendingUnitSpec,
    GridDesign,
    GridMember,
    GridNode,
    MemberKind,
)
from morphgrid.materials import (
    CFPLA_ALPHA_T,
    CFPLA_POISSON,
    PLA_ALPHA_T,
    PLA_POISSON,
    calibrate_card,
    make_linear_card,
)

FIXTURES = Path(__file__).parent / "fixtures"

UNLOADING_STEMS = (
    "pla_unloading_0p203",
    "pla_unloading_0p170",
    "pla_unloading_0p132",
    "pla_unloading_0p079",
)


@pytest.fixture(scope="session")
def fixdir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def pla_loading():
    return parse_dma_csv(FIXTURES / "dma" / "pla_loading_80c.csv", "stress_strain")


@pytest.fixture(scope="session")
def pla_unloading_curves():
    return [
        parse_dma_csv(FIXTURES / "dma" / f"{stem}.csv", "stress_strain")
        for stem in UNLOADING_STEMS
    ]


@pytest.fixture(scope="session")
def pla_sweep():
    return parse_dma_csv(FIXTURES / "dma" / "pla_sweep_80c.csv", "frequency_sweep")


@pytest.fixture(scope="session")
def cfpla_sweep():
    return parse_dma_csv(FIXTURES / "dma" / "cfpla_sweep_80c.csv", "frequency_sweep")


@pytest.fixture(scope="session")
def pla_card(pla_loading, pla_unloading_curves, pla_sweep):
    return calibrate_card(
        "pla", pla_loading, pla_unloading_curves, pla_sweep,
        alpha_t=PLA_ALPHA_T, poisson=PLA_POISSON,
    )


@pytest.fixture(scope="session")
def cfpla_card(cfpla_sweep):
    # no tabulated uniaxial curve for the constraint material: linear card
    # at the low-frequency storage modulus
    return make_linear_card(
        "cfpla", float(cfpla_sweep.storage_mpa[0]),
        alpha_t=CFPLA_ALPHA_T, poisson=CFPLA_POISSON,
    )


@pytest.fixture(scope="session")
def cards(pla_card, cfpla_card):
    return {"pla": pla_card, "cfpla": cfpla_card}


def unit_spec(ratio: float = 1.0, sigma0: float = 0.132095, **overrides) -> BendingUnitSpec:
    """The workhorse 100 x 7.2 x 4 mm unit with a 2 mm actuator layer."""
    base = dict(
        length=100.0, width=7.2, total_thickness=4.0, actuator_thickness=2.0,
        actuator_ratio=ratio, actuator_material="pla", constraint_material="cfpla",
        sigma0=sigma0,
    )
    base.update(overrides)
    return BendingUnitSpec(**base)


def single_unit_design(ratio: float = 1.0, sigma0: float = 0.132095,
                       gravity=(0.0, 0.0, 0.0), **spec_overrides) -> GridDesign:
    """Cantilevered single unit along +x, root fixed."""
    spec = unit_spec(ratio, sigma0, **spec_overrides)
    return GridDesign(
        nodes=(
            GridNode("root", (0.0, 0.0, 0.0), fixed=True),
            GridNode("tip", (spec.length, 0.0, 0.0)),
        ),
        members=(GridMember("u1", MemberKind.BENDING_UNIT, "root", "tip", spec),),
        gravity=tuple(gravity),
    )
