"""Named scenario presets.

The desk-scale geometry mirrors the reference layout vertically: the view
cells sit *above* the flight box and their desired viewing directions
point downward (negative vertical angles).  With the camera-direction
mapping used here — gimbal pitch in (0, pi/2] tilts the optical axis
upward — this is the orientation in which a drone below a cell can
simultaneously align its axis with the line of sight and match the cell's
requested viewing direction.  Target ranges keep the optimal viewing
distance in the middle of the reachable band.
"""

from __future__ import annotations

import math

from .engine import CommandSpec, SimConfig
from .field import GridSpec
from .sensing import CoverageParams, SensingParams

CIRCLE_OMEGA = 0.05
FULL_REVOLUTION = 2.0 * math.pi / CIRCLE_OMEGA  # ~125.66 s


def desk_grid() -> GridSpec:
    """Desk-scale view grid (m = 1728), small enough for second-scale runs."""
    return GridSpec(
        q_bounds=((-3.0, 3.0), (-3.0, 3.0), (3.0, 3.8)),
        phi_h_range=(-math.pi, math.pi),
        phi_v_range=(-1.35, -0.15),
        cell_size=(0.5, 0.5, 0.8, math.pi / 3, 0.6),
    )


def survey_grid() -> GridSpec:
    """Full-scale grid (m = 672000), the desk geometry at survey resolution."""
    return GridSpec(
        q_bounds=((-4.0, 4.0), (-4.0, 4.0), (3.2, 4.0)),
        phi_h_range=(-math.pi, math.pi),
        phi_v_range=(-math.pi / 2, -0.15),
        cell_size=(0.2, 0.2, 0.2, 0.3, 0.3),
    )


def _base_config(**overrides) -> SimConfig:
    # Presets pin kmax_mode="best_observer": the cell rate is driven by the
    # drone currently observing the cell best, so barrier gradients point
    # along that drone's own pose and the per-drone constraint rows are
    # non-degenerate.  The verbatim "literal" reading (max over drones of
    # f2 - f1) stays the package default but makes the rate drive depend on
    # the *worst* observer, whose score underflows at any realistic spread;
    # the comparison baseline would then never move at all.
    defaults = dict(
        grid=desk_grid(),
        n=3,
        dt=0.01,
        duration=30.0,
        params=CoverageParams(sensing=SensingParams(), kmax_mode="best_observer"),
        stealth_mode="stealthy",
        flight_box=((-4.0, 4.0), (-4.0, 4.0), (2.0, 2.4)),
        pitch_bounds=(0.15, math.pi / 2),
        command=CommandSpec(source="zero"),
        initial_poses=None,
        ring_radius=0.5,
        ring_pitch=math.pi / 4,
    )
    defaults.update(overrides)
    return SimConfig(**defaults)


def preset_desk() -> SimConfig:
    """Autonomous desk-scale run: coverage only, no operator."""
    return _base_config()


def preset_paper_sim1() -> SimConfig:
    """Stealthiness comparison scenario: scripted circular command for one
    full revolution, average pose starting at the box center pointing up."""
    return _base_config(
        duration=FULL_REVOLUTION,
        command=CommandSpec(source="circle", omega=CIRCLE_OMEGA),
    )


def preset_desk_live() -> SimConfig:
    """Teleoperation scenario for the serve subcommand."""
    return _base_config(
        duration=3600.0,
        dt=0.02,
        command=CommandSpec(source="live"),
    )


PRESETS = {
    "desk": preset_desk,
    "paper-sim1": preset_paper_sim1,
    "desk-live": preset_desk_live,
}


def get_preset(name: str) -> SimConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
