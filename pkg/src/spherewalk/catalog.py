"""Manufactured validation problems on the unit disk and unit ball.

Each entry pairs closed-form coefficients with a reference solution;
the source term is derived from the reference, so any estimator bias
shows up directly as disagreement with u_ref at the probe points.

The entries stake out the regimes that matter:

- wavy2d: oscillatory alpha and sigma together, nothing pathological.
- screened2d: constant alpha with strong absorption (sigma' up to ~33),
  the shrink-only weight regime with long delta-tracking walks.
- drift2d / drift3d: drift via a potential, exercising the advective
  term end to end.
- bump2d: a deep conductivity bump drives sigma' to about -6.7, so
  null-collision weights reach 1.66 and walk weights can grow step over
  step.  The wide sigma' range makes this the high-screening case the
  weight window is meant to tame; the growing weights are heavy-tailed
  enough that plain-walk variance estimates need either the window or
  very large N to settle, which is the point.

`screening_family` builds the constant-shift absorption ladder used to
study how query counts respond to the kernel screening value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Constant, Exponential, GaussianBump, Linear, Sinusoid
from .geometry import Scene, SphereSDF
from .problem import Problem, manufactured_problem

__all__ = ["CatalogEntry", "catalog", "screening_family", "unit_ball_scene", "unit_disk_scene"]

PROBES_2D = ((0.0, 0.0), (0.45, 0.2), (-0.4, 0.3), (0.25, -0.5), (-0.35, -0.45))
PROBES_3D = ((0.0, 0.0, 0.0), (0.4, 0.2, -0.1), (-0.3, 0.3, 0.3),
             (0.2, -0.45, 0.1), (-0.35, -0.2, -0.3))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    scene: Scene
    problem: Problem
    probes: tuple
    note: str

    def reference_values(self):
        return tuple(self.problem.reference.value(np.asarray(p)) for p in self.probes)


def unit_disk_scene(epsilon: float = 1e-3) -> Scene:
    return Scene(2, SphereSDF(np.zeros(2), 1.0), epsilon=epsilon)


def unit_ball_scene(epsilon: float = 1e-3) -> Scene:
    return Scene(3, SphereSDF(np.zeros(3), 1.0), epsilon=epsilon)


def catalog() -> dict:
    entries = [
        CatalogEntry(
            name="wavy2d",
            scene=unit_disk_scene(),
            problem=manufactured_problem(
                alpha=Sinusoid(amplitude=0.25, frequency=[3.0, 2.0], offset=1.0),
                sigma=Sinusoid(amplitude=0.5, frequency=[1.0, 1.0], offset=0.8),
                u_ref=Sinusoid(amplitude=0.9, frequency=[1.0, 1.3], phase=-0.4,
                               offset=0.2),
            ),
            probes=PROBES_2D,
            note="oscillatory alpha and sigma",
        ),
        CatalogEntry(
            name="screened2d",
            scene=unit_disk_scene(),
            problem=manufactured_problem(
                alpha=Constant(1.0),
                sigma=Sinusoid(amplitude=15.0, frequency=[1.0, 0.5], offset=20.0),
                u_ref=Sinusoid(amplitude=1.0, frequency=[1.1, 0.7], phase=0.6,
                               offset=0.3),
            ),
            probes=PROBES_2D,
            note="strong absorption, shrink-only weights",
        ),
        CatalogEntry(
            name="drift2d",
            scene=unit_disk_scene(),
            problem=manufactured_problem(
                alpha=Exponential([0.3, -0.2]),
                sigma=Constant(0.3),
                u_ref=Sinusoid(amplitude=1.0, frequency=[0.9, 1.2], phase=0.2,
                               offset=-0.1),
                drift_potential=Sinusoid(amplitude=0.25, frequency=[1.0, 0.5]),
            ),
            probes=PROBES_2D,
            note="drift from a sinusoidal potential over exponential alpha",
        ),
        CatalogEntry(
            name="bump2d",
            scene=unit_disk_scene(),
            problem=manufactured_problem(
                alpha=GaussianBump(center=[0.2, -0.1], amplitude=2.5, width=0.35,
                                   baseline=0.5),
                sigma=Constant(0.4),
                u_ref=Sinusoid(amplitude=1.0, frequency=[1.2, 0.8], phase=0.3,
                               offset=0.1),
            ),
            probes=PROBES_2D,
            note="deep alpha bump; sigma' strongly negative, weights can grow",
        ),
        CatalogEntry(
            name="bump3d",
            scene=unit_ball_scene(),
            problem=manufactured_problem(
                alpha=GaussianBump(center=[0.1, -0.2, 0.15], amplitude=1.5,
                                   width=0.7, baseline=0.6),
                sigma=Constant(0.5),
                u_ref=Sinusoid(amplitude=1.0, frequency=[0.9, 0.6, 1.1], phase=0.2,
                               offset=0.15),
            ),
            probes=PROBES_3D,
            note="negative sigma' in three dimensions",
        ),
        CatalogEntry(
            name="drift3d",
            scene=unit_ball_scene(),
            problem=manufactured_problem(
                alpha=Exponential([0.2, 0.1, -0.15]),
                sigma=Constant(0.4),
                u_ref=Sinusoid(amplitude=0.8, frequency=[1.0, 0.8, 0.6], phase=-0.3,
                               offset=0.25),
                drift_potential=Linear(0.0, [0.15, -0.1, 0.2]),
            ),
            probes=PROBES_3D,
            note="linear-potential drift in three dimensions",
        ),
    ]
    return {e.name: e for e in entries}


def screening_family(shift: float) -> CatalogEntry:
    """screened-style problem with sigma offset by a constant.

    A constant shift leaves the sigma' spread unchanged but raises its
    maximum, so the kernel screening value grows with the shift while
    the problem stays otherwise comparable.
    """
    if shift < 0.0:
        raise ValueError("shift must be nonnegative")
    return CatalogEntry(
        name=f"screenshift{shift:g}",
        scene=unit_disk_scene(),
        problem=manufactured_problem(
            alpha=Constant(1.0),
            sigma=Sinusoid(amplitude=2.0, frequency=[1.0, 0.5], offset=3.0 + shift),
            u_ref=Sinusoid(amplitude=1.0, frequency=[1.1, 0.7], phase=0.6, offset=0.3),
        ),
        probes=PROBES_2D,
        note=f"absorption ladder member, sigma offset +{shift:g}",
    )
