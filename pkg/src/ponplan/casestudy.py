"""Bundled greenfield case study: 34 RU/ONUs in three hotspots over a 10 x 10 km square."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .costs import CostTable
from .model import ModelParams, PlanningInstance, Site, SiteKind, load_instance

CASE_STUDY_NAME = "case_study"
AREA_KM = 10.0
SEED = 7
HOTSPOTS = (12, 11, 11)  # RU/ONUs per hotspot, 34 in total
HOTSPOT_SPREAD_KM = 0.5


def generate_case_study(seed: int = SEED, hotspots: tuple[int, ...] = HOTSPOTS,
                        spread_km: float = HOTSPOT_SPREAD_KM, area_km: float = AREA_KM,
                        co_grid: int = 4) -> PlanningInstance:
    """Regenerate the bundled instance.

    RU/ONUs form Gaussian hotspots (centres uniform in the inner square,
    clipped to the area, rounded to 1 m). Candidate COs sit on a
    ``co_grid`` x ``co_grid`` lattice whose cells are small enough that
    every point lies within 2 km of a CO, so even a 10 us budget is
    reachable. Candidate splitter locations are the CO lattice points and
    every RU/ONU cabinet.
    """
    rng = np.random.default_rng(seed)
    centres = rng.uniform(0.15 * area_km, 0.85 * area_km, size=(len(hotspots), 2))
    clouds = [np.clip(c + rng.normal(0.0, spread_km, size=(n, 2)), 0.0, area_km)
              for c, n in zip(centres, hotspots)]
    ru_xy = np.round(np.vstack(clouds), 3)
    step = area_km / co_grid
    lattice = [(step * (a + 0.5), step * (b + 0.5)) for b in range(co_grid) for a in range(co_grid)]

    cos = [Site(f"co{k + 1}", SiteKind.CENTRAL_OFFICE, x, y) for k, (x, y) in enumerate(lattice)]
    rus = [Site(f"ru{k + 1}", SiteKind.RU_ONU, float(x), float(y)) for k, (x, y) in enumerate(ru_xy)]
    splitters = [Site(f"sp{k + 1}", SiteKind.SPLITTER, x, y) for k, (x, y) in enumerate(lattice)]
    splitters += [
        Site(f"sp{len(lattice) + k + 1}", SiteKind.SPLITTER, ru.x, ru.y) for k, ru in enumerate(rus)
    ]
    return PlanningInstance(
        cos, splitters, rus,
        params=ModelParams(split_ratio=16, max_delay=30.0),
        costs=CostTable(),
        name=CASE_STUDY_NAME,
    )


def load_case_study() -> PlanningInstance:
    ref = resources.files("ponplan").joinpath("data/case_study.json")
    return load_instance(ref.read_text())
