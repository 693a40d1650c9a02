import numpy as np
import pytest

from ponplan.costs import CostTable
from ponplan.model import ModelParams, PlanningInstance, Site, SiteKind


def sites(kind, prefix, coords):
    return [Site(f"{prefix}{k + 1}", kind, float(x), float(y)) for k, (x, y) in enumerate(coords)]


def make_instance(cos, splitters, rus, name="test", costs=None, **params):
    return PlanningInstance(
        sites(SiteKind.CENTRAL_OFFICE, "c", cos),
        sites(SiteKind.SPLITTER, "s", splitters),
        sites(SiteKind.RU_ONU, "r", rus),
        params=ModelParams(**params),
        costs=costs or CostTable(),
        name=name,
    )


def random_small_instance(rng: np.random.Generator, max_c=2, max_s=3, max_r=5, name="rand"):
    """Tiny instance in a 2 km square with varied, mostly satisfiable limits."""
    m = int(rng.integers(1, max_c + 1))
    n = int(rng.integers(1, max_s + 1))
    p = int(rng.integers(1, max_r + 1))
    pts = lambda k: np.round(rng.uniform(0, 2, size=(k, 2)), 3)  # noqa: E731
    params = dict(
        split_ratio=int(rng.choice([4, 8, 16])),
        max_dos_per_co=int(rng.integers(1, 4)),
        max_delay=float(rng.choice([12.0, 15.0, 20.0, 30.0])),
        max_distribution_fiber=float(rng.choice([1.5, 2.0, 5.0])),
        max_total_distance=float(rng.choice([3.5, 20.0])),
        ru_downlink=float(rng.choice([2.5, 10.0])),
        horizon_years=int(rng.integers(0, 11)),
    )
    costs = CostTable(
        co_housing=float(rng.choice([5000, 75000])),
        fiber_per_m=float(rng.choice([2, 20])),
        om_basis=str(rng.choice(["equipment", "capex"])),
        install_time_per_link=float(rng.choice([0, 2])),
        technician_salary=40.0,
        technician_count=1,
    )
    return make_instance(pts(m), pts(n), pts(p), name=name, costs=costs, **params)


@pytest.fixture
def tiny():
    """One CO, one splitter, one RU on a line: 3 km feeder, 4 km distribution."""
    return make_instance([(0, 0)], [(3, 0)], [(3, 4)], name="tiny")


@pytest.fixture
def colocated():
    return make_instance([(1, 1)], [(1, 1)], [(1, 1)], name="colocated")
