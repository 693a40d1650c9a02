"""Total cost of ownership: Capex (equipment, infrastructure, installation) and yearly Opex.

All functions return :class:`fractions.Fraction` so the decomposition
identities hold exactly; convert with ``float()`` for display.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Mapping

from ._exact import exact

if TYPE_CHECKING:
    from .ilp import IlpModel
    from .model import PlanningInstance
    from .plan import DeploymentPlan

HOURS_PER_YEAR = 365 * 24


class CostConfigError(ValueError):
    pass


def _default_splitter_prices() -> dict[int, float]:
    return {4: 30.0, 8: 50.0, 16: 100.0}


@dataclass(frozen=True)
class CostTable:
    """Unit prices and power draws. Defaults are the case-study price list."""

    co_housing: float = 75000.0
    do_unit: float = 6500.0
    awg: float = 250.0
    splitter_by_ratio: Mapping[int, float] = field(default_factory=_default_splitter_prices)
    ru_onu: float = 3500.0
    fiber_per_m: float = 20.0  # cable and civil work together
    yearly_site_rent: float = 8000.0
    electricity_price: float = 0.15  # $/kWh
    om_fraction: float = 0.10
    om_basis: str = "equipment"  # or "capex"
    power_do: float = 255.0  # Wh drawn per hour
    power_cooling: float = 500.0
    power_ru_onu: float = 104.0
    install_time_per_link: float = 0.0  # hours
    travel_time: float = 0.0  # hours, each way
    technician_salary: float = 0.0  # $/hour
    technician_count: int = 0
    software_license: float = 0.0  # $/year

    def problems(self) -> list[str]:
        errs = []
        for name in (
            "co_housing", "do_unit", "awg", "ru_onu", "fiber_per_m", "yearly_site_rent",
            "electricity_price", "power_do", "power_cooling", "power_ru_onu",
            "install_time_per_link", "travel_time", "technician_salary", "technician_count",
            "software_license",
        ):
            value = getattr(self, name)
            if not _nonneg(value):
                errs.append(f"cost {name} must be finite and >= 0, got {value!r}")
        for ratio, price in self.splitter_by_ratio.items():
            if not _nonneg(price):
                errs.append(f"splitter cost for ratio {ratio} must be >= 0, got {price!r}")
        if not (_nonneg(self.om_fraction) and self.om_fraction <= 1):
            errs.append(f"om_fraction must lie in [0, 1], got {self.om_fraction!r}")
        if self.om_basis not in ("equipment", "capex"):
            errs.append(f"om_basis must be 'equipment' or 'capex', got {self.om_basis!r}")
        return errs

    def splitter_price(self, ratio: int) -> Fraction:
        try:
            return exact(self.splitter_by_ratio[ratio])
        except KeyError:
            raise CostConfigError(
                f"no splitter price for ratio 1:{ratio}; known ratios "
                f"{sorted(self.splitter_by_ratio)}"
            ) from None

    def scaled(self, k) -> CostTable:
        """Every monetary entry multiplied by ``k`` (kept exact); power draws and times untouched."""
        from dataclasses import replace

        k = exact(k)
        return replace(
            self,
            co_housing=exact(self.co_housing) * k, do_unit=exact(self.do_unit) * k,
            awg=exact(self.awg) * k,
            splitter_by_ratio={r: exact(v) * k for r, v in self.splitter_by_ratio.items()},
            ru_onu=exact(self.ru_onu) * k, fiber_per_m=exact(self.fiber_per_m) * k,
            yearly_site_rent=exact(self.yearly_site_rent) * k,
            electricity_price=exact(self.electricity_price) * k,
            technician_salary=exact(self.technician_salary) * k,
            software_license=exact(self.software_license) * k,
        )


def _nonneg(value) -> bool:
    try:
        return math.isfinite(value) and value >= 0
    except TypeError:
        return False


@dataclass(frozen=True)
class UnitCounts:
    n_cos: int = 0
    n_dos: int = 0
    n_awgs: int = 0
    n_splitters: int = 0
    n_ru_onus: int = 0


@dataclass(frozen=True)
class CostReport:
    capex_equipment: Fraction
    capex_infrastructure: Fraction
    capex_installation: Fraction
    capex_total: Fraction
    opex_energy: Fraction
    opex_om: Fraction
    opex_site_rental: Fraction
    opex_total: Fraction
    tco: Fraction
    horizon_years: int
    unit_counts: UnitCounts
    fiber_length_total: Fraction  # km

    def identities_hold(self) -> bool:
        return (
            self.capex_total == self.capex_equipment + self.capex_infrastructure + self.capex_installation
            and self.opex_total == self.opex_energy + self.opex_om + self.opex_site_rental
            and self.tco == self.capex_total + self.horizon_years * self.opex_total
        )

    def components(self) -> list[tuple[str, float]]:
        return [
            ("capex_equipment", float(self.capex_equipment)),
            ("capex_infrastructure", float(self.capex_infrastructure)),
            ("capex_installation", float(self.capex_installation)),
            ("capex_total", float(self.capex_total)),
            ("opex_energy", float(self.opex_energy)),
            ("opex_om", float(self.opex_om)),
            ("opex_site_rental", float(self.opex_site_rental)),
            ("opex_total", float(self.opex_total)),
            ("tco", float(self.tco)),
        ]

    def to_dict(self) -> dict:
        out = dict(self.components())
        out["horizon_years"] = self.horizon_years
        out["fiber_length_total_km"] = float(self.fiber_length_total)
        out["unit_counts"] = {
            "N_C": self.unit_counts.n_cos,
            "N_DO": self.unit_counts.n_dos,
            "N_AWG": self.unit_counts.n_awgs,
            "N_PS": self.unit_counts.n_splitters,
            "N_RU_ONU": self.unit_counts.n_ru_onus,
        }
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["component", "value"])
        for name, value in self.components():
            writer.writerow([name, f"{value:.6f}"])
        writer.writerow(["fiber_length_total_km", f"{float(self.fiber_length_total):.6f}"])
        return buf.getvalue()


def equipment_cost(counts: UnitCounts, costs: CostTable, ratio: int) -> Fraction:
    """Equipment Capex, including central-office housing."""
    splitter = costs.splitter_price(ratio)
    return (
        counts.n_cos * exact(costs.co_housing)
        + counts.n_dos * exact(costs.do_unit)
        + counts.n_awgs * exact(costs.awg)
        + counts.n_splitters * splitter
        + counts.n_ru_onus * exact(costs.ru_onu)
    )


def infrastructure_cost(total_fiber_km, costs: CostTable) -> Fraction:
    return exact(total_fiber_km) * 1000 * exact(costs.fiber_per_m)


def per_link_installation(costs: CostTable) -> Fraction:
    return (
        (exact(costs.install_time_per_link) + 2 * exact(costs.travel_time))
        * exact(costs.technician_salary)
        * costs.technician_count
    )


def installation_cost(n_links: int, costs: CostTable) -> Fraction:
    return n_links * per_link_installation(costs)


def energy_cost(counts: UnitCounts, costs: CostTable) -> Fraction:
    """Yearly power bill; one cooling draw accompanies every deployed DO."""
    wh = counts.n_dos * (exact(costs.power_do) + exact(costs.power_cooling)) + counts.n_ru_onus * exact(
        costs.power_ru_onu
    )
    return exact(costs.electricity_price) * HOURS_PER_YEAR * wh / 1000


def om_cost(capex_basis, costs: CostTable) -> Fraction:
    return exact(costs.om_fraction) * exact(capex_basis) + exact(costs.software_license)


def site_rental_cost(n_cell_sites: int, costs: CostTable) -> Fraction:
    return n_cell_sites * exact(costs.yearly_site_rent)


def cost_report(
    counts: UnitCounts,
    fiber_km,
    n_links: int,
    costs: CostTable,
    ratio: int,
    horizon_years: int,
) -> CostReport:
    equipment = equipment_cost(counts, costs, ratio)
    infra = infrastructure_cost(fiber_km, costs)
    install = installation_cost(n_links, costs)
    capex = equipment + infra + install
    energy = energy_cost(counts, costs)
    om = om_cost(equipment if costs.om_basis == "equipment" else capex, costs)
    rent = site_rental_cost(counts.n_ru_onus, costs)
    opex = energy + om + rent
    return CostReport(
        capex_equipment=equipment,
        capex_infrastructure=infra,
        capex_installation=install,
        capex_total=capex,
        opex_energy=energy,
        opex_om=om,
        opex_site_rental=rent,
        opex_total=opex,
        tco=capex + horizon_years * opex,
        horizon_years=horizon_years,
        unit_counts=counts,
        fiber_length_total=exact(fiber_km),
    )


def total_cost(plan: DeploymentPlan, inst: PlanningInstance, model: IlpModel | None = None,
               check: bool = True) -> CostReport:
    """Full TCO report for a plan; infeasible plans are rejected with their violations."""
    from .ilp import InfeasiblePlanError, build_model, verify_plan
    from .model import compute_distances

    dm = model.distances if model is not None else compute_distances(inst)
    if check:
        model = model if model is not None else build_model(inst, dm)
        verdict = verify_plan(plan, model)
        if not verdict.feasible:
            raise InfeasiblePlanError(verdict)
    feeder_km, distribution_km = plan_fiber_km(plan, inst, dm)
    n_open = len(plan.open_splitters)
    counts = UnitCounts(
        n_cos=len(plan.open_cos),
        n_dos=n_open,
        n_awgs=n_open,
        n_splitters=n_open,
        n_ru_onus=len(plan.ru_assignment),
    )
    n_links = len(plan.splitter_homing) + len(plan.ru_assignment)
    return cost_report(
        counts, feeder_km + distribution_km, n_links, inst.costs,
        inst.params.split_ratio, inst.params.horizon_years,
    )


def plan_fiber_km(plan: DeploymentPlan, inst: PlanningInstance, dm) -> tuple[Fraction, Fraction]:
    co_idx = {s.id: i for i, s in enumerate(inst.cos)}
    sp_idx = {s.id: j for j, s in enumerate(inst.splitters)}
    ru_idx = {s.id: r for r, s in enumerate(inst.rus)}
    feeder = sum((dm.feeder(co_idx[c], sp_idx[s]) for s, c in plan.splitter_homing.items()), Fraction(0))
    distribution = sum(
        (dm.distribution(sp_idx[s], ru_idx[r]) for r, s in plan.ru_assignment.items()), Fraction(0)
    )
    return feeder, distribution
