"""Planning instance: candidate sites, geometry and model parameters."""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import json
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ._exact import MM_PER_KM, exact, km_from_mm
from .costs import CostTable

STANDARD_RATIOS = (4, 8, 16)
# one-way propagation budget of a C-RAN fronthaul, microseconds
CRAN_DELAY_BUDGET_US = 50.0


class InstanceError(ValueError):
    """Base class for instance loading problems."""


class InstanceParseError(InstanceError):
    def __init__(self, message: str, field_name: str | None = None, line: int | None = None):
        self.field_name = field_name
        self.line = line
        where = []
        if field_name is not None:
            where.append(f"field '{field_name}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class InstanceValidationError(InstanceError):
    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid instance:\n  " + "\n  ".join(self.errors))


class SiteKind(str, enum.Enum):
    CENTRAL_OFFICE = "CentralOffice"
    SPLITTER = "Splitter"
    RU_ONU = "RuOnu"


@dataclass(frozen=True)
class Site:
    id: str
    kind: SiteKind
    x: float  # km
    y: float  # km


@dataclass(frozen=True)
class ModelParams:
    split_ratio: int = 16
    max_dos_per_co: int = 10
    delay_per_km: float = 5.0  # us/km
    max_delay: float = 50.0  # us
    max_distribution_fiber: float = 5.0  # km
    max_total_distance: float = 20.0  # km
    pon_downlink: float = 40.0  # Gb/s
    pon_uplink: float = 40.0
    ru_downlink: float = 2.5
    ru_uplink: float = 2.5
    horizon_years: int = 10
    routing_factor: float = 1.0
    d1_applies_to: str = "distribution"
    allow_nonstandard_ratio: bool = False

    def problems(self) -> list[str]:
        errs = []
        if not isinstance(self.split_ratio, int) or self.split_ratio <= 0:
            errs.append(f"split_ratio must be a positive integer, got {self.split_ratio!r}")
        elif self.split_ratio not in STANDARD_RATIOS and not self.allow_nonstandard_ratio:
            errs.append(
                f"split_ratio {self.split_ratio} not in {STANDARD_RATIOS} "
                "(set allow_nonstandard_ratio to override)"
            )
        if not isinstance(self.max_dos_per_co, int) or self.max_dos_per_co <= 0:
            errs.append(f"max_dos_per_co must be a positive integer, got {self.max_dos_per_co!r}")
        for name in (
            "delay_per_km", "max_delay", "max_distribution_fiber", "max_total_distance",
            "pon_downlink", "pon_uplink", "ru_downlink", "ru_uplink", "routing_factor",
        ):
            value = getattr(self, name)
            if not _finite(value) or value <= 0:
                errs.append(f"{name} must be finite and > 0, got {value!r}")
        if not isinstance(self.horizon_years, int) or self.horizon_years < 0:
            errs.append(f"horizon_years must be a non-negative integer, got {self.horizon_years!r}")
        if _finite(self.ru_downlink) and _finite(self.pon_downlink) and self.ru_downlink > self.pon_downlink:
            errs.append("ru_downlink exceeds pon_downlink")
        if _finite(self.ru_uplink) and _finite(self.pon_uplink) and self.ru_uplink > self.pon_uplink:
            errs.append("ru_uplink exceeds pon_uplink")
        if self.d1_applies_to not in ("distribution", "feeder"):
            errs.append(f"d1_applies_to must be 'distribution' or 'feeder', got {self.d1_applies_to!r}")
        return errs

    def splitter_capacity(self) -> int:
        """RUs one splitter can host once ratio and both PON capacities are applied."""
        down = math.floor(exact(self.pon_downlink) / exact(self.ru_downlink))
        up = math.floor(exact(self.pon_uplink) / exact(self.ru_uplink))
        return min(self.split_ratio, down, up)


@dataclass(frozen=True)
class PlanningInstance:
    central_office_sites: tuple[Site, ...]
    splitter_sites: tuple[Site, ...]
    ru_onu_sites: tuple[Site, ...]
    params: ModelParams = field(default_factory=ModelParams)
    costs: CostTable = field(default_factory=CostTable)
    name: str = "instance"

    def __post_init__(self):
        for attr in ("central_office_sites", "splitter_sites", "ru_onu_sites"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        errors = validation_errors(self)
        if errors:
            raise InstanceValidationError(errors)
        if self.params.max_delay > CRAN_DELAY_BUDGET_US:
            warnings.warn(
                f"max_delay {self.params.max_delay} us exceeds the {CRAN_DELAY_BUDGET_US:g} us "
                "C-RAN propagation budget",
                stacklevel=3,
            )

    @property
    def cos(self) -> tuple[Site, ...]:
        return self.central_office_sites

    @property
    def splitters(self) -> tuple[Site, ...]:
        return self.splitter_sites

    @property
    def rus(self) -> tuple[Site, ...]:
        return self.ru_onu_sites

    def with_params(self, **changes) -> PlanningInstance:
        return dataclasses.replace(self, params=dataclasses.replace(self.params, **changes))

    def with_costs(self, **changes) -> PlanningInstance:
        return dataclasses.replace(self, costs=dataclasses.replace(self.costs, **changes))

    def fingerprint(self) -> str:
        payload = json.dumps(instance_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _finite(value) -> bool:
    try:
        return math.isfinite(value)
    except TypeError:
        return False


def validation_errors(inst: PlanningInstance) -> list[str]:
    errors = []
    groups = (
        ("C", "central_office_sites", SiteKind.CENTRAL_OFFICE),
        ("S", "splitter_sites", SiteKind.SPLITTER),
        ("R", "ru_onu_sites", SiteKind.RU_ONU),
    )
    for label, attr, kind in groups:
        sites = getattr(inst, attr)
        if not sites:
            errors.append(f"empty set {label}")
        seen = set()
        for site in sites:
            if site.kind != kind:
                errors.append(f"site {site.id!r} in {attr} has kind {site.kind.value}")
            if site.id in seen:
                errors.append(f"duplicate id {site.id!r} in set {label}")
            seen.add(site.id)
            if not (_finite(site.x) and _finite(site.y)):
                errors.append(f"site {site.id!r} has non-finite coordinates")
    errors.extend(inst.params.problems())
    errors.extend(inst.costs.problems())
    if inst.params.split_ratio not in inst.costs.splitter_by_ratio:
        errors.append(f"no splitter cost for ratio {inst.params.split_ratio}")
    return errors


@dataclass(frozen=True)
class DistanceMatrix:
    """Fiber lengths, held as integer millimetres so every comparison is exact."""

    d_ij_mm: np.ndarray  # (CO i, splitter j)
    d_jr_mm: np.ndarray  # (splitter j, RU r)

    @property
    def d_ij(self) -> np.ndarray:
        return self.d_ij_mm / MM_PER_KM

    @property
    def d_jr(self) -> np.ndarray:
        return self.d_jr_mm / MM_PER_KM

    def feeder(self, i: int, j: int):
        return km_from_mm(self.d_ij_mm[i, j])

    def distribution(self, j: int, r: int):
        return km_from_mm(self.d_jr_mm[j, r])


def _coords(sites: Iterable[Site]) -> np.ndarray:
    return np.array([[s.x, s.y] for s in sites], dtype=float).reshape(-1, 2)


def pairwise_km(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def compute_distances(inst: PlanningInstance) -> DistanceMatrix:
    """Euclidean fiber lengths scaled by the routing factor, rounded to 1 mm."""
    co, sp, ru = _coords(inst.cos), _coords(inst.splitters), _coords(inst.rus)
    factor = inst.params.routing_factor
    d_ij = np.rint(pairwise_km(co, sp) * factor * MM_PER_KM).astype(np.int64)
    d_jr = np.rint(pairwise_km(sp, ru) * factor * MM_PER_KM).astype(np.int64)
    d_ij.flags.writeable = False
    d_jr.flags.writeable = False
    return DistanceMatrix(d_ij, d_jr)


def path_delay(d_feeder, d_distribution, tau):
    """One-way propagation delay in microseconds over feeder plus distribution fiber.

    Send, queuing and processing delays are hardware dependent and taken as zero.
    """
    if d_feeder < 0 or d_distribution < 0:
        raise ValueError("fiber lengths must be non-negative")
    return tau * (d_feeder + d_distribution)


def feasible_pairs(inst: PlanningInstance, dm: DistanceMatrix | None = None) -> list[list[tuple[int, int]]]:
    """For each RU, the (CO, splitter) index pairs meeting the delay and distance limits."""
    dm = dm if dm is not None else compute_distances(inst)
    p = inst.params
    tau, tau_max = exact(p.delay_per_km), exact(p.max_delay)
    d1_max, d_max = exact(p.max_distribution_fiber), exact(p.max_total_distance)
    # compare in mm: path_mm <= limit_km * 1e6
    delay_mm = tau_max / tau * MM_PER_KM
    dmax_mm = d_max * MM_PER_KM
    d1_mm = d1_max * MM_PER_KM
    out = []
    for r in range(len(inst.rus)):
        pairs = []
        for j in range(len(inst.splitters)):
            d_jr = int(dm.d_jr_mm[j, r])
            if p.d1_applies_to == "distribution" and d_jr > d1_mm:
                continue
            for i in range(len(inst.cos)):
                d_ij = int(dm.d_ij_mm[i, j])
                if p.d1_applies_to == "feeder" and d_ij > d1_mm:
                    continue
                total = d_ij + d_jr
                if total <= delay_mm and total <= dmax_mm:
                    pairs.append((i, j))
        out.append(pairs)
    return out


def feasibility_issues(inst: PlanningInstance, dm: DistanceMatrix | None = None) -> list[str]:
    issues = []
    for r, pairs in enumerate(feasible_pairs(inst, dm)):
        if not pairs:
            ru = inst.rus[r]
            issues.append(
                f"RU/ONU {ru.id!r} has no (splitter, CO) chain within "
                f"{inst.params.max_delay:g} us delay, {inst.params.max_total_distance:g} km total "
                f"and {inst.params.max_distribution_fiber:g} km {inst.params.d1_applies_to} limits"
            )
    return issues


def precheck(inst: PlanningInstance, dm: DistanceMatrix | None = None) -> None:
    issues = feasibility_issues(inst, dm)
    if issues:
        raise InstanceValidationError(issues)


# -- serialization ---------------------------------------------------------

_SITE_GROUPS = (
    ("central_offices", "central_office_sites", SiteKind.CENTRAL_OFFICE),
    ("splitters", "splitter_sites", SiteKind.SPLITTER),
    ("ru_onus", "ru_onu_sites", SiteKind.RU_ONU),
)
_CSV_KINDS = {
    "co": SiteKind.CENTRAL_OFFICE, "central_office": SiteKind.CENTRAL_OFFICE,
    "centraloffice": SiteKind.CENTRAL_OFFICE,
    "splitter": SiteKind.SPLITTER,
    "ru": SiteKind.RU_ONU, "ru_onu": SiteKind.RU_ONU, "ruonu": SiteKind.RU_ONU,
}


def instance_to_dict(inst: PlanningInstance) -> dict[str, Any]:
    sites = {
        key: [{"id": s.id, "x_km": s.x, "y_km": s.y} for s in getattr(inst, attr)]
        for key, attr, _ in _SITE_GROUPS
    }
    costs = dataclasses.asdict(inst.costs)
    costs["splitter_by_ratio"] = {str(k): v for k, v in sorted(inst.costs.splitter_by_ratio.items())}
    return {
        "name": inst.name,
        "sites": sites,
        "params": dataclasses.asdict(inst.params),
        "costs": costs,
    }


def save_instance(inst: PlanningInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2, sort_keys=True) + "\n")


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _line_of_value(text: str, key: str, value) -> int | None:
    try:
        literal = json.dumps(value)
    except (TypeError, ValueError):
        return None
    m = re.search(r'"' + re.escape(key) + r'"\s*:\s*' + re.escape(literal), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _parse_sites(raw, key: str, kind: SiteKind, text: str) -> list[Site]:
    if not isinstance(raw, list):
        raise InstanceParseError("expected an array of sites", key, _line_of(text, key))
    sites = []
    for n, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise InstanceParseError(f"entry {n} is not an object", key, _line_of(text, key))
        missing = [k for k in ("id", "x_km", "y_km") if k not in entry]
        if missing:
            raise InstanceParseError(f"entry {n} lacks {missing}", key, _line_of(text, key))
        for coord in ("x_km", "y_km"):
            value = entry[coord]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                line = _line_of_value(text, coord, value) or _line_of(text, key)
                raise InstanceParseError(f"expected a number, got {value!r}", f"{key}[{n}].{coord}", line)
        sites.append(Site(str(entry["id"]), kind, float(entry["x_km"]), float(entry["y_km"])))
    return sites


def load_sites_csv(path) -> dict[SiteKind, list[Site]]:
    """Read a ``kind,id,x_km,y_km`` site list."""
    out: dict[SiteKind, list[Site]] = {k: [] for k in SiteKind}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or ())
        for col in ("kind", "id", "x_km", "y_km"):
            if col not in header:
                raise InstanceParseError(f"missing column '{col}'", col, 1)
        for lineno, row in enumerate(reader, start=2):
            raw_kind = row["kind"].strip().lower().replace("/", "_").replace("-", "_")
            kind = _CSV_KINDS.get(raw_kind)
            if kind is None:
                raise InstanceParseError(f"unknown site kind {row['kind']!r}", "kind", lineno)
            try:
                x, y = float(row["x_km"]), float(row["y_km"])
            except (TypeError, ValueError):
                raise InstanceParseError("non-numeric coordinate", "x_km/y_km", lineno)
            out[kind].append(Site(row["id"].strip(), kind, x, y))
    return out


def _build_dataclass(cls, raw, section: str, text: str):
    if not isinstance(raw, dict):
        raise InstanceParseError("expected an object", section, _line_of(text, section))
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise InstanceParseError(f"unknown key(s) {unknown}", f"{section}.{unknown[0]}", _line_of(text, unknown[0]))
    kwargs = {}
    for name, value in raw.items():
        default = known[name].default
        if name == "splitter_by_ratio":
            if not isinstance(value, dict):
                raise InstanceParseError("expected an object", f"{section}.{name}", _line_of(text, name))
            try:
                value = {int(k): float(v) for k, v in value.items()}
            except (TypeError, ValueError):
                raise InstanceParseError("ratio keys must be integers", f"{section}.{name}", _line_of(text, name))
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise InstanceParseError("expected true/false", f"{section}.{name}", _line_of(text, name))
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
                raise InstanceParseError("expected an integer", f"{section}.{name}", _line_of(text, name))
            value = int(value)
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InstanceParseError("expected a number", f"{section}.{name}", _line_of(text, name))
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise InstanceParseError("expected a string", f"{section}.{name}", _line_of(text, name))
        kwargs[name] = value
    return cls(**kwargs)


def instance_from_dict(doc: dict, text: str = "", base_dir: Path | None = None,
                       check_feasibility: bool = True) -> PlanningInstance:
    if not isinstance(doc, dict):
        raise InstanceParseError("top level must be an object", None, 1)
    if "sites" not in doc:
        raise InstanceParseError("missing required key", "sites", 1)
    raw_sites = doc["sites"]
    if isinstance(raw_sites, str):
        csv_path = Path(raw_sites)
        if base_dir is not None and not csv_path.is_absolute():
            csv_path = base_dir / csv_path
        by_kind = load_sites_csv(csv_path)
        groups = [by_kind[kind] for _, _, kind in _SITE_GROUPS]
    elif isinstance(raw_sites, dict):
        groups = []
        for key, _, kind in _SITE_GROUPS:
            if key not in raw_sites:
                raise InstanceParseError("missing required key", f"sites.{key}", _line_of(text, "sites"))
            groups.append(_parse_sites(raw_sites[key], f"sites.{key}", kind, text))
    else:
        raise InstanceParseError("expected an object or a CSV path", "sites", _line_of(text, "sites"))
    params = _build_dataclass(ModelParams, doc.get("params", {}), "params", text)
    costs = _build_dataclass(CostTable, doc.get("costs", {}), "costs", text)
    inst = PlanningInstance(*groups, params=params, costs=costs, name=str(doc.get("name", "instance")))
    if check_feasibility:
        precheck(inst)
    return inst


def load_instance(source, check_feasibility: bool = True) -> PlanningInstance:
    """Load and validate an instance document (JSON path, JSON text or dict)."""
    base_dir = None
    if isinstance(source, dict):
        return instance_from_dict(source, check_feasibility=check_feasibility)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        text = path.read_text()
        base_dir = path.parent
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(exc.msg, None, exc.lineno) from None
    return instance_from_dict(doc, text, base_dir, check_feasibility)
