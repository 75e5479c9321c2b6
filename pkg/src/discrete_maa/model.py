"""Energy-system description and assembly of the design-and-operation problem.

A model holds investable and existing components, energy carriers, demand
and price series on a typical-period time grid, and a flat CO2 price. The
assembled problem has one design variable per investable component (its
installed capacity) plus hourly operation variables:

* converters, sources and existing units: reference output flow per step
* storages: charge, discharge and state of charge per step
* importable carriers: import flow per step

Flows are powers; a step of period ``p`` stands for ``period_weights[p]``
hours of the year, and storage levels advance by ``step_hours`` per step,
cyclically within each typical period.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .problem import ProblemInstance

HOURS_PER_YEAR = 8760.0
KINDS = ("converter", "storage", "source", "existing")
NO_OVERPRODUCTION = ("electricity", "heating", "cooling")


class ModelError(ValueError):
    """Raised for unreadable or invalid model files."""


@dataclass(frozen=True)
class Carrier:
    id: str
    importable: bool = False
    import_price: tuple[float, ...] = ()
    emission_factor: float = 0.0
    import_limit: float | None = None
    overproduction_allowed: bool = False


@dataclass(frozen=True)
class Component:
    id: str
    kind: str
    output: str
    input: str | None = None
    efficiency: float | None = None
    cop: float | None = None
    coproducts: dict = field(default_factory=dict)
    availability: tuple[float, ...] = ()
    capacity_step: float = 0.0
    invest_cost: float = 0.0
    fixed_op_cost: float = 0.0
    variable_op_cost: float = 0.0
    emission_factor: float = 0.0
    existing_capacity: float = 0.0
    charge_efficiency: float = 1.0
    discharge_efficiency: float = 1.0
    self_discharge: float = 0.0
    c_rate: float = 1.0

    @property
    def investable(self) -> bool:
        return self.kind != "existing"

    @property
    def is_storage(self) -> bool:
        return self.kind == "storage"

    def input_per_output(self) -> float:
        """Input energy drawn per unit of reference output."""
        if self.input is None:
            return 0.0
        return 1.0 / (self.cop if self.cop is not None else self.efficiency)

    def coproduct_per_output(self) -> dict[str, float]:
        per_in = self.input_per_output()
        return {k: v * per_in for k, v in self.coproducts.items()}


@dataclass(frozen=True)
class TimeStructure:
    typical_periods: int
    steps_per_period: int
    period_weights: tuple[float, ...]
    step_hours: float

    @property
    def n_steps(self) -> int:
        return self.typical_periods * self.steps_per_period

    def weights(self) -> np.ndarray:
        """Hours of the year represented by each step."""
        return np.repeat(np.asarray(self.period_weights, dtype=float), self.steps_per_period)

    def previous(self, t: int) -> int:
        """Cyclic predecessor of step ``t`` within its typical period."""
        s = self.steps_per_period
        p, k = divmod(t, s)
        return p * s + (k - 1) % s


@dataclass(frozen=True)
class EnergySystemModel:
    components: tuple[Component, ...]
    carriers: tuple[Carrier, ...]
    demands: dict
    time: TimeStructure
    co2_price: float
    name: str = "model"

    @property
    def investable(self) -> tuple[Component, ...]:
        return tuple(c for c in self.components if c.investable)

    @property
    def dim(self) -> int:
        return len(self.investable)

    @property
    def design_names(self) -> list[str]:
        return [c.id for c in self.investable]

    @property
    def capacity_steps(self) -> np.ndarray:
        return np.array([c.capacity_step for c in self.investable], dtype=float)

    def carrier(self, cid: str) -> Carrier:
        for k in self.carriers:
            if k.id == cid:
                return k
        raise KeyError(cid)

    def demand(self, cid: str) -> np.ndarray:
        d = self.demands.get(cid)
        return np.zeros(self.time.n_steps) if d is None else np.asarray(d, dtype=float)


@dataclass(frozen=True)
class DesignVector:
    """Installed capacities of the investable components, in model order."""

    values: tuple[float, ...]
    lattice: bool = False

    @classmethod
    def of(cls, values, steps=None, lattice: bool | None = None) -> "DesignVector":
        vals = tuple(float(v) for v in np.asarray(values, dtype=float).ravel())
        if any(v < -1e-9 for v in vals):
            raise ValueError("design values must be nonnegative")
        if lattice is None:
            lattice = steps is not None and on_lattice(vals, steps)
        elif lattice and (steps is None or not on_lattice(vals, steps)):
            raise ValueError("design is not on the capacity lattice")
        return cls(vals, lattice)

    def __len__(self):
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def on_lattice(values, steps, tol: float = 1e-9) -> bool:
    units = np.asarray(values, dtype=float) / np.asarray(steps, dtype=float)
    return bool(np.all(units > -tol) and np.all(np.abs(units - np.round(units)) <= tol))


# --- loading and validation ---------------------------------------------------


def _series(value, n, where):
    if isinstance(value, (int, float)):
        return (float(value),) * n
    if not isinstance(value, list):
        raise ModelError(f"{where}: expected a number or a list of {n} numbers")
    if len(value) != n:
        raise ModelError(f"{where}: expected {n} values, got {len(value)}")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{where}: non-numeric entry") from exc


def _require(obj, key, where):
    if key not in obj:
        raise ModelError(f"{where}: missing field {key!r}")
    return obj[key]


def _check_fraction(value, what, where):
    if value is None:
        return
    if not (0.0 < value <= 1.0):
        raise ModelError(f"{where}: {what} out of (0,1] (got {value})")


def model_from_dict(doc: dict) -> EnergySystemModel:
    """Build and validate a model from its JSON document."""
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    for key in ("carriers", "components", "time", "demands", "co2_price"):
        _require(doc, key, "model")

    tdoc = doc["time"]
    periods = int(_require(tdoc, "typical_periods", "time"))
    steps = int(_require(tdoc, "steps_per_period", "time"))
    if periods < 1 or steps < 1:
        raise ModelError("time: typical_periods and steps_per_period must be positive")
    weights = _series(_require(tdoc, "period_weights", "time"), periods, "time.period_weights")
    if any(w < 0 for w in weights):
        raise ModelError("time.period_weights: weights must be nonnegative")
    total = sum(weights) * steps
    if abs(total - HOURS_PER_YEAR) > 1e-6 * HOURS_PER_YEAR:
        raise ModelError(f"time: weights x steps sum to {total:g} h, expected {HOURS_PER_YEAR:g} h")
    time = TimeStructure(periods, steps, weights, float(tdoc.get("step_hours", 24.0 / steps)))
    n = time.n_steps

    carriers = []
    for i, cdoc in enumerate(doc["carriers"]):
        where = f"carriers[{i}]"
        cid = _require(cdoc, "id", where)
        importable = bool(cdoc.get("importable", False))
        price = _series(cdoc.get("import_price", 0.0), n, f"{where}.import_price")
        over = bool(cdoc.get("overproduction_allowed", cid not in NO_OVERPRODUCTION))
        if cid in NO_OVERPRODUCTION and over:
            raise ModelError(f"{where}: overproduction of {cid} is not allowed")
        limit = cdoc.get("import_limit")
        carriers.append(Carrier(cid, importable, price, float(cdoc.get("emission_factor", 0.0)),
                                None if limit is None else float(limit), over))
    carrier_ids = {k.id for k in carriers}
    if len(carrier_ids) != len(carriers):
        raise ModelError("carriers: duplicate ids")

    components = []
    for i, cdoc in enumerate(doc["components"]):
        where = f"components[{i}]"
        cid = _require(cdoc, "id", where)
        where = f"component {cid!r}"
        kind = _require(cdoc, "kind", where)
        if kind not in KINDS:
            raise ModelError(f"{where}: unknown kind {kind!r}")
        if kind == "storage":
            output = _require(cdoc, "carrier", where)
        else:
            output = _require(cdoc, "output", where)
        inp = cdoc.get("input")
        for carrier in [output, inp, *cdoc.get("coproducts", {})]:
            if carrier is not None and carrier not in carrier_ids:
                raise ModelError(f"{where}: unknown carrier {carrier!r}")
        avail = cdoc.get("availability")
        comp = Component(
            id=cid,
            kind=kind,
            output=output,
            input=inp,
            efficiency=cdoc.get("efficiency"),
            cop=cdoc.get("cop"),
            coproducts={k: float(v) for k, v in cdoc.get("coproducts", {}).items()},
            availability=() if avail is None else _series(avail, n, f"{where}.availability"),
            capacity_step=float(cdoc.get("capacity_step", 0.0)),
            invest_cost=float(cdoc.get("invest_cost", 0.0)),
            fixed_op_cost=float(cdoc.get("fixed_op_cost", 0.0)),
            variable_op_cost=float(cdoc.get("variable_op_cost", 0.0)),
            emission_factor=float(cdoc.get("emission_factor", 0.0)),
            existing_capacity=float(cdoc.get("existing_capacity", 0.0)),
            charge_efficiency=float(cdoc.get("charge_efficiency", 1.0)),
            discharge_efficiency=float(cdoc.get("discharge_efficiency", 1.0)),
            self_discharge=float(cdoc.get("self_discharge", 0.0)),
            c_rate=float(cdoc.get("c_rate", 1.0)),
        )
        _validate_component(comp, where)
        components.append(comp)
    if len({c.id for c in components}) != len(components):
        raise ModelError("components: duplicate ids")

    demands = {}
    for cid, series in doc["demands"].items():
        if cid not in carrier_ids:
            raise ModelError(f"demands: unknown carrier {cid!r}")
        values = _series(series, n, f"demands.{cid}")
        if any(v < 0 for v in values):
            raise ModelError(f"demands.{cid}: demand must be nonnegative")
        demands[cid] = values

    co2 = float(doc["co2_price"])
    if co2 < 0:
        raise ModelError("co2_price must be nonnegative")
    model = EnergySystemModel(tuple(components), tuple(carriers), demands, time, co2, str(doc.get("name", "model")))
    _check_suppliers(model)
    return model


def _validate_component(c: Component, where: str) -> None:
    if c.kind != "existing":
        if not c.capacity_step > 0:
            raise ModelError(f"{where}: capacity_step must be > 0 for investable components")
        if c.existing_capacity != 0:
            raise ModelError(f"{where}: investment options carry no existing capacity")
    else:
        if not c.existing_capacity > 0:
            raise ModelError(f"{where}: existing components need existing_capacity > 0")
        if c.invest_cost != 0:
            raise ModelError(f"{where}: existing components have no investment cost")
    for name in ("invest_cost", "fixed_op_cost", "variable_op_cost", "emission_factor"):
        if getattr(c, name) < 0:
            raise ModelError(f"{where}: {name} must be nonnegative")
    if c.kind == "storage":
        _check_fraction(c.charge_efficiency, "charge efficiency", where)
        _check_fraction(c.discharge_efficiency, "discharge efficiency", where)
        if not 0.0 <= c.self_discharge < 1.0:
            raise ModelError(f"{where}: self_discharge out of [0,1)")
        if not c.c_rate > 0:
            raise ModelError(f"{where}: c_rate must be positive")
        return
    if c.input is None:
        if c.efficiency is not None or c.cop is not None:
            raise ModelError(f"{where}: a component without input has no efficiency")
        if c.kind == "source" and not c.availability:
            raise ModelError(f"{where}: sources need an availability profile")
        if c.kind == "converter":
            raise ModelError(f"{where}: converters need an input carrier")
    else:
        if (c.efficiency is None) == (c.cop is None):
            raise ModelError(f"{where}: give exactly one of efficiency or cop")
        if c.cop is not None:
            if not c.cop > 0:
                raise ModelError(f"{where}: cop must be positive")
        else:
            _check_fraction(c.efficiency, "efficiency", where)
            for k, v in c.coproducts.items():
                _check_fraction(v, f"efficiency of coproduct {k}", where)
            if c.efficiency + sum(c.coproducts.values()) > 1.0 + 1e-12:
                raise ModelError(f"{where}: total efficiency out of (0,1]")
    if c.availability and any(not 0.0 <= a <= 1.0 for a in c.availability):
        raise ModelError(f"{where}: availability out of [0,1]")


def _check_suppliers(model: EnergySystemModel) -> None:
    for cid, series in model.demands.items():
        if max(series, default=0.0) <= 0:
            continue
        carrier = model.carrier(cid)
        producers = [c for c in model.components if c.output == cid or cid in c.coproducts]
        if not producers and not carrier.importable:
            raise ModelError(f"demand for {cid!r} has no producing component or import")


def load_model(path) -> EnergySystemModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelError(f"{path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return model_from_dict(doc)
    except ModelError as exc:
        raise ModelError(f"{path}: {exc}") from exc
    except (TypeError, AttributeError, KeyError) as exc:
        raise ModelError(f"{path}: malformed field ({exc})") from exc


# --- assembly -----------------------------------------------------------------


class _Builder:
    def __init__(self):
        self.names: list[str] = []
        self.cost: list[float] = []
        self.ub_rows: list[tuple[dict, float, str]] = []
        self.eq_rows: list[tuple[dict, float, str]] = []

    def var(self, name: str, cost: float = 0.0) -> int:
        self.names.append(name)
        self.cost.append(cost)
        return len(self.names) - 1

    def build(self):
        n = len(self.names)

        def dense(rows):
            A = np.zeros((len(rows), n))
            for i, (terms, _, _) in enumerate(rows):
                for j, v in terms.items():
                    A[i, j] += v
            return A, np.array([r[1] for r in rows]), tuple(r[2] for r in rows)

        A_ub, b_ub, ub_names = dense(self.ub_rows)
        A_eq, b_eq, eq_names = dense(self.eq_rows)
        return np.array(self.cost), A_ub, b_ub, ub_names, A_eq, b_eq, eq_names


@dataclass(frozen=True)
class Layout:
    """Column positions of every variable family in an assembled problem."""

    design: np.ndarray
    op: dict
    charge: dict
    discharge: dict
    level: dict
    imports: dict
    balance_rows: dict


def assemble(model: EnergySystemModel, mode: str = "continuous") -> ProblemInstance:
    """Assemble the total-annualized-cost problem over design and operation.

    In ``discrete`` mode every design variable is marked as an integer
    multiple of its component's capacity step; in ``continuous`` mode the
    design domain is the nonnegative orthant.
    """
    if mode not in ("continuous", "discrete"):
        raise ValueError(f"mode must be 'continuous' or 'discrete', got {mode!r}")
    _check_suppliers(model)
    b = _Builder()
    time = model.time
    T = time.n_steps
    w = time.weights()
    co2 = model.co2_price

    design = []
    for c in model.investable:
        design.append(b.var(f"cap[{c.id}]", c.invest_cost + c.fixed_op_cost))
    constant = sum(c.fixed_op_cost * c.existing_capacity for c in model.components if not c.investable)

    op, charge, discharge, level, imports = {}, {}, {}, {}, {}
    # flows[carrier][t] -> {col: coefficient} of net supply into the balance
    flows = {k.id: [dict() for _ in range(T)] for k in model.carriers}

    cap_col = {c.id: design[i] for i, c in enumerate(model.investable)}

    for c in model.components:
        if c.is_storage:
            ch = [b.var(f"charge[{c.id},{t}]") for t in range(T)]
            dis = [b.var(f"discharge[{c.id},{t}]", w[t] * c.variable_op_cost) for t in range(T)]
            lev = [b.var(f"level[{c.id},{t}]") for t in range(T)]
            charge[c.id], discharge[c.id], level[c.id] = ch, dis, lev
            h = time.step_hours
            for t in range(T):
                flows[c.output][t][dis[t]] = 1.0
                flows[c.output][t][ch[t]] = -1.0
                prev = time.previous(t)
                terms = {lev[t]: 1.0, ch[t]: -c.charge_efficiency * h, dis[t]: h / c.discharge_efficiency}
                terms[lev[prev]] = terms.get(lev[prev], 0.0) - (1.0 - c.self_discharge)
                b.eq_rows.append((terms, 0.0, f"soc[{c.id},{t}]"))
                for var, rate, tag in ((lev[t], 1.0, "level"), (ch[t], c.c_rate, "charge"), (dis[t], c.c_rate, "discharge")):
                    if c.investable:
                        b.ub_rows.append(({var: 1.0, cap_col[c.id]: -rate}, 0.0, f"{tag}_cap[{c.id},{t}]"))
                    else:
                        b.ub_rows.append(({var: 1.0}, rate * c.existing_capacity, f"{tag}_cap[{c.id},{t}]"))
            continue

        per_in = c.input_per_output()
        emission = c.emission_factor
        cols = []
        for t in range(T):
            j = b.var(f"op[{c.id},{t}]", w[t] * (c.variable_op_cost + co2 * emission))
            cols.append(j)
            flows[c.output][t][j] = flows[c.output][t].get(j, 0.0) + 1.0
            if c.input is not None:
                flows[c.input][t][j] = flows[c.input][t].get(j, 0.0) - per_in
            for k, coef in c.coproduct_per_output().items():
                flows[k][t][j] = flows[k][t].get(j, 0.0) + coef
            avail = c.availability[t] if c.availability else 1.0
            if c.investable:
                b.ub_rows.append(({j: 1.0, cap_col[c.id]: -avail}, 0.0, f"cap[{c.id},{t}]"))
            else:
                b.ub_rows.append(({j: 1.0}, avail * c.existing_capacity, f"cap[{c.id},{t}]"))
        op[c.id] = cols

    for k in model.carriers:
        if not k.importable:
            continue
        cols = []
        for t in range(T):
            j = b.var(f"import[{k.id},{t}]", w[t] * (k.import_price[t] + co2 * k.emission_factor))
            cols.append(j)
            flows[k.id][t][j] = 1.0
            if k.import_limit is not None:
                b.ub_rows.append(({j: 1.0}, k.import_limit, f"import_limit[{k.id},{t}]"))
        imports[k.id] = cols

    balance_rows = {}
    for k in model.carriers:
        demand = model.demand(k.id)
        rows = []
        for t in range(T):
            if k.overproduction_allowed:
                rows.append(("ub", len(b.ub_rows)))
                b.ub_rows.append(({j: -v for j, v in flows[k.id][t].items()}, -demand[t], f"balance[{k.id},{t}]"))
            else:
                rows.append(("eq", len(b.eq_rows)))
                b.eq_rows.append((flows[k.id][t], demand[t], f"balance[{k.id},{t}]"))
        balance_rows[k.id] = rows

    c_vec, A_ub, b_ub, ub_names, A_eq, b_eq, eq_names = b.build()
    steps = np.zeros(len(c_vec))
    if mode == "discrete":
        steps[design] = model.capacity_steps
    layout = Layout(np.array(design, dtype=int), op, charge, discharge, level, imports, balance_rows)
    return ProblemInstance.from_arrays(
        c_vec,
        A_ub,
        b_ub,
        A_eq,
        b_eq,
        steps=steps,
        design_index=design,
        constant=constant,
        var_names=b.names,
        ub_names=ub_names,
        eq_names=eq_names,
        mode=mode,
        meta={"name": model.name, "layout": layout},
    )


def assemble_fixed_design(model: EnergySystemModel, d) -> ProblemInstance:
    """Operation-only problem with the design frozen at ``d``."""
    values = d.as_array() if isinstance(d, DesignVector) else np.asarray(d, dtype=float).ravel()
    if values.size != model.dim:
        raise ValueError(f"design has {values.size} entries, model has {model.dim} investable components")
    inst = assemble(model, "continuous")
    lb = inst.lb.copy()
    ub = inst.ub.copy()
    lb[inst.design_index] = values
    ub[inst.design_index] = values
    return inst.with_bounds(lb, ub)


def tac_breakdown(model: EnergySystemModel, instance: ProblemInstance, x) -> dict[str, float]:
    """Total annualized cost of a solution, summed term by term from the model.

    Independent of the assembled cost vector; used to cross-check solver
    objectives.
    """
    x = np.asarray(x, dtype=float)
    layout: Layout = instance.meta["layout"]
    w = model.time.weights()
    invest = fixed = variable = energy = emissions = 0.0
    for i, c in enumerate(model.investable):
        cap = x[layout.design[i]]
        invest += c.invest_cost * cap
        fixed += c.fixed_op_cost * cap
    for c in model.components:
        if not c.investable:
            fixed += c.fixed_op_cost * c.existing_capacity
        if c.id in layout.op:
            flow = x[layout.op[c.id]]
            variable += float(np.sum(w * flow)) * c.variable_op_cost
            emissions += float(np.sum(w * flow)) * c.emission_factor
        if c.id in layout.discharge:
            variable += float(np.sum(w * x[layout.discharge[c.id]])) * c.variable_op_cost
    for k in model.carriers:
        if k.id in layout.imports:
            flow = x[layout.imports[k.id]]
            energy += float(np.sum(w * flow * np.asarray(k.import_price)))
            emissions += float(np.sum(w * flow)) * k.emission_factor
    co2_cost = emissions * model.co2_price
    total = invest + fixed + variable + energy + co2_cost
    return {
        "investment": invest,
        "fixed_operation": fixed,
        "variable_operation": variable,
        "energy_imports": energy,
        "co2": co2_cost,
        "emissions": emissions,
        "total": total,
    }


def model_to_dict(model: EnergySystemModel) -> dict:
    """Inverse of :func:`model_from_dict` (series written out in full)."""
    comps = []
    for c in model.components:
        doc = {"id": c.id, "kind": c.kind}
        if c.is_storage:
            doc["carrier"] = c.output
            doc.update(charge_efficiency=c.charge_efficiency, discharge_efficiency=c.discharge_efficiency,
                       self_discharge=c.self_discharge, c_rate=c.c_rate)
        else:
            doc["output"] = c.output
            if c.input is not None:
                doc["input"] = c.input
            if c.efficiency is not None:
                doc["efficiency"] = c.efficiency
            if c.cop is not None:
                doc["cop"] = c.cop
            if c.coproducts:
                doc["coproducts"] = dict(c.coproducts)
            if c.availability:
                doc["availability"] = list(c.availability)
        if c.investable:
            doc["capacity_step"] = c.capacity_step
            doc["invest_cost"] = c.invest_cost
        else:
            doc["existing_capacity"] = c.existing_capacity
        doc.update(fixed_op_cost=c.fixed_op_cost, variable_op_cost=c.variable_op_cost,
                   emission_factor=c.emission_factor)
        comps.append(doc)
    carriers = []
    for k in model.carriers:
        doc = {"id": k.id, "importable": k.importable, "overproduction_allowed": k.overproduction_allowed}
        if k.importable:
            doc["import_price"] = list(k.import_price)
            doc["emission_factor"] = k.emission_factor
            if k.import_limit is not None:
                doc["import_limit"] = k.import_limit
        carriers.append(doc)
    t = model.time
    return {
        "schema_version": 1,
        "name": model.name,
        "time": {"typical_periods": t.typical_periods, "steps_per_period": t.steps_per_period,
                 "period_weights": list(t.period_weights), "step_hours": t.step_hours},
        "co2_price": model.co2_price,
        "carriers": carriers,
        "demands": {k: list(v) for k, v in model.demands.items()},
        "components": comps,
    }
