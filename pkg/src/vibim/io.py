"""CSV ingestion under a declared schema, run configuration and report output.

Schema and config files are YAML. A data schema looks like::

    response: {column: cases, transform: log}
    delimiter: ","
    na_policy: error          # or drop_row
    predictors:
      - {column: tier, kind: categorical, levels: ["1", "2", "3"]}
      - {column: distance, kind: continuous}

Categoricals must declare their levels; the last one is the reference.

TSV nested-model tables have the columns ``size``, ``added``, ``groups``
(semicolon separated), ``bic``, ``aic``, ``bic_p``, ``aic_p`` and
``in_window``. Importance tables have ``group``, ``label`` and ``score``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .encoding import EncodingError, Predictor, PredictorSchema, UnknownLevel
from .importance import ImportanceVector
from .procedure import VibimConfig, VibimReport, coefficient_table, nested_model_table
from .solvers import PenaltySpec, SolverPath

__all__ = [
    "DataError",
    "MissingColumn",
    "UnparsableCell",
    "InvalidResponse",
    "DataSchemaFile",
    "LoadedDataset",
    "read_schema",
    "load_dataset",
    "dump_dataset",
    "read_config",
    "config_from_mapping",
    "report_to_dict",
    "dumps_json",
    "write_report",
    "write_table",
    "report_schema",
    "penalty_from_name",
]

NA_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "null", "NULL"})
TRANSFORMS = ("none", "log", "log1p")


class DataError(ValueError):
    """Input file does not match its schema."""


class MissingColumn(DataError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"column {column!r} not found in header")


class UnparsableCell(DataError):
    def __init__(self, row: int, column: str, value: str):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r}")


class InvalidResponse(DataError):
    pass


@dataclass(frozen=True)
class DataSchemaFile:
    response: str
    transform: str
    predictors: PredictorSchema
    delimiter: str = ","
    na_policy: str = "error"

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise DataError(f"unknown transform {self.transform!r}")
        if self.na_policy not in ("error", "drop_row"):
            raise DataError(f"unknown na_policy {self.na_policy!r}")
        if self.response in self.predictors.names:
            raise DataError("response column is also listed as a predictor")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "DataSchemaFile":
        try:
            resp = data["response"]
            if isinstance(resp, str):
                resp = {"column": resp}
            entries = []
            for item in data["predictors"]:
                kind = item.get("kind", "continuous")
                name = str(item["column"])
                if kind == "categorical":
                    if "levels" not in item:
                        raise DataError(f"categorical {name!r} must declare its levels")
                    entries.append(Predictor.categorical(name, item["levels"]))
                elif kind == "continuous":
                    entries.append(Predictor.continuous(name))
                else:
                    raise DataError(f"predictor {name!r}: unknown kind {kind!r}")
            return cls(
                response=str(resp["column"]),
                transform=str(resp.get("transform", "none")),
                predictors=PredictorSchema(tuple(entries)),
                delimiter=str(data.get("delimiter", ",")),
                na_policy=str(data.get("na_policy", "error")),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed schema: {exc}") from None
        except EncodingError as exc:
            raise DataError(str(exc)) from None

    def to_mapping(self) -> dict:
        preds = []
        for p in self.predictors:
            if p.is_categorical:
                preds.append({"column": p.name, "kind": "categorical", "levels": list(p.levels)})
            else:
                preds.append({"column": p.name, "kind": "continuous"})
        return {
            "response": {"column": self.response, "transform": self.transform},
            "delimiter": self.delimiter,
            "na_policy": self.na_policy,
            "predictors": preds,
        }


@dataclass(frozen=True, eq=False)
class LoadedDataset:
    schema: PredictorSchema
    raw: dict
    response: np.ndarray
    n_rows: int
    n_dropped: int

    def design(self):
        from .encoding import encode

        return encode(self.schema, self.raw)


def read_schema(path) -> DataSchemaFile:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, Mapping):
        raise DataError(f"{path}: schema must be a mapping")
    return DataSchemaFile.from_mapping(data)


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise UnparsableCell(row, column, text) from None
    if not math.isfinite(value):
        raise UnparsableCell(row, column, text)
    return value


def _transform(y: np.ndarray, kind: str) -> np.ndarray:
    if kind == "log":
        if np.any(y <= 0):
            raise InvalidResponse("log transform needs a positive response")
        return np.log(y)
    if kind == "log1p":
        if np.any(y <= -1):
            raise InvalidResponse("log1p transform needs a response above -1")
        return np.log1p(y)
    return y


def load_dataset(csv_path, schema: DataSchemaFile) -> LoadedDataset:
    """Parse ``csv_path`` into typed predictor columns and a response vector.

    Rows are numbered from 1 after the header in error messages.
    """
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{csv_path}: empty file") from None
        rows = [r for r in reader if r]

    index = {name: k for k, name in enumerate(header)}
    wanted = [schema.response] + schema.predictors.names
    for name in wanted:
        if name not in index:
            raise MissingColumn(name)

    kept, dropped = [], 0
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"row {r}: expected {len(header)} fields, got {len(row)}")
        cells = {name: row[index[name]].strip() for name in wanted}
        na = [name for name, v in cells.items() if v in NA_TOKENS]
        if na:
            if schema.na_policy == "drop_row":
                dropped += 1
                continue
            raise UnparsableCell(r, na[0], cells[na[0]])
        kept.append((r, cells))

    raw = {}
    for pred in schema.predictors:
        if pred.is_categorical:
            allowed = set(pred.levels)
            col = []
            for r, cells in kept:
                v = cells[pred.name]
                if v not in allowed:
                    raise UnknownLevel(r, pred.name, v)
                col.append(v)
            raw[pred.name] = np.array(col, dtype=object)
        else:
            raw[pred.name] = np.array([_parse_float(c[pred.name], r, pred.name) for r, c in kept])
    y = np.array([_parse_float(c[schema.response], r, schema.response) for r, c in kept])
    y = _transform(y, schema.transform)
    return LoadedDataset(schema.predictors, raw, y, len(kept), dropped)


def dump_dataset(path, schema: PredictorSchema, raw: Mapping, response, response_name: str = "y",
                 delimiter: str = ",") -> None:
    """Write a dataset as CSV; floats use ``repr`` so a reload is bit-identical."""
    names = [response_name] + schema.names
    y = np.asarray(response, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(names)
        for i in range(y.size):
            row = [repr(float(y[i]))]
            for p in schema:
                v = raw[p.name][i]
                row.append(str(v) if p.is_categorical else repr(float(v)))
            w.writerow(row)


# -- configuration ------------------------------------------------------------

def penalty_from_name(name: str, scad_a: float = 3.7, mcp_gamma: float = 3.0) -> PenaltySpec:
    key = str(name).lower().removeprefix("group_").removeprefix("g")
    if key == "lasso":
        return PenaltySpec.lasso()
    if key == "scad":
        return PenaltySpec.scad(a=scad_a)
    if key == "mcp":
        return PenaltySpec.mcp(gamma=mcp_gamma)
    raise ValueError(f"unknown penalty {name!r}")


def config_from_mapping(data: Mapping | None) -> VibimConfig:
    data = dict(data or {})
    allowed = {"psi", "threshold_c", "max_rank_K", "high_dim_criteria", "penalties", "scad_a", "mcp_gamma"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    names = data.pop("penalties", ("lasso", "scad", "mcp"))
    a = float(data.pop("scad_a", 3.7))
    gamma = float(data.pop("mcp_gamma", 3.0))
    specs = tuple(penalty_from_name(n, a, gamma) for n in names)
    return VibimConfig(specs=specs, **data)


def read_config(path) -> VibimConfig:
    if path is None:
        return VibimConfig()
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return config_from_mapping(data)


# -- reports ------------------------------------------------------------------

def _num(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _importance_rows(imp: ImportanceVector) -> list:
    return [
        {"group": g, "label": imp.design.labels[g], "score": _num(s)}
        for g, s in enumerate(imp.scores)
        if np.isfinite(s)
    ]


def report_to_dict(obj) -> dict:
    """Plain-data view of a report, importance vector or solver path."""
    if isinstance(obj, VibimReport):
        cfg = obj.config
        d = obj.design
        rows = [
            {k: (_num(v) if isinstance(v, float) else v) for k, v in row.items()}
            for row in nested_model_table(obj)
        ]
        plausible = []
        for m in obj.plausible_models:
            coef = [
                {k: (_num(v) if isinstance(v, float) else v) for k, v in r.items()}
                for r in coefficient_table(obj, m.size)
            ]
            plausible.append({"size": m.size, "groups": [d.labels[g] for g in m.groups],
                              "coefficients": coef})
        return {
            "kind": "vibim_report",
            "n": d.n,
            "n_main": d.n_main,
            "n_groups": d.n_groups,
            "n_columns": d.n_columns,
            "config": {
                "psi": cfg.psi,
                "threshold_c": cfg.threshold_c,
                "max_rank_K": cfg.max_rank_K,
                "high_dim_criteria": cfg.high_dim_criteria,
                "penalties": [s.family.value for s in cfg.specs],
            },
            "high_dim": obj.high_dim,
            "stage1_importance": _importance_rows(obj.stage1_importance),
            "screened": [obj.stage1_importance.design.labels[g] for g in obj.screened],
            "stage2_importance": _importance_rows(obj.stage2_importance),
            "ranking": [d.labels[g] for g in obj.ranking],
            "nested_models": rows,
            "window": {"lower": obj.window[0], "upper": obj.window[1]},
            "plausible_models": plausible,
        }
    if isinstance(obj, ImportanceVector):
        return {"kind": "importance", "psi": obj.psi, "provenance": list(obj.provenance),
                "scores": _importance_rows(obj)}
    if isinstance(obj, SolverPath):
        steps = []
        for k, step in enumerate(obj.steps):
            nz = np.flatnonzero(step.beta)
            steps.append({
                "index": k,
                "lambda": _num(step.lam),
                "intercept": _num(step.intercept),
                "active_groups": sorted(int(g) for g in step.active_groups),
                "beta": {str(int(c)): _num(step.beta[c]) for c in nz},
                "converged": bool(step.converged),
                "iterations": int(step.iterations),
            })
        spec = obj.spec
        return {"kind": "solver_path", "family": spec.family.value, "shape": spec.shape,
                "steps": steps}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _encode(value, out: list) -> None:
    if value is None or value is True or value is False:
        out.append(json.dumps(value))
    elif isinstance(value, (bool, np.bool_)):
        out.append("true" if value else "false")
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            out.append("null")
        else:
            text = format(v, ".17g")
            if not any(ch in text for ch in ".en"):
                text += ".0"
            out.append(text)
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, Mapping):
        items = sorted((str(k), v) for k, v in value.items())
        out.append("{")
        for i, (k, v) in enumerate(items):
            if i:
                out.append(", ")
            out.append(json.dumps(k, ensure_ascii=False))
            out.append(": ")
            _encode(v, out)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(value):
            if i:
                out.append(", ")
            _encode(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot encode {type(value).__name__}")


def dumps_json(data) -> str:
    """JSON with sorted keys, 17 significant digits and ``null`` for non-finite floats."""
    out: list = []
    _encode(data, out)
    return "".join(out) + "\n"


def _tsv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g") if math.isfinite(v) else ""
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return str(v)


def write_table(path, rows: Sequence[Mapping], columns: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_tsv_cell(row.get(c)) for c in columns) + "\n")


NESTED_COLUMNS = ("size", "added", "groups", "bic", "aic", "bic_p", "aic_p", "in_window")
IMPORTANCE_COLUMNS = ("group", "label", "score")


def write_report(obj, path, format: str = "json") -> None:
    """Write ``obj`` as JSON, or as its main TSV table.

    The TSV of a report is its nested-model table; of an importance vector,
    its score table.
    """
    if format == "json":
        Path(path).write_text(dumps_json(report_to_dict(obj)), encoding="utf-8")
    elif format == "tsv":
        if isinstance(obj, VibimReport):
            write_table(path, nested_model_table(obj), NESTED_COLUMNS)
        elif isinstance(obj, ImportanceVector):
            write_table(path, _importance_rows(obj), IMPORTANCE_COLUMNS)
        else:
            raise TypeError(f"no TSV layout for {type(obj).__name__}")
    else:
        raise ValueError(f"unknown format {format!r}")


def report_schema() -> dict:
    """The JSON schema that ``vibim_report`` documents conform to."""
    text = resources.files("vibim").joinpath("data/report_schema.json").read_text(encoding="utf-8")
    return json.loads(text)
