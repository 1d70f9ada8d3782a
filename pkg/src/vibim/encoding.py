"""Grouped design matrices for mixed continuous/categorical predictors.

A categorical predictor with ``J`` levels becomes a block of ``J - 1`` dummy
columns (the last declared level is the reference and gets no column); a
continuous predictor becomes a single column. Each block is a *group* that
is selected or dropped as a unit. Pairwise interaction groups hold every
elementwise product of the two parent blocks.

Groups are identified by a *term*: ``(i,)`` for the main effect of predictor
``i`` and ``(i, j)`` with ``i < j`` for the interaction of predictors ``i``
and ``j``. In a design built by :func:`encode`, main effect ``i`` is group
``i``; :meth:`GroupedDesign.select_groups` keeps terms but renumbers groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Predictor",
    "PredictorSchema",
    "GroupedDesign",
    "EncodingError",
    "UnknownLevel",
    "NonFiniteValue",
    "SelfPair",
    "encode",
    "augment_interactions",
    "interaction_pairs",
    "Term",
]

Term = tuple  # (i,) or (i, j)


class EncodingError(ValueError):
    """Base class for design construction failures."""


class UnknownLevel(EncodingError):
    def __init__(self, row: int, name: str, value=None):
        self.row, self.name, self.value = row, name, value
        super().__init__(f"row {row}: undeclared level {value!r} for categorical {name!r}")


class NonFiniteValue(EncodingError):
    def __init__(self, row: int, name: str):
        self.row, self.name = row, name
        super().__init__(f"row {row}: non-finite value for continuous {name!r}")


class SelfPair(EncodingError):
    def __init__(self, i: int):
        self.i = i
        super().__init__(f"interaction of predictor {i} with itself is not supported")


@dataclass(frozen=True)
class Predictor:
    """One named predictor; ``levels`` is ``None`` for a continuous one."""

    name: str
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.levels is not None:
            levels = tuple(str(v) for v in self.levels)
            object.__setattr__(self, "levels", levels)
            if len(levels) < 2:
                raise EncodingError(f"categorical {self.name!r} needs at least 2 levels")
            if len(set(levels)) != len(levels):
                raise EncodingError(f"categorical {self.name!r} has duplicate levels")

    @property
    def is_categorical(self) -> bool:
        return self.levels is not None

    @property
    def width(self) -> int:
        return len(self.levels) - 1 if self.levels is not None else 1

    @classmethod
    def continuous(cls, name: str) -> "Predictor":
        return cls(name)

    @classmethod
    def categorical(cls, name: str, levels: Sequence) -> "Predictor":
        return cls(name, tuple(levels))


@dataclass(frozen=True)
class PredictorSchema:
    """Ordered predictor roster; position defines the predictor index."""

    entries: tuple[Predictor, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            raise EncodingError("predictor names must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> Predictor:
        return self.entries[i]

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def n_columns(self) -> int:
        """Main-effects column count ``p* = sum(J_i) + p - 2q``."""
        return sum(e.width for e in self.entries)


@dataclass(frozen=True, eq=False)
class GroupedDesign:
    """An ``n x p*`` matrix partitioned into contiguous column groups.

    Attributes
    ----------
    matrix : ndarray of shape (n, p*)
    groups : tuple of int arrays
        Column indices of each group, contiguous and in column order.
    labels : tuple of str
        Display name per group, ``"A"`` or ``"A*B"``.
    terms : tuple of tuples
        ``(i,)`` for main effects, ``(i, j)`` for interactions.
    column_labels : tuple of str
    constant : bool array of shape (p*,)
        Zero-variance columns; kept in the matrix but skipped by solvers.
    schema : PredictorSchema
    """

    matrix: np.ndarray
    groups: tuple
    labels: tuple
    terms: tuple
    column_labels: tuple
    schema: PredictorSchema
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.constant is None:
            if m.shape[0] > 0:
                const = np.ptp(m, axis=0) == 0
            else:
                const = np.ones(m.shape[1], dtype=bool)
            object.__setattr__(self, "constant", const)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def n_main(self) -> int:
        return sum(1 for t in self.terms if len(t) == 1)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups], dtype=int)

    @property
    def group_of_column(self) -> np.ndarray:
        out = np.empty(self.n_columns, dtype=np.int64)
        for k, cols in enumerate(self.groups):
            out[cols] = k
        return out

    def columns_of(self, group_indices: Iterable[int]) -> np.ndarray:
        idx = sorted(set(int(g) for g in group_indices))
        if not idx:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([self.groups[g] for g in idx]).astype(np.int64)

    def group_index(self, term) -> int:
        term = _norm_term(term)
        try:
            return self.terms.index(term)
        except ValueError:
            raise KeyError(f"term {term} not in design") from None

    def label_of(self, term) -> str:
        return _term_label(_norm_term(term), self.schema)

    def take_rows(self, rows) -> "GroupedDesign":
        """Row subset; the constant-column flags are recomputed."""
        return GroupedDesign(
            matrix=self.matrix[np.asarray(rows)],
            groups=self.groups,
            labels=self.labels,
            terms=self.terms,
            column_labels=self.column_labels,
            schema=self.schema,
        )

    def select_groups(self, group_indices: Iterable[int]) -> "GroupedDesign":
        """Design made of the given groups only, in ascending group order."""
        keep = sorted(set(int(g) for g in group_indices))
        cols = self.columns_of(keep)
        groups, pos = [], 0
        for g in keep:
            k = len(self.groups[g])
            groups.append(np.arange(pos, pos + k))
            pos += k
        return GroupedDesign(
            matrix=self.matrix[:, cols],
            groups=tuple(groups),
            labels=tuple(self.labels[g] for g in keep),
            terms=tuple(self.terms[g] for g in keep),
            column_labels=tuple(self.column_labels[c] for c in cols),
            schema=self.schema,
            constant=self.constant[cols],
        )

    def terms_of(self, group_indices: Iterable[int]) -> frozenset:
        return frozenset(self.terms[int(g)] for g in group_indices)

    def main_effects(self) -> "GroupedDesign":
        """The design restricted to its main-effect groups."""
        keep = [k for k, t in enumerate(self.terms) if len(t) == 1]
        if len(keep) == self.n_groups:
            return self
        return self.select_groups(keep)


def _norm_term(term) -> tuple:
    if isinstance(term, (int, np.integer)):
        return (int(term),)
    t = tuple(int(v) for v in term)
    if len(t) == 2 and t[0] > t[1]:
        t = (t[1], t[0])
    return t


def _term_label(term: tuple, schema: PredictorSchema) -> str:
    return "*".join(schema[i].name for i in term)


def encode(schema: PredictorSchema, raw: Mapping[str, Sequence]) -> GroupedDesign:
    """Build the main-effects design for ``raw`` under ``schema``.

    ``raw`` maps predictor name to a column of ``n`` cells: level labels for
    categoricals (compared as strings), numbers for continuous predictors.
    Columns follow schema order, and within a categorical, level order.
    """
    if len(schema) == 0:
        raise EncodingError("empty schema")
    lengths = {len(raw[e.name]) for e in schema}
    if len(lengths) != 1:
        raise EncodingError("raw columns have differing lengths")
    n = lengths.pop()

    blocks, groups, col_labels = [], [], []
    start = 0
    for pred in schema:
        column = raw[pred.name]
        if pred.is_categorical:
            lookup = {lv: k for k, lv in enumerate(pred.levels)}
            codes = np.empty(n, dtype=np.int64)
            for r, cell in enumerate(column):
                key = str(cell)
                if key not in lookup:
                    raise UnknownLevel(r, pred.name, cell)
                codes[r] = lookup[key]
            block = (codes[:, None] == np.arange(pred.width)[None, :]).astype(float)
            col_labels.extend(f"{pred.name}.{lv}" for lv in pred.levels[:-1])
        else:
            values = np.asarray(column, dtype=float)
            bad = np.flatnonzero(~np.isfinite(values))
            if bad.size:
                raise NonFiniteValue(int(bad[0]), pred.name)
            block = values.reshape(n, 1)
            col_labels.append(pred.name)
        blocks.append(block)
        groups.append(np.arange(start, start + block.shape[1]))
        start += block.shape[1]

    return GroupedDesign(
        matrix=np.hstack(blocks) if n else np.zeros((0, start)),
        groups=tuple(groups),
        labels=tuple(schema.names),
        terms=tuple((i,) for i in range(len(schema))),
        column_labels=tuple(col_labels),
        schema=schema,
    )


def augment_interactions(design: GroupedDesign, pairs: Iterable) -> GroupedDesign:
    """Append one group per unordered pair ``{i, j}`` of main effects.

    The new group holds every product ``x_a * x_b`` for ``a`` in group ``i``
    and ``b`` in group ``j``, ordered row-major in ``(a, b)``. Pairs are
    deduplicated and appended in sorted order; pairs already present are
    skipped.
    """
    norm = set()
    for pair in pairs:
        i, j = (int(v) for v in pair)
        if i == j:
            raise SelfPair(i)
        norm.add((min(i, j), max(i, j)))
    existing = set(design.terms)
    new_pairs = sorted(p for p in norm if p not in existing)
    if not new_pairs:
        return design

    mains = {t[0]: k for k, t in enumerate(design.terms) if len(t) == 1}
    blocks, groups, col_labels, labels, terms = [], [], [], [], []
    start = design.n_columns
    X = design.matrix
    for i, j in new_pairs:
        if i not in mains or j not in mains:
            raise EncodingError(f"pair ({i}, {j}) references a missing main effect")
        ci, cj = design.groups[mains[i]], design.groups[mains[j]]
        cols = [X[:, a] * X[:, b] for a, b in product(ci, cj)]
        blocks.append(np.column_stack(cols))
        groups.append(np.arange(start, start + len(cols)))
        start += len(cols)
        col_labels.extend(
            f"{design.column_labels[a]}:{design.column_labels[b]}" for a, b in product(ci, cj)
        )
        labels.append(_term_label((i, j), design.schema))
        terms.append((i, j))

    return GroupedDesign(
        matrix=np.hstack([X] + blocks),
        groups=design.groups + tuple(groups),
        labels=design.labels + tuple(labels),
        terms=design.terms + tuple(terms),
        column_labels=design.column_labels + tuple(col_labels),
        schema=design.schema,
    )


def interaction_pairs(design: GroupedDesign, group_indices: Iterable[int] | None = None) -> set:
    """Pairs ``(i, j)`` of the interaction groups among ``group_indices``."""
    idx = range(design.n_groups) if group_indices is None else group_indices
    return {design.terms[g] for g in idx if len(design.terms[g]) == 2}
