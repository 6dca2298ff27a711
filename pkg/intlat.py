#!/usr/bin/env python3
"""
Integer Lattices

Exact integer and symbolic linear algebra used by the Prym computations.

Supports:
- Smith normal form with transformation matrices
- Saturated integer kernel bases
- Unimodularity tests
- Symmetric Gram matrices of linear forms, their congruence and specialization
- Bounded search for unimodular congruences between Gram matrices
"""

import itertools
import logging
import re
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Tuple

from sympy import Matrix, Rational, ZZ, eye, ilcm, zeros
from sympy.matrices.normalforms import smith_normal_decomp

from errors import DimensionMismatch, MalformedExpression, NotSymmetric, UnassignedVariable
from symgraph import CONSTANT, LinearForm

logger = logging.getLogger(__name__)

DEFAULT_BOUND = 3


def smith_normal_form(m: Matrix) -> Tuple[Matrix, Matrix, Matrix]:
    """Smith normal form of an integer matrix.

    Returns:
        (U, D, V) with U * m * V == D, U and V unimodular
    """
    m = Matrix(m)
    rows, cols = m.shape
    if rows == 0 or cols == 0:
        return eye(rows), zeros(rows, cols), eye(cols)
    d, u, v = smith_normal_decomp(m, domain=ZZ)
    return u, d, v


def integer_kernel(m: Matrix) -> Matrix:
    """Columns form a saturated Z-basis of {x : m * x == 0}."""
    m = Matrix(m)
    rows, cols = m.shape
    if cols == 0:
        return zeros(0, 0)
    if rows == 0:
        return eye(cols)
    _, d, v = smith_normal_form(m)
    free = [j for j in range(cols) if all(d[i, j] == 0 for i in range(rows))]
    if not free:
        return zeros(cols, 0)
    return Matrix.hstack(*[v[:, j] for j in free])


def is_unimodular(m: Matrix) -> bool:
    m = Matrix(m)
    if not m.is_square:
        return False
    if m.shape[0] == 0:
        return True
    if any(not entry.is_integer for entry in m):
        return False
    return abs(m.det()) == 1


def invariant_factors(m: Matrix) -> List[int]:
    _, d, _ = smith_normal_form(m)
    return [int(d[i, i]) for i in range(min(d.shape)) if d[i, i] != 0]


class GramMatrix:
    """A square symmetric matrix of LinearForms."""

    def __init__(self, rows: Iterable[Iterable[LinearForm]]):
        self._rows = tuple(tuple(entry for entry in row) for row in rows)
        size = len(self._rows)
        for i, row in enumerate(self._rows):
            if len(row) != size:
                raise DimensionMismatch(f"row {i} has {len(row)} entries, expected {size}")
        for i in range(size):
            for j in range(i):
                if self._rows[i][j] != self._rows[j][i]:
                    raise NotSymmetric(f"Gram matrix is not symmetric at ({i}, {j})")

    @classmethod
    def parse(cls, text: str, variables: Iterable[str] = None) -> 'GramMatrix':
        """Parse '[[2*l2+2*l3]]' style text."""
        body = re.sub(r"\s+", "", text)
        if not (body.startswith("[[") and body.endswith("]]")):
            raise MalformedExpression(f"Gram matrix must look like [[...],[...]], got '{text.strip()}'")
        inner = body[2:-2]
        if not inner:
            return cls([])
        rows = [row.split(",") for row in inner.split("],[")]
        return cls([[LinearForm.parse(entry, variables) for entry in row] for row in rows])

    @property
    def rows(self) -> Tuple[Tuple[LinearForm, ...], ...]:
        return self._rows

    @property
    def dimension(self) -> int:
        return len(self._rows)

    @property
    def variables(self) -> Tuple[str, ...]:
        names = set()
        for row in self._rows:
            for entry in row:
                names.update(entry.variables)
        return tuple(sorted(names))

    def __getitem__(self, index: Tuple[int, int]) -> LinearForm:
        i, j = index
        return self._rows[i][j]

    def transform(self, u: Matrix) -> 'GramMatrix':
        """Return U^T * G * U."""
        u = Matrix(u)
        if u.shape[0] != self.dimension:
            raise DimensionMismatch(f"cannot transform a {self.dimension}x{self.dimension} Gram by {u.shape}")
        size = u.shape[1]
        rows = []
        for i in range(size):
            row = []
            for j in range(size):
                total = LinearForm.zero()
                for k in range(self.dimension):
                    if u[k, i] == 0:
                        continue
                    for m in range(self.dimension):
                        if u[m, j] != 0:
                            total = total + self._rows[k][m] * (u[k, i] * u[m, j])
                row.append(total)
            rows.append(row)
        return GramMatrix(rows)

    def scale(self, factor: Any) -> 'GramMatrix':
        return GramMatrix([[entry * factor for entry in row] for row in self._rows])

    def specialize(self, assignment: Mapping[str, Any]) -> Matrix:
        return specialize(self, assignment)

    def format(self, order: Iterable[str] = None) -> str:
        order = list(order or [])
        return "[" + ",".join("[" + ",".join(entry.format(order) for entry in row) + "]"
                              for row in self._rows) + "]"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GramMatrix) and self._rows == other._rows

    def __hash__(self) -> int:
        return hash(self._rows)

    def __repr__(self) -> str:
        return f"GramMatrix({self.format()})"


def specialize(g: GramMatrix, assignment: Mapping[str, Any]) -> Matrix:
    """Substitute rationals for every variable.

    Raises:
        UnassignedVariable: If a variable has no value
    """
    missing = [var for var in g.variables if var != CONSTANT and var not in assignment]
    if missing:
        raise UnassignedVariable(f"no value for variables: {', '.join(missing)}")
    return Matrix(g.dimension, g.dimension,
                  lambda i, j: g[i, j].evaluate(assignment))


def is_positive_definite(m: Matrix) -> bool:
    """Sylvester's criterion on leading principal minors, exactly."""
    m = Matrix(m)
    if not m.is_square or m.shape[0] == 0:
        return False
    return all(m[:k, :k].det() > 0 for k in range(1, m.shape[0] + 1))


def _coefficient_matrices(g: GramMatrix, variables: Sequence[str]) -> List[List[List[int]]]:
    """Split a Gram matrix into one integer matrix per variable (scaled to clear denominators)."""
    result = []
    for var in variables:
        entries = [[g[i, j].coefficient(var) for j in range(g.dimension)] for i in range(g.dimension)]
        scale = 1
        for row in entries:
            for value in row:
                scale = ilcm(scale, Rational(value).q)
        result.append([[int(value * scale) for value in row] for row in entries])
    return result


def _quadratic(mats: List[List[List[int]]], x: Sequence[int], y: Sequence[int]) -> Tuple[int, ...]:
    n = len(x)
    return tuple(sum(x[i] * mat[i][j] * y[j] for i in range(n) if x[i] for j in range(n) if y[j])
                 for mat in mats)


def congruence_search(g1: GramMatrix, g2: GramMatrix, bound: int = DEFAULT_BOUND) -> Optional[Matrix]:
    """Search for a unimodular U with entries in [-bound, bound] and U^T g1 U == g2.

    Columns of U are searched in order; the first witness found is the
    least one when U is read column by column, each column compared
    lexicographically. None means no witness within the bound.

    Raises:
        DimensionMismatch: If the matrices have different sizes
    """
    if g1.dimension != g2.dimension:
        raise DimensionMismatch(f"cannot compare {g1.dimension}x{g1.dimension} with {g2.dimension}x{g2.dimension}")
    n = g1.dimension
    if n == 0:
        return zeros(0, 0)

    variables = sorted(set(g1.variables) | set(g2.variables))
    assignment = {var: 1 for var in variables}
    if specialize(g1, assignment).det() != specialize(g2, assignment).det():
        logger.debug("congruence search: determinants differ at the all-ones point")
        return None

    mats1 = _coefficient_matrices(g1, variables)
    # g2 is compared in the integer units chosen for g1
    scales = []
    for var in variables:
        scale = 1
        for i in range(n):
            for j in range(n):
                scale = ilcm(scale, Rational(g1[i, j].coefficient(var)).q)
        scales.append(scale)

    def target(i, j):
        return tuple(g2[i, j].coefficient(var) * scale for var, scale in zip(variables, scales))

    vectors = [v for v in itertools.product(range(-bound, bound + 1), repeat=n) if any(v)]
    candidates = []
    for j in range(n):
        wanted = target(j, j)
        candidates.append([v for v in vectors if _quadratic(mats1, v, v) == wanted])
        if not candidates[-1]:
            logger.debug("congruence search: no column of norm %s", g2[j, j].format())
            return None

    def extend(columns):
        j = len(columns)
        if j == n:
            u = Matrix(n, n, lambda r, c: columns[c][r])
            return u if is_unimodular(u) else None
        for v in candidates[j]:
            if all(_quadratic(mats1, columns[i], v) == target(i, j) for i in range(j)):
                found = extend(columns + [v])
                if found is not None:
                    return found
        return None

    witness = extend([])
    if witness is None:
        logger.warning("no unimodular congruence within bound %d", bound)
    else:
        logger.debug("congruence witness %s", witness.tolist())
    return witness


def lattice_coordinates(basis: Matrix, vector: Matrix) -> Optional[Matrix]:
    """Integer coordinates of vector (one or more columns) in a full-rank basis, or None."""
    basis, vector = Matrix(basis), Matrix(vector)
    if basis.shape[1] == 0:
        return zeros(0, vector.shape[1]) if all(entry == 0 for entry in vector) else None
    gram = basis.T * basis
    coords = gram.inv() * basis.T * vector
    if basis * coords != vector or any(not entry.is_integer for entry in coords):
        return None
    return coords
