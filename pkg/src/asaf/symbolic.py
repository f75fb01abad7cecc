"""Symbolic channel matrices.

Entries of the end-to-end channel matrix are sums of monomials in the
fade coefficients (every coefficient is +1; amplify-and-forward chaining
never repeats a monomial).  Matrices stay sparse: only nonzero entries
are stored, keyed by (row, col) position.

Text dump grammar, used verbatim by the golden tests and the CLI::

    g1*h1 0 0
    g1*h2*c12 g2*h2 0
    ...

one row per line, columns separated by a single space, ``0`` for an
empty entry, ``*`` for products and ``+`` for sums.  Symbols are ``g0``,
``g<i>``, ``h<i>`` and ``c<i><j>`` (inter-relay channel from relay i to
relay j).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import NotTriangular, UnresolvedSymbol

__all__ = [
    "FadeSymbol",
    "Monomial",
    "SymbolicEntry",
    "MatrixMeta",
    "SymbolicMatrix",
    "DropPlan",
    "shift_truncate",
    "to_text",
    "numeric_to_text",
    "evaluate",
    "extract_diag",
    "extract_subdiag",
]

_KIND_ORDER = {"g0": 0, "g": 1, "h": 2, "c": 3}


@dataclass(frozen=True)
class FadeSymbol:
    kind: str                          # "g0", "g", "h" or "c"
    i: int = 0                         # relay index (1-based), 0 for g0
    j: int = 0                         # target relay for "c"

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.i, self.j)

    @property
    def token(self) -> str:
        if self.kind == "g0":
            return "g0"
        if self.kind == "c":
            return f"c{self.i}{self.j}"
        return f"{self.kind}{self.i}"

    def fade_index(self, n_relays: int) -> int:
        """Position in the flat coefficient layout of core.FadeDraw."""
        if self.kind == "g0":
            return 0
        if self.i < 1 or self.i > n_relays or (self.kind == "c" and not 1 <= self.j <= n_relays):
            raise UnresolvedSymbol(f"{self.token} outside a {n_relays}-relay draw")
        if self.kind == "g":
            return self.i
        if self.kind == "h":
            return n_relays + self.i
        return 2 * n_relays + (self.i - 1) * n_relays + self.j


def sym_g0():
    return FadeSymbol("g0")


def sym_g(i):
    return FadeSymbol("g", i)


def sym_h(i):
    return FadeSymbol("h", i)


def sym_c(i, j):
    return FadeSymbol("c", i, j)


@dataclass(frozen=True)
class Monomial:
    """Product of fade symbols, canonically ordered (a multiset)."""

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors",
                           tuple(sorted(self.factors, key=FadeSymbol.sort_key)))

    def __mul__(self, other):
        if isinstance(other, FadeSymbol):
            return Monomial(self.factors + (other,))
        return Monomial(self.factors + other.factors)

    def sort_key(self):
        return tuple(f.sort_key() for f in self.factors)

    @property
    def token(self) -> str:
        return "*".join(f.token for f in self.factors)


@dataclass(frozen=True)
class SymbolicEntry:
    """Sum of distinct monomials; all coefficients are +1."""

    monomials: tuple

    def __post_init__(self):
        monos = tuple(sorted(self.monomials, key=Monomial.sort_key))
        if len(set(monos)) != len(monos):
            raise ValueError(f"duplicate monomial in entry: {[m.token for m in monos]}")
        object.__setattr__(self, "monomials", monos)

    @property
    def token(self) -> str:
        if not self.monomials:
            return "0"
        return "+".join(m.token for m in self.monomials)


@dataclass(frozen=True)
class MatrixMeta:
    protocol: str                      # builder tag, e.g. "guard"
    cfg: object = None                 # NetworkConfig
    dp: object = None                  # DelayProfile
    input_labels: tuple = ()           # source symbol indices per column
    output_labels: tuple = ()          # destination sample times per row


@dataclass(frozen=True, eq=False)
class SymbolicMatrix:
    rows: int
    cols: int
    entries: dict = field(default_factory=dict)   # (row, col) -> SymbolicEntry
    meta: MatrixMeta = MatrixMeta(protocol="?")

    def entry(self, r: int, c: int) -> SymbolicEntry | None:
        return self.entries.get((r, c))

    def diag(self) -> list:
        """Diagonal entries by position, None where empty (square only)."""
        return [self.entries.get((i, i)) for i in range(self.rows)]

    def is_lower_triangular(self) -> bool:
        return all(c <= r for r, c in self.entries)


@dataclass(frozen=True)
class DropPlan:
    """Output rows and input columns retained after dropping collisions."""

    keep_outputs: tuple                # row positions, ascending
    keep_inputs: tuple                 # source symbol indices, ascending

    def __post_init__(self):
        if len(self.keep_outputs) != len(self.keep_inputs):
            raise ValueError("drop plan must keep as many outputs as inputs")


# ======================================================================
# shared operations
# ======================================================================

def shift_truncate(samples: Sequence, delta: int, window: int, fill=0) -> list:
    """Misalign a window of samples by ``delta`` positions.

    Positive delta arrives late: contents move right, the last samples
    fall off the window.  Negative delta arrives early: contents move
    left, the first samples are never heard.  Vacated positions take
    ``fill``.
    """
    if len(samples) != window:
        raise ValueError(f"expected {window} samples, got {len(samples)}")
    out = []
    for k in range(window):
        src = k - delta
        out.append(samples[src] if 0 <= src < window else fill)
    return out


def to_text(m: SymbolicMatrix) -> str:
    """Render under the dump grammar; one line per row, trailing newline."""
    lines = []
    for r in range(m.rows):
        toks = []
        for c in range(m.cols):
            e = m.entries.get((r, c))
            toks.append(e.token if e is not None else "0")
        lines.append(" ".join(toks))
    return "\n".join(lines) + "\n"


def _fmt_complex(z: complex) -> str:
    if z == 0:
        return "0"
    re, im = z.real, z.imag
    return f"{re:.9g}{'+' if im >= 0 else '-'}{abs(im):.9g}i"


def numeric_to_text(values: np.ndarray) -> str:
    """Numeric dump: a+bi with 9 significant digits, 0 for exact zeros."""
    lines = []
    for row in np.atleast_2d(values):
        lines.append(" ".join(_fmt_complex(z) for z in row))
    return "\n".join(lines) + "\n"


def evaluate(m: SymbolicMatrix, fades) -> np.ndarray:
    """Substitute a FadeDraw into the matrix; dense complex result."""
    vec = fades.vector
    n = fades.n_relays
    out = np.zeros((m.rows, m.cols), dtype=np.complex128)
    for (r, c), e in m.entries.items():
        acc = 0.0 + 0.0j
        for mono in e.monomials:
            v = 1.0 + 0.0j
            for f in mono.factors:
                v *= vec[f.fade_index(n)]
            acc += v
        out[r, c] = acc
    return out


# ======================================================================
# structural extraction
# ======================================================================

def _require_square(m: SymbolicMatrix, what: str):
    if m.rows != m.cols:
        raise NotTriangular(f"{what} needs a square matrix, got {m.rows}x{m.cols}")


def extract_diag(m: SymbolicMatrix) -> SymbolicMatrix:
    """Keep only the main diagonal."""
    _require_square(m, "extract_diag")
    kept = {(r, c): e for (r, c), e in m.entries.items() if r == c}
    return SymbolicMatrix(rows=m.rows, cols=m.cols, entries=kept, meta=m.meta)


def extract_subdiag(m: SymbolicMatrix) -> SymbolicMatrix:
    """Keep only the sub-diagonal band of relayed contributions.

    Banded matrices (at most one below-diagonal entry per row, as the
    direct-link builders produce) keep every below-diagonal entry.
    Otherwise the band nearest the diagonal, i.e. the smallest positive
    row-col offset that carries entries, is kept.
    """
    _require_square(m, "extract_subdiag")
    below = [(r, c) for (r, c) in m.entries if c < r]
    per_row = {}
    for r, c in below:
        per_row[r] = per_row.get(r, 0) + 1
    if below and max(per_row.values()) > 1:
        off = min(r - c for r, c in below)
        below = [(r, c) for (r, c) in below if r - c == off]
    kept = {(r, c): m.entries[(r, c)] for r, c in below}
    return SymbolicMatrix(rows=m.rows, cols=m.cols, entries=kept, meta=m.meta)
