"""The symmetric group S3 as small integer codes.

Elements are 0..5 = e, (12), (13), (23), (123), (132).  Products compose
right to left: ``multiply(a, b)`` applies ``b`` first, so (12)(13) = (132).
"""
from __future__ import annotations

import itertools

import numpy as np

NAMES = ("e", "(12)", "(13)", "(23)", "(123)", "(132)")
# image of (0, 1, 2) under each element
PERMS = ((0, 1, 2), (1, 0, 2), (2, 1, 0), (0, 2, 1), (1, 2, 0), (2, 0, 1))
E = 0
ORDER = 6

_INDEX = {p: i for i, p in enumerate(PERMS)}
MUL = np.array([[_INDEX[tuple(PERMS[a][PERMS[b][i]] for i in range(3))] for b in range(6)] for a in range(6)],
               dtype=np.int8)
INV = np.array([int(np.flatnonzero(MUL[a] == E)[0]) for a in range(6)], dtype=np.int8)

# conjugacy classes: 0 identity, 1 transpositions, 2 three-cycles
CLASSES = ((0,), (1, 2, 3), (4, 5))
CLASS_NAMES = ("identity", "transposition", "3-cycle")
_CLASS_OF = tuple(next(c for c, members in enumerate(CLASSES) if a in members) for a in range(6))

_MUL_T = tuple(tuple(int(v) for v in row) for row in MUL)
_INV_T = tuple(int(v) for v in INV)


def element(x) -> int:
    """Accept an integer code or a name like '(12)'."""
    if isinstance(x, str):
        try:
            return NAMES.index(x.replace(" ", ""))
        except ValueError:
            raise ValueError(f"unknown S3 element {x!r}") from None
    x = int(x)
    if not 0 <= x < ORDER:
        raise ValueError(f"S3 code out of range: {x}")
    return x


def name(a: int) -> str:
    return NAMES[a]


def multiply(a: int, b: int) -> int:
    return _MUL_T[a][b]


def inverse(a: int) -> int:
    return _INV_T[a]


def product(seq) -> int:
    out = E
    for g in seq:
        out = _MUL_T[out][g]
    return out


def conjugate(g1: int, g2: int) -> int:
    """g2^-1 g1 g2."""
    return _MUL_T[_MUL_T[_INV_T[g2]][g1]][g2]


def conjugacy_class(a: int) -> int:
    return _CLASS_OF[a]


def elements():
    return range(ORDER)


def commute(a: int, b: int) -> bool:
    return _MUL_T[a][b] == _MUL_T[b][a]


def perm_matrix(a: int) -> np.ndarray:
    """Matrix P with P e_i = e_{perm(i)}; a faithful representation for cross-checks."""
    m = np.zeros((3, 3), dtype=int)
    for i, j in enumerate(PERMS[a]):
        m[j, i] = 1
    return m


def all_pairs():
    return itertools.product(range(ORDER), repeat=2)
