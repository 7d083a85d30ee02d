"""Semantic value domains shared by all models: extended naturals, size
maps, order ideals represented by antichains of maximal generators, pairs,
and (lazily joined) semantic functions.

Everything here is immutable and pure.  Joins and meets on first-order data
are computed pointwise; joins and meets of functions are represented lazily.
Ideals store only function-free elements: the order on semantic functions is
not decidable, and the shipped models only place data inside sums.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union


class SemError(Exception):
    pass


class UnsupportedFeature(SemError):
    """A construction the model cannot interpret (e.g. an arrow shape
    functor under size abstraction, or a function inside a sum).
    """


# ---------------------------------------------------------------------------
# Extended naturals
# ---------------------------------------------------------------------------


@functools.total_ordering
@dataclass(frozen=True)
class ExtNat:
    """A natural number or infinity (value None means infinity)."""

    value: Optional[int]

    def __post_init__(self):
        if self.value is not None and self.value < 0:
            raise SemError("extended naturals are non-negative")

    @property
    def is_inf(self) -> bool:
        return self.value is None

    def __add__(self, other: "ExtNat") -> "ExtNat":
        if self.is_inf or other.is_inf:
            return INF
        return ExtNat(self.value + other.value)

    def __le__(self, other: "ExtNat") -> bool:
        if other.is_inf:
            return True
        if self.is_inf:
            return False
        return self.value <= other.value

    def max(self, other: "ExtNat") -> "ExtNat":
        return other if self <= other else self

    def min(self, other: "ExtNat") -> "ExtNat":
        return self if self <= other else other

    def minus(self, k: int) -> "ExtNat":
        """Truncated subtraction of a finite amount."""
        if self.is_inf:
            return INF
        return ExtNat(max(self.value - k, 0))

    def __str__(self):
        return "inf" if self.is_inf else str(self.value)


INF = ExtNat(None)
ZERO = ExtNat(0)
ONE = ExtNat(1)


def ext(n: Union[int, ExtNat, None]) -> ExtNat:
    if isinstance(n, ExtNat):
        return n
    return ExtNat(n)


# ---------------------------------------------------------------------------
# Size maps (all-constructors potentials)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SizeMap:
    """A finite map from datatype identity (a closed inductive recurrence
    type) to an extended natural, defaulting to 0.  Zero entries are not
    stored, so equality is canonical.
    """

    entries: frozenset = frozenset()  # of (RecType, ExtNat) pairs

    @staticmethod
    def of(mapping: dict) -> "SizeMap":
        return SizeMap(frozenset((k, ext(v)) for k, v in mapping.items() if ext(v) != ZERO))

    def get(self, delta) -> ExtNat:
        for k, v in self.entries:
            if k == delta:
                return v
        return ZERO

    def as_dict(self) -> dict:
        return {k: v for k, v in self.entries}

    def set(self, delta, n: ExtNat) -> "SizeMap":
        d = self.as_dict()
        d[delta] = n
        return SizeMap.of(d)

    def pointwise(self, other: "SizeMap", op) -> "SizeMap":
        keys = {k for k, _ in self.entries} | {k for k, _ in other.entries}
        return SizeMap.of({k: op(self.get(k), other.get(k)) for k in keys})

    def join(self, other: "SizeMap") -> "SizeMap":
        return self.pointwise(other, lambda a, b: a.max(b))

    def meet(self, other: "SizeMap") -> "SizeMap":
        return self.pointwise(other, lambda a, b: a.min(b))

    def add(self, other: "SizeMap") -> "SizeMap":
        return self.pointwise(other, lambda a, b: a + b)

    def leq(self, other: "SizeMap") -> bool:
        keys = {k for k, _ in self.entries} | {k for k, _ in other.entries}
        return all(self.get(k) <= other.get(k) for k in keys)

    def __str__(self):
        from .rec_lang import pretty_rec_type

        items = sorted(
            ((pretty_rec_type(k), str(v)) for k, v in self.entries), key=lambda p: p[0]
        )
        inner = ", ".join(f"{k}: {v}" for k, v in items)
        return "{" + inner + "}"


# ---------------------------------------------------------------------------
# Semantic values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SStar:
    """The unit value."""

    def __str__(self):
        return "*"


@dataclass(frozen=True)
class SNum:
    """A number in a cost or size position; the kind fixes the bottom
    element (0 for costs, 1 for sizes).
    """

    kind: str  # 'cost' | 'size'
    num: ExtNat

    def __str__(self):
        return str(self.num)


@dataclass(frozen=True)
class SMap:
    sizemap: SizeMap

    def __str__(self):
        return str(self.sizemap)


@dataclass(frozen=True)
class SPair:
    left: "SemValue"
    right: "SemValue"

    def __str__(self):
        return f"({self.left}, {self.right})"


@dataclass(frozen=True)
class SIdeal:
    """An order ideal in O(A + B), represented by antichains of maximal
    generators for each side.  The denoted ideal is the downward closure.
    """

    left: tuple = ()
    right: tuple = ()

    def __str__(self):
        ls = ", ".join(str(v) for v in self.left)
        rs = ", ".join(str(v) for v in self.right)
        return "{" + ls + "}⊔{" + rs + "}"


@dataclass(frozen=True, eq=False)
class SFun:
    """A monotone semantic function.  Compared by identity; joins and meets
    of functions are built lazily.
    """

    fn: Callable[["SemValue"], "SemValue"]

    def __call__(self, a: "SemValue") -> "SemValue":
        return self.fn(a)

    def __str__(self):
        return "<fun>"


@dataclass(frozen=True, eq=False)
class SPoly:
    """A type-indexed family of semantic values (the denotation of a type
    abstraction); instantiation is memoized per closed type argument.
    """

    fn: Callable[[object], "SemValue"]
    _cache: dict = field(default_factory=dict, compare=False)

    def at(self, ty) -> "SemValue":
        if ty not in self._cache:
            self._cache[ty] = self.fn(ty)
        return self._cache[ty]

    def __str__(self):
        return "<polyfun>"


@dataclass(frozen=True)
class XCons:
    """Exact-model inductive value: a constructor applied to data."""

    delta: object  # closed inductive RecType
    arg: "SemValue"

    def __str__(self):
        return f"cons({self.arg})"


@dataclass(frozen=True)
class XInj:
    """Exact-model sum value."""

    index: int
    arg: "SemValue"

    def __str__(self):
        return f"inj{self.index} {self.arg}"


SemValue = Union[SStar, SNum, SMap, SPair, SIdeal, SFun, SPoly, XCons, XInj]


def is_function_free(v: SemValue) -> bool:
    match v:
        case SStar() | SNum() | SMap():
            return True
        case SPair(l, r):
            return is_function_free(l) and is_function_free(r)
        case SIdeal(l, r):
            return all(is_function_free(x) for x in l + r)
        case XCons(_, a) | XInj(_, a):
            return is_function_free(a)
        case SFun() | SPoly():
            return False
    raise SemError(f"not a semantic value: {v!r}")


# ---------------------------------------------------------------------------
# The preorder
# ---------------------------------------------------------------------------


def sem_leq(a: SemValue, b: SemValue) -> bool:
    """The size order on representable (function-free) values."""
    match (a, b):
        case (SStar(), SStar()):
            return True
        case (SNum(_, x), SNum(_, y)):
            return x <= y
        case (SMap(x), SMap(y)):
            return x.leq(y)
        case (SPair(l1, r1), SPair(l2, r2)):
            return sem_leq(l1, l2) and sem_leq(r1, r2)
        case (SIdeal(l1, r1), SIdeal(l2, r2)):
            return _gens_leq(l1, l2) and _gens_leq(r1, r2)
        case (XCons(d1, x), XCons(d2, y)):
            return d1 == d2 and sem_leq(x, y)  # exact order: equality
        case (XInj(i, x), XInj(j, y)):
            return i == j and sem_leq(x, y)
    if isinstance(a, (SFun, SPoly)) or isinstance(b, (SFun, SPoly)):
        raise UnsupportedFeature("the order on semantic functions is not decidable")
    raise SemError(f"incomparable semantic values: {a} vs {b}")


def _gens_leq(xs: tuple, ys: tuple) -> bool:
    return all(any(sem_leq(x, y) for y in ys) for x in xs)


def sem_eq(a: SemValue, b: SemValue) -> bool:
    return sem_leq(a, b) and sem_leq(b, a)


# ---------------------------------------------------------------------------
# Antichains and ideals
# ---------------------------------------------------------------------------


def antichain(items: Iterable[SemValue]) -> tuple:
    """Prune dominated generators, keeping the maximal ones (first of any
    equal pair wins, so the result is canonical up to order).

    Generators containing functions (which arise transiently when a fold
    maps its recursive results into an unfolded sum before the step consumes
    them) are kept unpruned: the order on functions is not decidable, and an
    unpruned generator set denotes the same ideal.
    """
    items = list(items)
    if not all(is_function_free(x) for x in items):
        return tuple(items)
    out: list[SemValue] = []
    for x in items:
        if any(sem_leq(x, y) for y in out):
            continue
        out = [y for y in out if not sem_leq(y, x)]
        out.append(x)
    return tuple(sorted(out, key=str))


def ideal_inj(index: int, v: SemValue) -> SIdeal:
    if index == 0:
        return SIdeal(antichain([v]), ())
    return SIdeal((), antichain([v]))


def ideal_join(ideals: Iterable[SIdeal]) -> SIdeal:
    ls: list[SemValue] = []
    rs: list[SemValue] = []
    for i in ideals:
        ls.extend(i.left)
        rs.extend(i.right)
    return SIdeal(antichain(ls), antichain(rs))


def ideal_meet(a: SIdeal, b: SIdeal) -> SIdeal:
    """Intersection of downward closures: pairwise meets of generators."""
    ls = [sem_meet_val(x, y) for x in a.left for y in b.left]
    rs = [sem_meet_val(x, y) for x in a.right for y in b.right]
    return SIdeal(antichain(ls), antichain(rs))


def ideal_case(x: SIdeal, f0, f1, empty: SemValue) -> SemValue:
    """Eliminate a sum ideal: the join of the branch functions over the
    generators of each side.  Valid for monotone branches, where the
    supremum over a downward-closed set is attained on its generators; the
    empty join is the supplied bottom element.
    """
    images = [f0(g) for g in x.left] + [f1(g) for g in x.right]
    if not images:
        return empty
    return sem_join_vals(images)


# ---------------------------------------------------------------------------
# Joins and meets
# ---------------------------------------------------------------------------


def sem_join_vals(vals: list[SemValue]) -> SemValue:
    """Least upper bound of a non-empty list of values of one semantic
    type.  Function joins are lazy (pointwise).
    """
    if not vals:
        raise SemError("empty join needs a type to supply the bottom element")
    out = vals[0]
    for v in vals[1:]:
        out = _join2(out, v)
    return out


def _join2(a: SemValue, b: SemValue) -> SemValue:
    match (a, b):
        case (SStar(), SStar()):
            return a
        case (SNum(k, x), SNum(_, y)):
            return SNum(k, x.max(y))
        case (SMap(x), SMap(y)):
            return SMap(x.join(y))
        case (SPair(l1, r1), SPair(l2, r2)):
            return SPair(_join2(l1, l2), _join2(r1, r2))
        case (SIdeal(), SIdeal()):
            return ideal_join([a, b])
        case (SFun(), SFun()):
            return SFun(lambda z, f=a, g=b: _join2(f(z), g(z)))
        case (SPoly(), SPoly()):
            return SPoly(lambda ty, f=a, g=b: _join2(f.at(ty), g.at(ty)))
    raise SemError(f"cannot join {a} with {b}")


def sem_meet_val(a: SemValue, b: SemValue) -> SemValue:
    match (a, b):
        case (SStar(), SStar()):
            return a
        case (SNum(k, x), SNum(_, y)):
            return SNum(k, x.min(y))
        case (SMap(x), SMap(y)):
            return SMap(x.meet(y))
        case (SPair(l1, r1), SPair(l2, r2)):
            return SPair(sem_meet_val(l1, l2), sem_meet_val(r1, r2))
        case (SIdeal(), SIdeal()):
            return ideal_meet(a, b)
        case (SFun(), SFun()):
            return SFun(lambda z, f=a, g=b: sem_meet_val(f(z), g(z)))
        case (SPoly(), SPoly()):
            return SPoly(lambda ty, f=a, g=b: sem_meet_val(f.at(ty), g.at(ty)))
    raise SemError(f"cannot meet {a} with {b}")


def sem_meet_vals(vals: list[SemValue]) -> SemValue:
    if not vals:
        raise SemError("empty meet needs a type to supply the top element")
    out = vals[0]
    for v in vals[1:]:
        out = sem_meet_val(out, v)
    return out
