"""Denotational models of the recurrence language over the standard type
frame (semantic types are closed recurrence types).

Six models ship:

* ``exact``   — set-theoretic, order is equality; folds are structural
                recursion.  Costs and potentials are exact.
* ``size``    — inductive values interpreted by their main-constructor
                count (list length + 1, tree size 2n+1, numeral n+1).
* ``height``  — like ``size`` but products of recursive positions take
                maxima, so trees are measured by constructor depth.
* ``allcons`` — inductive values interpreted by a map from every datatype
                to a constructor count.
* ``merged``  — the all-constructors model with polymorphic values routed
                through abstraction/concretization to the size model, so
                instantiating a polymorphic recurrence sees only main
                constructor counts.
* ``lower``   — the size model with the cost order reversed: destructors
                and folds take meets over decompositions, yielding lower
                bounds.

Folds in the abstract models follow the least-upper-bound recipe: the value
at ``x`` is the join of the step function over the maximal decompositions
``z`` with ``cons z <= x`` (meet over minimal decompositions with
``cons z >= x`` in the lower model).  Only polynomial shape functors (sums,
products, constants, the recursion variable) are enumerable; arrow shapes
raise ``UnsupportedFeature`` except in the exact model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import source_ast as S
from .extract import potential_type
from .rec_lang import (
    RApp, RArrow, RC, RCase, RConsE, RDestE, RecElab, RecExpr, RecShape,
    RecType, RFold, RForall, RInd, RInj, RLam, ROne, RPair, RPlus, RProd,
    RProj, RSArrow, RSConst, RSProd, RSRec, RSSum, RSum, RTVar, RTyApp,
    RTyLam, RUnit, RUnitE, RVar, RZero, check_rec, pretty_rec_type,
    rec_free_vars, subst_rec_shape, subst_rtyvars, quantifier_free,
)
from .semdom import (
    INF, ONE, ZERO, ExtNat, SFun, SIdeal, SMap, SNum, SPair, SPoly, SStar,
    SemError, SemValue, SizeMap, UnsupportedFeature, XCons, XInj, antichain,
    ext, ideal_case, sem_join_vals, sem_leq, sem_meet_vals,
)


class ModelError(SemError):
    pass


# ---------------------------------------------------------------------------
# Closed-type utilities
# ---------------------------------------------------------------------------


def support_datatypes(ty: RecType) -> frozenset:
    """All closed inductive types occurring syntactically in ``ty``
    (including itself), the index set for size maps.
    """
    out: set = set()

    def go_ty(t: RecType):
        match t:
            case RTVar(_) | RC() | RUnit():
                return
            case RProd(l, r) | RSum(l, r):
                go_ty(l)
                go_ty(r)
            case RArrow(d, c):
                go_ty(d)
                go_ty(c)
            case RInd(f, _):
                if t not in out:
                    out.add(t)
                    go_shape(f)
            case RForall(_, b):
                go_ty(b)

    def go_shape(f: RecShape):
        match f:
            case RSRec():
                return
            case RSConst(t):
                go_ty(t)
            case RSProd(l, r) | RSSum(l, r):
                go_shape(l)
                go_shape(r)
            case RSArrow(d, b):
                go_ty(d)
                go_shape(b)

    go_ty(ty)
    return frozenset(out)


def shape_is_polynomial(f: RecShape) -> bool:
    match f:
        case RSRec():
            return True
        case RSConst(_):
            return True
        case RSProd(l, r) | RSSum(l, r):
            return shape_is_polynomial(l) and shape_is_polynomial(r)
        case RSArrow(_, _):
            return False
    return False


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------


@dataclass
class SemEnv:
    """Type variables map to closed recurrence types, term variables to
    semantic values.
    """

    tyvars: dict[str, RecType] = field(default_factory=dict)
    vals: dict[str, SemValue] = field(default_factory=dict)

    def with_val(self, name: str, v: SemValue) -> "SemEnv":
        out = dict(self.vals)
        out[name] = v
        return SemEnv(self.tyvars, out)

    def with_tyvar(self, name: str, ty: RecType) -> "SemEnv":
        out = dict(self.tyvars)
        out[name] = ty
        return SemEnv(out, self.vals)

    def close(self, ty: RecType) -> RecType:
        return subst_rtyvars(ty, self.tyvars)


# ---------------------------------------------------------------------------
# Abstract models (size / height / allcons and the lower dual)
# ---------------------------------------------------------------------------


class Model:
    """A table of semantic operators indexed by closed recurrence types."""

    name: str = "?"
    direction: str = "upper"  # 'upper' | 'lower' | 'exact'

    def __init__(self):
        self._fold_cache: dict = {}

    # -- lattice structure ---------------------------------------------------

    def bottom(self, ty: RecType) -> SemValue:
        match ty:
            case RC():
                return SNum("cost", ZERO)
            case RUnit():
                return SStar()
            case RProd(l, r):
                return SPair(self.bottom(l), self.bottom(r))
            case RSum(_, _):
                return SIdeal((), ())
            case RArrow(_, c):
                return SFun(lambda _a, t=c: self.bottom(t))
            case RInd(_, _):
                return self.ind_bottom(ty)
            case RForall(a, b):
                return SPoly(lambda sigma: self.bottom(subst_rtyvars(b, {a: sigma})))
        raise ModelError(f"no bottom at type {pretty_rec_type(ty)}")

    def top(self, ty: RecType) -> SemValue:
        match ty:
            case RC():
                return SNum("cost", INF)
            case RUnit():
                return SStar()
            case RProd(l, r):
                return SPair(self.top(l), self.top(r))
            case RSum(l, r):
                return SIdeal(antichain([self.top(l)]), antichain([self.top(r)]))
            case RArrow(_, c):
                return SFun(lambda _a, t=c: self.top(t))
            case RInd(_, _):
                return self.ind_top(ty)
            case RForall(a, b):
                return SPoly(lambda sigma: self.top(subst_rtyvars(b, {a: sigma})))
        raise ModelError(f"no top at type {pretty_rec_type(ty)}")

    def join(self, vals: list[SemValue], ty: RecType) -> SemValue:
        if not vals:
            return self.bottom(ty)
        return sem_join_vals(vals)

    def meet(self, vals: list[SemValue], ty: RecType) -> SemValue:
        if not vals:
            return self.top(ty)
        return sem_meet_vals(vals)

    # -- structural operators --------------------------------------------------

    def inj(self, index: int, v: SemValue, sum_ty: RecType) -> SemValue:
        if index == 0:
            return SIdeal(antichain([v]), ())
        return SIdeal((), antichain([v]))

    def case(self, scrut: SemValue, f0, f1, result_ty: RecType) -> SemValue:
        if not isinstance(scrut, SIdeal):
            raise ModelError(f"case scrutinee is not an ideal: {scrut}")
        return ideal_case(scrut, f0, f1, self.bottom(result_ty))

    # -- inductive types (model specific) --------------------------------------

    def ind_bottom(self, delta: RInd) -> SemValue:
        raise NotImplementedError

    def ind_top(self, delta: RInd) -> SemValue:
        raise NotImplementedError

    def cons(self, delta: RInd, z: SemValue) -> SemValue:
        raise NotImplementedError

    def dest(self, delta: RInd, x: SemValue) -> SemValue:
        raise NotImplementedError

    def fold(self, delta: RInd, result_ty: RecType, step, x: SemValue,
             cache_key=None) -> SemValue:
        raise NotImplementedError

    # -- polymorphism -----------------------------------------------------------

    def tyabs(self, fn: Callable[[RecType], SemValue], var: str,
              body_ty: RecType) -> SemValue:
        return SPoly(fn)

    def tyapp(self, v: SemValue, sigma: RecType, var: str, body_ty: RecType) -> SemValue:
        if not isinstance(v, SPoly):
            raise ModelError("type application of a non-polymorphic value")
        return v.at(sigma)

    # -- functorial action -------------------------------------------------------

    def map_shape(self, f: RecShape, g: Callable[[SemValue], SemValue],
                  x: SemValue) -> SemValue:
        """The action of a shape functor on a semantic function."""
        match f:
            case RSRec():
                return g(x)
            case RSConst(_):
                return x
            case RSProd(l, r):
                if not isinstance(x, SPair):
                    raise ModelError("product shape expects a pair")
                return SPair(self.map_shape(l, g, x.left), self.map_shape(r, g, x.right))
            case RSSum(l, r):
                if not isinstance(x, SIdeal):
                    raise ModelError("sum shape expects an ideal")
                return SIdeal(
                    antichain(self.map_shape(l, g, v) for v in x.left),
                    antichain(self.map_shape(r, g, v) for v in x.right),
                )
            case RSArrow(_, b):
                if not isinstance(x, SFun):
                    raise ModelError("arrow shape expects a function")
                return SFun(lambda y, b=b, x=x: self.map_shape(b, g, x(y)))
        raise ModelError(f"not a shape functor: {f!r}")


def _shape_min_need(f: RecShape, mode: str) -> int:
    """Least main-constructor budget a value of this shape can consume."""
    match f:
        case RSRec():
            return 1
        case RSConst(_):
            return 0
        case RSProd(l, r):
            if mode == "height":
                return max(_shape_min_need(l, mode), _shape_min_need(r, mode))
            return _shape_min_need(l, mode) + _shape_min_need(r, mode)
        case RSSum(l, r):
            return 0  # the empty ideal consumes nothing
        case RSArrow(_, _):
            raise UnsupportedFeature(
                "arrow shape functors cannot be enumerated under size abstraction"
            )
    raise ModelError(f"not a shape functor: {f!r}")


def _shape_max_useful(f: RecShape, budget: int, mode: str) -> int:
    match f:
        case RSRec():
            return budget
        case RSConst(_):
            return 0
        case RSProd(l, r):
            if mode == "height":
                return budget
            return min(budget, _shape_max_useful(l, budget, mode) + _shape_max_useful(r, budget, mode))
        case RSSum(_, _):
            return budget
        case RSArrow(_, _):
            raise UnsupportedFeature(
                "arrow shape functors cannot be enumerated under size abstraction"
            )
    raise ModelError(f"not a shape functor: {f!r}")


class SizeHeightModel(Model):
    """Main-constructor counting: sizes are extended naturals at least 1.
    mode='size' sums recursive positions across products, mode='height'
    takes their maximum.
    """

    def __init__(self, mode: str = "size"):
        super().__init__()
        self.mode = mode
        self.name = mode

    def ind_bottom(self, delta: RInd) -> SemValue:
        return SNum("size", ONE)

    def ind_top(self, delta: RInd) -> SemValue:
        return SNum("size", INF)

    # size_F: the size of the inductive value built from data z
    def size_of(self, f: RecShape, z: SemValue) -> ExtNat:
        match f:
            case RSRec():
                if not isinstance(z, SNum):
                    raise ModelError("recursive position expects a size")
                return z.num
            case RSConst(_):
                return ZERO
            case RSSum(l, r):
                if not isinstance(z, SIdeal):
                    raise ModelError("sum shape expects an ideal")
                best = ZERO
                for g in z.left:
                    best = best.max(self.size_of(l, g))
                for g in z.right:
                    best = best.max(self.size_of(r, g))
                return best
            case RSProd(l, r):
                if not isinstance(z, SPair):
                    raise ModelError("product shape expects a pair")
                a, b = self.size_of(l, z.left), self.size_of(r, z.right)
                return a.max(b) if self.mode == "height" else a + b
            case RSArrow(_, _):
                raise UnsupportedFeature(
                    "arrow shape functors are not supported under size abstraction"
                )
        raise ModelError(f"not a shape functor: {f!r}")

    def cons(self, delta: RInd, z: SemValue) -> SemValue:
        return SNum("size", ONE + self.size_of(delta.functor, z))

    def _enumerate_max(self, f: RecShape, budget: int) -> list[SemValue]:
        """Maximal z with size_F(z) <= budget, as an antichain."""
        match f:
            case RSRec():
                return [SNum("size", ExtNat(budget))] if budget >= 1 else []
            case RSConst(t):
                return [self.top(t)]
            case RSSum(l, r):
                return [SIdeal(
                    antichain(self._enumerate_max(l, budget)),
                    antichain(self._enumerate_max(r, budget)),
                )]
            case RSProd(l, r):
                out: list[SemValue] = []
                if self.mode == "height":
                    for a in self._enumerate_max(l, budget):
                        for b in self._enumerate_max(r, budget):
                            out.append(SPair(a, b))
                    return list(antichain(out))
                lo = _shape_min_need(l, self.mode)
                hi = budget - _shape_min_need(r, self.mode)
                hi = min(hi, _shape_max_useful(l, budget, self.mode))
                for bl in range(lo, hi + 1):
                    br = budget - bl
                    for a in self._enumerate_max(l, bl):
                        for b in self._enumerate_max(r, min(br, _shape_max_useful(r, br, self.mode))):
                            out.append(SPair(a, b))
                return list(antichain(out))
            case RSArrow(_, _):
                raise UnsupportedFeature(
                    "arrow shape functors are not supported under size abstraction"
                )
        raise ModelError(f"not a shape functor: {f!r}")

    def dest(self, delta: RInd, x: SemValue) -> SemValue:
        if not isinstance(x, SNum):
            raise ModelError("destructing a non-size")
        unfold_ty = subst_rec_shape(delta.functor, delta)
        if x.num.is_inf:
            return self.top(unfold_ty)
        zs = self._enumerate_max(delta.functor, x.num.value - 1)
        return self.join(zs, unfold_ty)

    def fold(self, delta: RInd, result_ty: RecType, step, x: SemValue,
             cache_key=None) -> SemValue:
        if not isinstance(x, SNum):
            raise ModelError("folding a non-size")
        if not shape_is_polynomial(delta.functor):
            raise UnsupportedFeature("fold over a non-polynomial shape functor")
        cache = self._fold_cache.setdefault(cache_key, {}) if cache_key else None

        def go(n: ExtNat) -> SemValue:
            if cache is not None and n in cache:
                return cache[n]
            if n.is_inf:
                out = self.top(result_ty)
            else:
                zs = self._enumerate_max(delta.functor, n.value - 1)
                rec = SFun(lambda m: go(m.num) if isinstance(m, SNum) else go(ext(0)))
                images = [step(self.map_shape(delta.functor, rec, z)) for z in zs]
                out = self.join(images, result_ty)
            if cache is not None:
                cache[n] = out
            return out

        return go(x.num)


class LowerSizeModel(SizeHeightModel):
    """The dual of the size model: same carriers, cost order reversed.
    Destructor and fold take meets over minimal decompositions, so every
    computed cost is a lower bound.
    """

    direction = "lower"

    def __init__(self):
        super().__init__("size")
        self.name = "lower"

    # case, injections, pairs, and functions are interpreted exactly as in
    # the size model; only the datatype operators change.

    def _enumerate_min(self, f: RecShape, budget: int) -> list[SemValue]:
        """Minimal z with size_F(z) >= budget."""
        if budget <= 0:
            return [self.bottom(_shape_value_type(f))]
        match f:
            case RSRec():
                return [SNum("size", ExtNat(max(budget, 1)))]
            case RSConst(t):
                return []  # constants have size 0 < budget
            case RSSum(l, r):
                out: list[SemValue] = []
                for g in self._enumerate_min(l, budget):
                    out.append(SIdeal(antichain([g]), ()))
                for g in self._enumerate_min(r, budget):
                    out.append(SIdeal((), antichain([g])))
                return _min_antichain(out)
            case RSProd(l, r):
                out = []
                for bl in range(0, budget + 1):
                    for a in self._enumerate_min(l, bl):
                        for b in self._enumerate_min(r, budget - bl):
                            out.append(SPair(a, b))
                return _min_antichain(out)
            case RSArrow(_, _):
                raise UnsupportedFeature(
                    "arrow shape functors are not supported under size abstraction"
                )
        raise ModelError(f"not a shape functor: {f!r}")

    def dest(self, delta: RInd, x: SemValue) -> SemValue:
        if not isinstance(x, SNum):
            raise ModelError("destructing a non-size")
        unfold_ty = subst_rec_shape(delta.functor, delta)
        if x.num.is_inf:
            return self.bottom(unfold_ty)
        zs = self._enumerate_min(delta.functor, x.num.value - 1)
        return self.meet(zs, unfold_ty)

    def fold(self, delta: RInd, result_ty: RecType, step, x: SemValue,
             cache_key=None) -> SemValue:
        if not isinstance(x, SNum):
            raise ModelError("folding a non-size")
        if not shape_is_polynomial(delta.functor):
            raise UnsupportedFeature("fold over a non-polynomial shape functor")
        cache = self._fold_cache.setdefault(cache_key, {}) if cache_key else None

        def go(n: ExtNat) -> SemValue:
            if cache is not None and n in cache:
                return cache[n]
            if n.is_inf:
                out = self.bottom(result_ty)
            elif n.value <= 1:
                # the empty ideal decomposition qualifies, so the meet is
                # the bottom of the codomain
                out = self.bottom(result_ty)
            else:
                zs = self._enumerate_min(delta.functor, n.value - 1)
                rec = SFun(lambda m: go(m.num) if isinstance(m, SNum) else go(ext(1)))
                images = [step(self.map_shape(delta.functor, rec, z)) for z in zs]
                out = self.meet(images, result_ty)
            if cache is not None:
                cache[n] = out
            return out

        return go(x.num)


def _shape_value_type(f: RecShape) -> RecType:
    # the type of values of this shape with a size at recursive positions;
    # only used to build bottoms, where the recursive position is a size
    return subst_rec_shape(f, RInd(RSRec()))


def _min_antichain(items: list[SemValue]) -> list[SemValue]:
    out: list[SemValue] = []
    for x in items:
        if any(sem_leq(y, x) for y in out):
            continue
        out = [y for y in out if not sem_leq(x, y)]
        out.append(x)
    return sorted(out, key=str)


class AllConsModel(Model):
    """Counting every datatype's constructors: an inductive value denotes a
    map from each closed datatype to a count; products add at the main
    datatype and take maxima elsewhere.
    """

    name = "allcons"

    def ind_bottom(self, delta: RInd) -> SemValue:
        return SMap(SizeMap.of({delta: ONE}))

    def ind_top(self, delta: RInd) -> SemValue:
        return SMap(SizeMap.of({d: INF for d in support_datatypes(delta)}))

    # -- the size function, tracking the main datatype --------------------------

    def size_all(self, f: RecShape, delta: RInd, z: SemValue) -> SizeMap:
        match f:
            case RSRec():
                if not isinstance(z, SMap):
                    raise ModelError("recursive position expects a size map")
                return z.sizemap
            case RSConst(t):
                return self._const_contrib(t, z, delta)
            case RSSum(l, r):
                if not isinstance(z, SIdeal):
                    raise ModelError("sum shape expects an ideal")
                out = SizeMap.of({})
                for g in z.left:
                    out = out.join(self.size_all(l, delta, g))
                for g in z.right:
                    out = out.join(self.size_all(r, delta, g))
                return out
            case RSProd(l, r):
                if not isinstance(z, SPair):
                    raise ModelError("product shape expects a pair")
                a = self.size_all(l, delta, z.left)
                b = self.size_all(r, delta, z.right)
                joined = a.join(b)
                return joined.set(delta, a.get(delta) + b.get(delta))
            case RSArrow(_, _):
                raise UnsupportedFeature(
                    "arrow shape functors are not supported under size abstraction"
                )
        raise ModelError(f"not a shape functor: {f!r}")

    def _const_contrib(self, ty: RecType, z: SemValue, delta: RInd) -> SizeMap:
        """Constructor counts inside a constant position, decomposed
        structurally (the alternative functor grammar that spells out the
        closed-type production).  The main datatype cannot occur inside a
        constant of its own functor, so products inside constants never add
        at the main entry.
        """
        match ty:
            case RC() | RUnit():
                return SizeMap.of({})
            case RInd(_, _):
                if not isinstance(z, SMap):
                    raise ModelError("inductive constant expects a size map")
                return z.sizemap
            case RProd(l, r):
                if not isinstance(z, SPair):
                    raise ModelError("product constant expects a pair")
                a = self._const_contrib(l, z.left, delta)
                b = self._const_contrib(r, z.right, delta)
                joined = a.join(b)
                return joined.set(delta, a.get(delta) + b.get(delta))
            case RSum(l, r):
                if not isinstance(z, SIdeal):
                    raise ModelError("sum constant expects an ideal")
                out = SizeMap.of({})
                for g in z.left:
                    out = out.join(self._const_contrib(l, g, delta))
                for g in z.right:
                    out = out.join(self._const_contrib(r, g, delta))
                return out
            case RArrow(_, _):
                raise UnsupportedFeature(
                    "arrow types inside datatypes are not supported under size abstraction"
                )
        raise ModelError(f"cannot measure constants of type {pretty_rec_type(ty)}")

    def cons(self, delta: RInd, z: SemValue) -> SemValue:
        sm = self.size_all(delta.functor, delta, z)
        return SMap(sm.set(delta, sm.get(delta) + ONE))

    # -- decomposition ------------------------------------------------------------

    def _clip_top(self, ty: RecType, phi: SizeMap) -> Optional[SemValue]:
        """The greatest value of a constant type whose constructor counts
        stay within phi; None when no value fits.
        """
        match ty:
            case RC():
                return SNum("cost", INF)
            case RUnit():
                return SStar()
            case RInd(_, _):
                if phi.get(ty) < ONE:
                    return None  # a value needs at least one own constructor
                entries = {d: phi.get(d) for d in support_datatypes(ty)}
                return SMap(SizeMap.of(entries))
            case RProd(l, r):
                a, b = self._clip_top(l, phi), self._clip_top(r, phi)
                if a is None or b is None:
                    return None
                return SPair(a, b)
            case RSum(l, r):
                a, b = self._clip_top(l, phi), self._clip_top(r, phi)
                return SIdeal(
                    antichain([a] if a is not None else []),
                    antichain([b] if b is not None else []),
                )
            case RArrow(_, _):
                raise UnsupportedFeature(
                    "arrow types inside datatypes are not supported under size abstraction"
                )
        raise ModelError(f"cannot clip type {pretty_rec_type(ty)}")

    def _enumerate_max(self, f: RecShape, delta: RInd, phi: SizeMap,
                       budget: int) -> list[SemValue]:
        """Maximal z with cons-counts within phi and main count <= budget."""
        match f:
            case RSRec():
                if budget < 1:
                    return []
                entries = {d: phi.get(d) for d in support_datatypes(delta)}
                entries[delta] = ExtNat(budget)
                return [SMap(SizeMap.of(entries))]
            case RSConst(t):
                v = self._clip_top(t, phi)
                return [v] if v is not None else []
            case RSSum(l, r):
                return [SIdeal(
                    antichain(self._enumerate_max(l, delta, phi, budget)),
                    antichain(self._enumerate_max(r, delta, phi, budget)),
                )]
            case RSProd(l, r):
                out: list[SemValue] = []
                lo = _shape_min_need(l, "size")
                hi = budget - _shape_min_need(r, "size")
                hi = min(hi, _shape_max_useful(l, budget, "size"))
                for bl in range(lo, hi + 1):
                    for a in self._enumerate_max(l, delta, phi, bl):
                        for b in self._enumerate_max(r, delta, phi, budget - bl):
                            out.append(SPair(a, b))
                return list(antichain(out))
            case RSArrow(_, _):
                raise UnsupportedFeature(
                    "arrow shape functors are not supported under size abstraction"
                )
        raise ModelError(f"not a shape functor: {f!r}")

    def dest(self, delta: RInd, x: SemValue) -> SemValue:
        if not isinstance(x, SMap):
            raise ModelError("destructing a non-size-map")
        unfold_ty = subst_rec_shape(delta.functor, delta)
        main = x.sizemap.get(delta)
        if main.is_inf:
            return self.top(unfold_ty)
        zs = self._enumerate_max(delta.functor, delta, x.sizemap, main.value - 1)
        return self.join(zs, unfold_ty)

    def fold(self, delta: RInd, result_ty: RecType, step, x: SemValue,
             cache_key=None) -> SemValue:
        if not isinstance(x, SMap):
            raise ModelError("folding a non-size-map")
        if not shape_is_polynomial(delta.functor):
            raise UnsupportedFeature("fold over a non-polynomial shape functor")
        cache = self._fold_cache.setdefault(cache_key, {}) if cache_key else None

        def go(phi: SizeMap) -> SemValue:
            if cache is not None and phi in cache:
                return cache[phi]
            main = phi.get(delta)
            if main.is_inf:
                out = self.top(result_ty)
            else:
                zs = self._enumerate_max(delta.functor, delta, phi, main.value - 1)

                def rec_call(m):
                    if not isinstance(m, SMap):
                        raise ModelError("recursive fold position expects a size map")
                    return go(m.sizemap)

                rec = SFun(rec_call)
                images = [step(self.map_shape(delta.functor, rec, z)) for z in zs]
                out = self.join(images, result_ty)
            if cache is not None:
                cache[phi] = out
            return out

        return go(x.sizemap)


# ---------------------------------------------------------------------------
# Abstraction / concretization between allcons (W) and size (V)
# ---------------------------------------------------------------------------


def galois_abs(ty: RecType, w: SemValue) -> SemValue:
    """Project an all-constructors value to a main-constructor-count value."""
    match ty:
        case RUnit():
            return SStar()
        case RC():
            return w
        case RInd(_, _):
            if not isinstance(w, SMap):
                raise ModelError("abs at an inductive type expects a size map")
            return SNum("size", w.sizemap.get(ty))
        case RSum(l, r):
            if not isinstance(w, SIdeal):
                raise ModelError("abs at a sum expects an ideal")
            return SIdeal(
                antichain(galois_abs(l, g) for g in w.left),
                antichain(galois_abs(r, g) for g in w.right),
            )
        case RProd(l, r):
            if not isinstance(w, SPair):
                raise ModelError("abs at a product expects a pair")
            return SPair(galois_abs(l, w.left), galois_abs(r, w.right))
        case RArrow(d, c):
            if not isinstance(w, SFun):
                raise ModelError("abs at an arrow expects a function")
            return SFun(lambda v, d=d, c=c, w=w: galois_abs(c, w(galois_conc(d, v))))
    raise ModelError(f"no abstraction at type {pretty_rec_type(ty)}")


def galois_conc(ty: RecType, v: SemValue) -> SemValue:
    """Embed a main-constructor-count value as an all-constructors value,
    padding the other datatypes with infinity.
    """
    match ty:
        case RUnit():
            return SStar()
        case RC():
            return v
        case RInd(_, _):
            if not isinstance(v, SNum):
                raise ModelError("conc at an inductive type expects a size")
            entries = {d: INF for d in support_datatypes(ty)}
            entries[ty] = v.num
            return SMap(SizeMap.of(entries))
        case RSum(l, r):
            if not isinstance(v, SIdeal):
                raise ModelError("conc at a sum expects an ideal")
            return SIdeal(
                antichain(galois_conc(l, g) for g in v.left),
                antichain(galois_conc(r, g) for g in v.right),
            )
        case RProd(l, r):
            if not isinstance(v, SPair):
                raise ModelError("conc at a product expects a pair")
            return SPair(galois_conc(l, v.left), galois_conc(r, v.right))
        case RArrow(d, c):
            if not isinstance(v, SFun):
                raise ModelError("conc at an arrow expects a function")
            return SFun(lambda w, d=d, c=c, v=v: galois_conc(c, v(galois_abs(d, w))))
    raise ModelError(f"no concretization at type {pretty_rec_type(ty)}")


class MergedModel(AllConsModel):
    """The polymorphic abstraction of the all-constructors model relative to
    the size model: monomorphic values live in the all-constructors world,
    but type abstractions at quantifier-free bodies store the size-model
    abstraction of each instance, and instantiation concretizes back.  The
    net effect is that a polymorphic recurrence is analyzed in terms of main
    constructor counts only.
    """

    name = "merged"

    def tyabs(self, fn: Callable[[RecType], SemValue], var: str,
              body_ty: RecType) -> SemValue:
        if quantifier_free(body_ty):
            return SPoly(lambda sigma: galois_abs(
                subst_rtyvars(body_ty, {var: sigma}), fn(sigma)
            ))
        return SPoly(fn)

    def tyapp(self, v: SemValue, sigma: RecType, var: str, body_ty: RecType) -> SemValue:
        if not isinstance(v, SPoly):
            raise ModelError("type application of a non-polymorphic value")
        inst = v.at(sigma)
        if quantifier_free(body_ty):
            return galois_conc(subst_rtyvars(body_ty, {var: sigma}), inst)
        return inst


# ---------------------------------------------------------------------------
# The exact (standard) model
# ---------------------------------------------------------------------------


class ExactModel(Model):
    """Set-theoretic interpretation: no size abstraction, the order is
    equality, and folds are structural recursion.  Arrow shapes are fine.
    """

    name = "exact"
    direction = "exact"

    def inj(self, index: int, v: SemValue, sum_ty: RecType) -> SemValue:
        return XInj(index, v)

    def case(self, scrut: SemValue, f0, f1, result_ty: RecType) -> SemValue:
        if not isinstance(scrut, XInj):
            raise ModelError("exact case expects an injection")
        return (f0 if scrut.index == 0 else f1)(scrut.arg)

    def cons(self, delta: RInd, z: SemValue) -> SemValue:
        return XCons(delta, z)

    def dest(self, delta: RInd, x: SemValue) -> SemValue:
        if not isinstance(x, XCons):
            raise ModelError("exact dest expects a constructor value")
        return x.arg

    def fold(self, delta: RInd, result_ty: RecType, step, x: SemValue,
             cache_key=None) -> SemValue:
        def go(v: SemValue) -> SemValue:
            if not isinstance(v, XCons):
                raise ModelError("exact fold expects a constructor value")
            rec = SFun(go)
            return step(self.map_shape(delta.functor, rec, v.arg))

        return go(x)

    def map_shape(self, f: RecShape, g, x: SemValue) -> SemValue:
        match f:
            case RSRec():
                return g(x)
            case RSConst(_):
                return x
            case RSProd(l, r):
                if not isinstance(x, SPair):
                    raise ModelError("product shape expects a pair")
                return SPair(self.map_shape(l, g, x.left), self.map_shape(r, g, x.right))
            case RSSum(l, r):
                if not isinstance(x, XInj):
                    raise ModelError("exact sum shape expects an injection")
                sub = l if x.index == 0 else r
                return XInj(x.index, self.map_shape(sub, g, x.arg))
            case RSArrow(_, b):
                if not isinstance(x, SFun):
                    raise ModelError("arrow shape expects a function")
                return SFun(lambda y, b=b, x=x: self.map_shape(b, g, x(y)))
        raise ModelError(f"not a shape functor: {f!r}")

    def bottom(self, ty: RecType) -> SemValue:
        raise ModelError("the exact model has no lattice structure")

    def top(self, ty: RecType) -> SemValue:
        raise ModelError("the exact model has no lattice structure")

    def join(self, vals: list[SemValue], ty: RecType) -> SemValue:
        if len(vals) != 1:
            raise ModelError("the exact model only joins singletons")
        return vals[0]


# ---------------------------------------------------------------------------
# The denotation function
# ---------------------------------------------------------------------------


def denote(model: Model, env: SemEnv, e: RecExpr, elab: RecElab) -> SemValue:
    """Clause-per-clause interpretation into the model's applicative
    structure.  ``elab`` must come from a check_rec run over ``e``.
    """
    match e:
        case RVar(n):
            if n not in env.vals:
                raise ModelError(f"unbound semantic variable {n}")
            return env.vals[n]
        case RZero():
            return SNum("cost", ZERO)
        case ROne():
            return SNum("cost", ONE)
        case RPlus(l, r):
            a = denote(model, env, l, elab)
            b = denote(model, env, r, elab)
            if not isinstance(a, SNum) or not isinstance(b, SNum):
                raise ModelError("+ expects costs")
            return SNum("cost", a.num + b.num)
        case RUnitE():
            return SStar()
        case RPair(l, r):
            return SPair(denote(model, env, l, elab), denote(model, env, r, elab))
        case RProj(i, a):
            v = denote(model, env, a, elab)
            if not isinstance(v, SPair):
                raise ModelError("projection from a non-pair")
            return v.left if i == 0 else v.right
        case RInj(i, ann, a):
            return model.inj(i, denote(model, env, a, elab), env.close(ann))
        case RCase(s, x0, _, b0, x1, _, b1):
            scrut = denote(model, env, s, elab)
            result_ty = env.close(elab.type_of(e))
            f0 = lambda v: denote(model, env.with_val(x0, v), b0, elab)
            f1 = lambda v: denote(model, env.with_val(x1, v), b1, elab)
            return model.case(scrut, f0, f1, result_ty)
        case RLam(x, _, b):
            return SFun(lambda v: denote(model, env.with_val(x, v), b, elab))
        case RApp(f, a):
            vf = denote(model, env, f, elab)
            va = denote(model, env, a, elab)
            if not isinstance(vf, SFun):
                raise ModelError("application of a non-function")
            return vf(va)
        case RTyLam(a, b):
            body_ty = elab.type_of(b)

            def instantiate(sigma: RecType, a=a, b=b):
                return denote(model, env.with_tyvar(a, sigma), b, elab)

            return model.tyabs(instantiate, a, subst_rtyvars(body_ty, {
                v: t for v, t in env.tyvars.items() if v != a
            }))
        case RTyApp(f, t):
            vf = denote(model, env, f, elab)
            fn_ty = env.close(elab.type_of(f))
            if not isinstance(fn_ty, RForall):
                raise ModelError("type application of a non-quantified type")
            return model.tyapp(vf, env.close(t), fn_ty.var, fn_ty.body)
        case RConsE(ann, a):
            delta = env.close(ann)
            assert isinstance(delta, RInd)
            return model.cons(delta, denote(model, env, a, elab))
        case RDestE(ann, a):
            delta = env.close(ann)
            assert isinstance(delta, RInd)
            return model.dest(delta, denote(model, env, a, elab))
        case RFold(ann, s, x, _, b):
            delta = env.close(ann)
            assert isinstance(delta, RInd)
            result_ty = env.close(elab.type_of(e))
            scrut = denote(model, env, s, elab)
            step = lambda v: denote(model, env.with_val(x, v), b, elab)
            key = (id(e), frozenset(env.tyvars.items()),
                   _env_fingerprint(env, rec_free_vars(b) - {x}))
            return model.fold(delta, result_ty, step, scrut, cache_key=key)
    raise ModelError(f"not a recurrence expression: {e!r}")


def _env_fingerprint(env: SemEnv, names: set[str]):
    return tuple(sorted((n, env.vals[n]) for n in names if n in env.vals))


def denote_closed(model: Model, e: RecExpr) -> SemValue:
    """Type check a closed term and denote it."""
    elab = RecElab()
    check_rec({}, e, elab)
    return denote(model, SemEnv(), e, elab)


# ---------------------------------------------------------------------------
# Canonical potentials of source values
# ---------------------------------------------------------------------------


_RESOLVE_CACHE: dict = {}
_RESOLVE_KEEP: list = []


def _resolved(ty: S.SrcType) -> S.SrcType:
    """resolve_holes with an identity cache.  Only safe after checking has
    finished (hole solutions are stable by then), which is the only time the
    models run.
    """
    key = id(ty)
    hit = _RESOLVE_CACHE.get(key)
    if hit is None:
        hit = S.resolve_holes(ty)
        _RESOLVE_CACHE[key] = hit
        _RESOLVE_KEEP.append(ty)
    return hit


_OBSERVABLE_CACHE: dict = {}
_OBSERVABLE_KEEP: list = []


def observable(ty: S.SrcType) -> bool:
    """First-order types at which bounding can be checked mechanically."""
    key = id(ty)
    hit = _OBSERVABLE_CACHE.get(key)
    if hit is None:
        hit = _observable(_resolved(ty))
        _OBSERVABLE_CACHE[key] = hit
        _OBSERVABLE_KEEP.append(ty)
    return hit


def _observable(ty: S.SrcType) -> bool:
    match ty:
        case S.TUnit():
            return True
        case S.TProd(l, r) | S.TSum(l, r):
            return _observable(l) and _observable(r)
        case S.TInd(f, _):
            return _observable_shape(f)
        case _:
            return False


def _observable_shape(f: S.ShapeFunctor) -> bool:
    match f:
        case S.FRec():
            return True
        case S.FConst(t):
            return _observable(S.resolve_holes(t))
        case S.FProd(l, r) | S.FSum(l, r):
            return _observable_shape(l) and _observable_shape(r)
        case S.FArrow(_, _):
            return False
    return False


_UNFOLD_CACHE: dict = {}
_UNFOLD_KEEP: list = []


def _unfolded(ty: S.TInd) -> S.SrcType:
    key = id(ty)
    hit = _UNFOLD_CACHE.get(key)
    if hit is None:
        hit = S.subst_shape(ty.functor, ty)
        _UNFOLD_CACHE[key] = hit
        _UNFOLD_KEEP.append(ty)
    return hit


def value_potential(model: Model, v: S.Value, ty: S.SrcType) -> SemValue:
    """The least potential bounding a concrete first-order value, built by
    replaying the value-bounding clauses constructively (unit to star, pairs
    to pairs, injections through the model's injection, constructors through
    the model's semantic constructor).
    """
    ty = _resolved(ty)
    if not observable(ty):
        raise ModelError(f"type {S.pretty_type(ty)} is not observable")
    return _value_potential(model, v, ty)


def _value_potential(model: Model, v: S.Value, ty: S.SrcType) -> SemValue:
    match (v, ty):
        case (S.VUnit(), S.TUnit()):
            return SStar()
        case (S.VPair(l, r), S.TProd(tl, tr)):
            return SPair(_value_potential(model, l, tl), _value_potential(model, r, tr))
        case (S.VInj(i, a), S.TSum(tl, tr)):
            sub = _value_potential(model, a, tl if i == 0 else tr)
            return model.inj(i, sub, potential_type(ty))
        case (S.VCons(_, a), S.TInd(_, _)):
            delta = potential_type(ty)
            assert isinstance(delta, RInd)
            sub = _value_potential(model, a, _unfolded(ty))
            return model.cons(delta, sub)
    raise ModelError(f"value {S.pretty(v)} does not inhabit {S.pretty_type(ty)}")


MODEL_NAMES = ("exact", "size", "height", "allcons", "merged", "lower")


def make_model(name: str) -> Model:
    match name:
        case "exact":
            return ExactModel()
        case "size":
            return SizeHeightModel("size")
        case "height":
            return SizeHeightModel("height")
        case "allcons":
            return AllConsModel()
        case "merged":
            return MergedModel()
        case "lower":
            return LowerSizeModel()
    raise ModelError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
