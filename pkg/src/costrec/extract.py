"""Recurrence extraction: the call-by-value monadic translation from the
source language into the recurrence language's writer monad over the cost
type.

Every extracted term is a complexity: a pair whose first component bounds
evaluation cost and whose second component (the potential) bounds the value.
Extraction is derivation-directed: it consumes the elaboration produced by
the typechecker (recorded instantiations, generalized let variables, branch
types).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import source_ast as S
from . import typecheck as T
from .rec_lang import (
    RApp, RArrow, RC, RCase, RConsE, RDestE, RecExpr, RecShape, RecType,
    RFold, RInd, RInj, RLam, ROne, RPair, RPlus, RProd, RProj, RSArrow,
    RSConst, RSProd, RSRec, RSSum, RSum, RTVar, RTyApp, RTyLam, RUnit,
    RUnitE, RVar, RZero, RForall, rec_gensym, subst_rec, subst_rec_shape,
)


class ExtractError(Exception):
    pass


# ---------------------------------------------------------------------------
# Type translations
# ---------------------------------------------------------------------------


# Cache keyed by object identity: type objects are immutable and their
# unification holes are stable once a program has been checked, and identity
# keys avoid hashing deep structures on every call.
_POTENTIAL_CACHE: dict = {}
_POTENTIAL_KEEP: list = []


def potential_type(ty: S.SrcType) -> RecType:
    """The potential translation: sizes of source values of this type."""
    key = id(ty)
    hit = _POTENTIAL_CACHE.get(key)
    if hit is not None:
        return hit
    out = _potential_type(S.resolve_holes(ty))
    _POTENTIAL_CACHE[key] = out
    _POTENTIAL_KEEP.append(ty)
    return out


def _potential_type(ty: S.SrcType) -> RecType:
    match ty:
        case S.TVar(a):
            return RTVar(a)
        case S.TUnit():
            return RUnit()
        case S.TProd(l, r):
            return RProd(potential_type(l), potential_type(r))
        case S.TSum(l, r):
            return RSum(potential_type(l), potential_type(r))
        case S.TArrow(d, c):
            return RArrow(potential_type(d), complexity_type(c))
        case S.TSusp(b):
            return complexity_type(b)
        case S.TInd(f, label):
            return RInd(potential_shape(f), label)
    raise ExtractError(f"not a source type: {ty!r}")


def potential_shape(f: S.ShapeFunctor) -> RecShape:
    match f:
        case S.FRec():
            return RSRec()
        case S.FConst(t):
            return RSConst(potential_type(t))
        case S.FProd(l, r):
            return RSProd(potential_shape(l), potential_shape(r))
        case S.FSum(l, r):
            return RSSum(potential_shape(l), potential_shape(r))
        case S.FArrow(d, b):
            return RSArrow(potential_type(d), potential_shape(b))
    raise ExtractError(f"not a shape functor: {f!r}")


def complexity_type(ty: S.SrcType) -> RecType:
    """C x potential: the type of extracted expressions."""
    return RProd(RC(), potential_type(ty))


def scheme_potential(scheme: S.TypeScheme) -> RecType:
    out = potential_type(scheme.body)
    for a in reversed(scheme.bound):
        out = RForall(a, out)
    return out


# ---------------------------------------------------------------------------
# The "adding cost" macro
# ---------------------------------------------------------------------------


def cost_of(e: RecExpr) -> RecExpr:
    return e.left if isinstance(e, RPair) else RProj(0, e)


def potential_of(e: RecExpr) -> RecExpr:
    return e.right if isinstance(e, RPair) else RProj(1, e)


def _plus(a: RecExpr, b: RecExpr) -> RecExpr:
    if isinstance(a, RZero):
        return b
    if isinstance(b, RZero):
        return a
    return RPlus(a, b)


def add_cost(c: RecExpr, e: RecExpr) -> RecExpr:
    """``c +c E`` = (c + E_c, E_p).  When E is a literal pair the components
    are taken directly, which is the projection beta law every model
    validates as an equality.
    """
    return RPair(_plus(c, cost_of(e)), potential_of(e))


# ---------------------------------------------------------------------------
# Expression extraction
# ---------------------------------------------------------------------------


def extract_expr(e: S.SrcExpr, elab: T.Elab) -> RecExpr:
    """Extract the complexity of a core, well-typed expression.  The result
    is always syntactically a pair.
    """
    match e:
        case S.Var(name, _):
            args = elab.instantiations.get(id(e), ())
            pot: RecExpr = RVar(name)
            for ty in args:
                pot = RTyApp(pot, potential_type(ty))
            return RPair(RZero(), pot)
        case S.Unit():
            return RPair(RZero(), RUnitE())
        case S.Pair(l, r):
            el, er = extract_expr(l, elab), extract_expr(r, elab)
            return RPair(_plus(cost_of(el), cost_of(er)),
                         RPair(potential_of(el), potential_of(er)))
        case S.Proj(i, a):
            ea = extract_expr(a, elab)
            return RPair(cost_of(ea), RProj(i, potential_of(ea)))
        case S.Inj(i, ann, a):
            ea = extract_expr(a, elab)
            ann_pot = potential_type(elab.types[id(e)])
            return RPair(cost_of(ea), RInj(i, ann_pot, potential_of(ea)))
        case S.Case(scrut, x0, b0, x1, b1):
            es = extract_expr(scrut, elab)
            scrut_ty = T.zonk(elab.types[id(scrut)])
            if not isinstance(scrut_ty, S.TSum):
                raise ExtractError("case scrutinee is not a sum")
            case_e = RCase(
                potential_of(es),
                x0, potential_type(scrut_ty.left), extract_expr(b0, elab),
                x1, potential_type(scrut_ty.right), extract_expr(b1, elab),
            )
            return add_cost(cost_of(es), case_e)
        case S.Lam(x, ann, body):
            return RPair(RZero(), RLam(x, potential_type(ann), extract_expr(body, elab)))
        case S.App(f, a):
            ef, ea = extract_expr(f, elab), extract_expr(a, elab)
            return add_cost(_plus(cost_of(ef), cost_of(ea)),
                            RApp(potential_of(ef), potential_of(ea)))
        case S.Delay(body):
            return RPair(RZero(), extract_expr(body, elab))
        case S.Force(a):
            ea = extract_expr(a, elab)
            return add_cost(cost_of(ea), potential_of(ea))
        case S.Cons(ann, a):
            ea = extract_expr(a, elab)
            delta = potential_type(T.zonk(elab.types[id(e)]))
            assert isinstance(delta, RInd)
            return RPair(cost_of(ea), RConsE(delta, potential_of(ea)))
        case S.Dest(ann, a):
            ea = extract_expr(a, elab)
            delta = potential_type(T.zonk(elab.types[id(a)]))
            assert isinstance(delta, RInd)
            return RPair(cost_of(ea), RDestE(delta, potential_of(ea)))
        case S.Fold(ann, scrut, x, body, res):
            es = extract_expr(scrut, elab)
            delta_src = T.zonk(elab.types[id(scrut)])
            if not isinstance(delta_src, S.TInd):
                raise ExtractError("fold scrutinee is not an inductive type")
            delta = potential_type(delta_src)
            assert isinstance(delta, RInd)
            res_cpx = complexity_type(T.zonk(elab.types[id(e)]))
            binder_ann = subst_rec_shape(delta.functor, res_cpx)
            step = add_cost(ROne(), extract_expr(body, elab))
            return add_cost(
                cost_of(es),
                RFold(delta, potential_of(es), x, binder_ann, step),
            )
        case S.Let(x, bound, body):
            eb = extract_expr(bound, elab)
            gen = elab.let_generalized.get(id(e), ())
            pot = _generalize(potential_of(eb), gen)
            ebody = extract_expr(body, elab)
            return add_cost(cost_of(eb), subst_rec(ebody, x, pot))
        case S.MapE() | S.MapV():
            raise ExtractError("extraction is defined only for the core language")
    raise ExtractError(f"not an expression: {e!r}")


def _generalize(pot: RecExpr, gen: tuple[str, ...]) -> RecExpr:
    """Wrap a potential in type lambdas over the generalized variables,
    freshening their names so the result can be substituted under binders
    that mention same-named type variables.
    """
    from .rec_lang import subst_rec_type_in_expr

    if not gen:
        return pot
    fresh = {a: RTVar(rec_gensym(a)) for a in gen}
    pot = subst_rec_type_in_expr(pot, fresh)
    for a in reversed(gen):
        pot = RTyLam(fresh[a].name, pot)
    return pot


# ---------------------------------------------------------------------------
# Program extraction
# ---------------------------------------------------------------------------


@dataclass
class ExtractedBinding:
    name: str
    scheme: S.TypeScheme
    complexity: RecExpr  # closed term: earlier bindings substituted in
    complexity_ty: RecType  # C x potential of the scheme body (scheme vars free)
    potential: RecExpr  # tylam-wrapped potential, as substituted for the name
    potential_ty: RecType  # forall-quantified potential type


@dataclass
class ExtractedProgram:
    bindings: dict[str, ExtractedBinding]
    main: RecExpr | None = None


def extract_program(checked: T.CheckedProgram) -> ExtractedProgram:
    """Extract every top-level binding.  Bindings are treated as nested lets:
    each extracted recurrence has earlier bindings' potentials substituted
    in, so each is closed.
    """
    out: dict[str, ExtractedBinding] = {}
    subst_map: dict[str, RecExpr] = {}
    elab = checked.elab
    for name, expr in checked.program.bindings:
        cpx = extract_expr(expr, elab)
        for prev, pot in subst_map.items():
            cpx = subst_rec(cpx, prev, pot)
        scheme = checked.schemes[name]
        pot = _generalize(potential_of(cpx), scheme.bound)
        out[name] = ExtractedBinding(
            name=name,
            scheme=scheme,
            complexity=cpx,
            complexity_ty=RProd(RC(), potential_type(scheme.body)),
            potential=pot,
            potential_ty=scheme_potential(scheme),
        )
        subst_map[name] = pot
    main = None
    if checked.program.main is not None:
        main = extract_expr(checked.program.main, elab)
        for prev, pot in subst_map.items():
            main = subst_rec(main, prev, pot)
    return ExtractedProgram(out, main)
