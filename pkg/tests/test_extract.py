import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS_FILES, corpus_extracted
from costrec.extract import (
    add_cost, complexity_type, extract_expr, potential_type,
)
from costrec.rec_lang import (
    RArrow, RC, RCase, RFold, RInd, RLam, RPair, RProd, RSum, RTVar, RUnit,
    RUnitE, RVar, RZero, check_rec, rec_alpha_eq, subst_rtyvars,
)
from costrec.source_ast import (
    NAT_TYPE, TArrow, TProd, TSum, TSusp, TUnit, TVar, parse_expr,
    parse_type, subst_tyvars,
)
from costrec.typecheck import Elab, TypeContext, infer_expr


def extract_of(text):
    e = parse_expr(text)
    elab = Elab()
    infer_expr(TypeContext({}), e, elab)
    elab._roots.append(e)
    elab._zonk_all()
    return extract_expr(e, elab)


def test_unit_extracts_to_zero_cost_star():
    out = extract_of("()")
    assert rec_alpha_eq(out, RPair(RZero(), RUnitE()))


def test_lambda_extracts_to_zero_cost_abstraction():
    out = extract_of("fn (x: unit) => x")
    assert isinstance(out, RPair)
    assert isinstance(out.left, RZero)
    assert isinstance(out.right, RLam)
    assert rec_alpha_eq(out.right.body, RPair(RZero(), RVar("x")), {"x": "x"})


def test_extraction_is_always_a_pair():
    for text in ["()", "#3", "fn (x: nat) => x", "pi0 (#1, #2)", "force (delay #1)"]:
        assert isinstance(extract_of(text), RPair)


def test_fold_charges_inside_the_step():
    out = extract_of("fold[nat] #1 with x => case x of y => #0 | y => force y : nat")
    fold = out.right
    while not isinstance(fold, RFold):  # unwrap the adding-cost projections
        fold = fold.arg
    assert isinstance(fold, RFold)
    # the step body is 1 +c the extracted branch: its cost starts with 1 +
    step_cost = fold.body.left
    from costrec.rec_lang import ROne, RPlus

    assert isinstance(step_cost, (ROne, RPlus))


# ---------------------------------------------------------------------------
# Type translations
# ---------------------------------------------------------------------------


def test_potential_of_unit():
    assert potential_type(TUnit()) == RUnit()


def test_potential_of_list_commutes_with_instantiation():
    lst_nat = parse_type("list<nat>")
    lst_a = parse_type("list<a>")
    direct = potential_type(lst_nat)
    substituted = subst_rtyvars(potential_type(lst_a), {"a": potential_type(NAT_TYPE)})
    assert direct == substituted


def test_complexity_of_nat_to_nat():
    got = complexity_type(parse_type("nat -> nat"))
    nat_pot = potential_type(NAT_TYPE)
    assert got == RProd(RC(), RArrow(nat_pot, RProd(RC(), nat_pot)))


def test_susp_potential_is_a_complexity():
    assert potential_type(TSusp(NAT_TYPE)) == complexity_type(NAT_TYPE)


_tys = st.deferred(lambda: st.one_of(
    st.just(TUnit()),
    st.sampled_from([TVar("a"), TVar("b")]),
    st.just(NAT_TYPE),
    st.just(parse_type("list<a>")),
    st.builds(TProd, _tys, _tys),
    st.builds(TSum, _tys, _tys),
    st.builds(TArrow, _tys, _tys),
    st.builds(TSusp, _tys),
))


@settings(max_examples=120, deadline=None)
@given(_tys, st.sampled_from([TUnit(), NAT_TYPE, parse_type("bool"), parse_type("list<nat>")]))
def test_potential_translation_commutes_with_substitution(ty, rho):
    # substitution commutation: <<ty[rho/a]>> == <<ty>>[<<rho>>/a]
    lhs = potential_type(subst_tyvars(ty, {"a": rho}))
    rhs = subst_rtyvars(potential_type(ty), {"a": potential_type(rho)})
    assert lhs == rhs


# ---------------------------------------------------------------------------
# Typeability of extracted recurrences
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_extracted_recurrences_typeable(name):
    ex = corpus_extracted(name)
    for bname, binding in ex.bindings.items():
        got = check_rec({}, binding.complexity)
        assert got == binding.complexity_ty, bname


@pytest.mark.parametrize(
    "text,src_ty",
    [
        ("fn (x: nat) => x", "nat -> nat"),
        ("fn (p: nat * bool) => pi0 p", "nat * bool -> nat"),
        ("fn (x: nat + unit) => case x of y => inj0[nat + unit] y | z => inj1[nat + unit] z",
         "nat + unit -> nat + unit"),
        ("fn (s: susp nat) => force s", "susp nat -> nat"),
        ("let d = fn (x: a) => (x, x) in d[nat] #1", "nat * nat"),
    ],
)
def test_typeability_on_handwritten_terms(text, src_ty):
    out = extract_of(text)
    assert check_rec({}, out) == complexity_type(parse_type(src_ty))


def test_let_substitutes_generalized_potential():
    # occurrences of the let-bound name become type applications of the
    # generalized potential
    out = extract_of("let id = fn (x: a) => x in id[nat] #1")
    from costrec.rec_lang import RTyApp, RTyLam, rec_free_vars

    assert not rec_free_vars(out)
    found = []

    def walk(e):
        if isinstance(e, RTyApp) and isinstance(e.fn, RTyLam):
            found.append(e)
        for attr in ("left", "right", "arg", "fn", "scrutinee", "body",
                     "branch0", "branch1"):
            sub = getattr(e, attr, None)
            if sub is not None and hasattr(sub, "__dataclass_fields__"):
                walk(sub)

    walk(out)
    assert found, "expected a type application of the generalized potential"


def test_add_cost_macro_on_pairs_and_neutral_zero():
    e = RPair(RZero(), RUnitE())
    from costrec.rec_lang import ROne

    out = add_cost(ROne(), e)
    assert rec_alpha_eq(out, RPair(ROne(), RUnitE()))


def test_non_core_input_rejected():
    from costrec.extract import ExtractError
    from costrec.source_ast import FRec, MapV, VUnit

    with pytest.raises(ExtractError):
        extract_expr(MapV(FRec(), "y", VUnit(), VUnit()), Elab())
