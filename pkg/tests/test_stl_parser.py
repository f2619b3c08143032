import pytest

from quadcheck.stl import STLSyntaxError, parse, parse_expr
from quadcheck.stl import ast as A

SIG = ("x", "y", "q")


def P(text):
    return parse_expr(text, signals=SIG)


def test_window_aggregate():
    node = P("On[0,2] Max x")
    assert isinstance(node, A.OnTerm) and (node.a, node.b) == (0, 2) and node.agg.kind == "max"


def test_globally_desugars_to_forall():
    node = P("G[0,20] (x - q > 0)")
    assert node == A.OnFormula(0, 20, A.LogAgg("forall", A.Positive(A.sub(A.Signal("x"), A.Signal("q")))))
    assert P("F[0,1] x > 0").agg.kind == "exists"


def test_malformed_window():
    with pytest.raises(STLSyntaxError, match="malformed window"):
        P("On[2,0] Max x")


def test_until_variants():
    assert P("x > 0 U[0,2] y > 0") == A.until(P("x > 0"), 0, 2, P("y > 0"))
    assert isinstance(P("x U[0,2]^0 y > 0"), A.TimepointUntil)
    assert isinstance(P("Max x U[0,2]^-1 y > 0"), A.AggUntilTerm)
    assert isinstance(P("On[0,1] Forall x > 0"), A.OnFormula)
    assert isinstance(P("Forall x > 0 U[0,1]^true y > 0"), A.AggUntilFormula)
    assert isinstance(P("x > 0 U[0,1]^true y > 0"), A.SampleUntil)
    assert isinstance(P("x > 0 Uavg[0,2] y > 0"), A.AvgUntil)
    assert P("time U[0,0.5]^inf (x > 0)").default == float("inf")


def test_lookup_sugar():
    assert P("D[-0.5]^0 x") == A.lookup(-0.5, 0.0, A.Signal("x"))
    assert P("D[-0.5]^false (x > 0)") == A.lookup(-0.5, False, P("x > 0"))


def test_precedence():
    assert P("x > 0 -> y > 0 | x < 1 & y < 2") == A.implies(
        P("x > 0"), A.Or(P("y > 0"), A.And(P("x < 1"), P("y < 2"))))
    assert P("2 + 3 * x") == A.add(A.Const(2.0), A.mul(A.Const(3.0), A.Signal("x")))
    assert P("!x > 0 & y > 0") == A.And(A.Not(P("x > 0")), P("y > 0"))
    assert P("(On[0,1] Exists x > 0) | y > 0") == P("On[0,1] Exists x > 0 | y > 0")
    assert P("a -> b -> c".replace("a", "x>0").replace("b", "y>0").replace("c", "q>0")) == \
        A.implies(P("x>0"), A.implies(P("y>0"), P("q>0")))


def test_comparisons():
    assert P("x >= 1") == A.Not(A.Positive(A.sub(A.Const(1.0), A.Signal("x"))))
    assert P("x < 1") == A.Positive(A.sub(A.Const(1.0), A.Signal("x")))
    assert P("abs(x) <= max(1, y)") == A.Not(A.Positive(A.sub(A.apply("abs", A.Signal("x")),
                                                                A.apply("max", A.Const(1.0), A.Signal("y")))))


def test_definitions_and_sharing():
    spec = parse("a := x > 0\nb := On[0,1] Forall a; c := ite(b, x, 0)", signals=SIG)
    assert list(spec) == ["a", "b", "c"]
    assert spec["b"].agg.formula is spec["a"]
    assert set(spec.formulas()) == {"a", "b"} and set(spec.terms()) == {"c"}
    # structurally equal subtrees are one object
    s2 = parse("a := (x > 0) & (x > 0)", signals=SIG)
    assert s2["a"].left is s2["a"].right


def test_constants_comments_and_bare_expression():
    spec = parse("# comment\nc := x > k  # trailing\n", signals=SIG, constants={"k": 2})
    assert spec["c"] == P("x > 2")
    assert list(parse("x + 1", signals=SIG)) == ["main"]
    multi = parse("a := On[0,\n 2] Max x", signals=SIG)
    assert multi["a"].b == 2


@pytest.mark.parametrize("text, msg", [
    ("x + ", "unexpected"),
    ("(x > 0", "expected"),
    ("z > 0", "unknown signal"),
    ("x > 0 U[0,1]^3 y > 0", "true/false default"),
    ("x U[0,1]^true y > 0", "numeric default"),
    ("a := x > 0\na := y > 0", "duplicate"),
    ("(x > 0) + 1", None),
    ("Max x", "window"),
    ("x > 0 > 1", None),
    ("nosuch(x)", None),
    ("On[0,inf] Max x", None),
])
def test_syntax_errors(text, msg):
    with pytest.raises(STLSyntaxError, match=msg) as info:
        parse(text, signals=SIG)
    assert info.value.line >= 1 and info.value.column >= 1


def test_error_position():
    with pytest.raises(STLSyntaxError) as info:
        parse("a := x > 0\nb := y >", signals=SIG)
    assert info.value.line == 2
