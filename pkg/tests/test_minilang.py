"""Mini-language parser and evaluator tests.

Expected values for the three reference fragments were fixed by hand
before the interpreter existed: the array-walk fragment ends with
count == 2, the val-form program binds x=11 y=110 z=-1188, and the
counting loop prints "0 2 ".
"""

import pytest
from hypothesis import given, settings, strategies as st

from exr.minilang import (
    Assign, Effect, For, ParseError, Print, Program, UnboundName, VarDecl,
    While, evaluate, parse_program, trace,
)

ARRAY_WALK = """\
int[] x1 = {1, 2, 4, 7};
int[] x2 = {1, 2, 5, 7};
int i1 = x1.length - 1;
int i2 = x2.length - 1;
int count = 0;
while ((i1 > 0) && (i2 > 0)) {
    if (x1[i1] == x2[i2]) {
        count += 1;
        i1--;
        i2--;
    }
    else if (x1[i1] < x2[i2]) i2--;
    else i1--;
}
"""

VAL_PROGRAM = """\
val x = 7 + 4
val y = x * (x - 1)
val z = ~x * (y - 2)
"""

COUNT_LOOP = 'for(int i=0;i<=3;i+=2) System.out.print(i+" ");'


def run(src: str, fuel: int = 10_000) -> Effect:
    return evaluate(parse_program(src), fuel)


class TestParser:
    def test_count_loop_shape(self):
        prog = parse_program(COUNT_LOOP)
        assert len(prog.body) == 1
        loop = prog.body[0]
        assert isinstance(loop, For)
        assert isinstance(loop.init, VarDecl) and loop.init.name == "i"
        assert isinstance(loop.step, Assign) and loop.step.op == "+="
        assert isinstance(loop.body, Print) and loop.body.sep == " "

    def test_val_form(self):
        prog = parse_program("val x = 7 + 4")
        decl = prog.body[0]
        assert isinstance(decl, VarDecl)
        assert decl.name == "x" and not decl.is_array

    def test_array_walk_shape(self):
        prog = parse_program(ARRAY_WALK)
        assert isinstance(prog.body[5], While)

    def test_missing_init_position(self):
        with pytest.raises(ParseError) as err:
            parse_program("int x = ;")
        assert err.value.pos == (1, 9)

    def test_unbound_name(self):
        with pytest.raises(UnboundName) as err:
            parse_program("int x = y + 1;")
        assert err.value.name == "y"
        assert err.value.pos == (1, 9)

    def test_scope_does_not_leak(self):
        src = "if (true) { int t = 1; }\nint u = t;"
        with pytest.raises(UnboundName):
            parse_program(src)

    def test_duplicate_declaration(self):
        with pytest.raises(UnboundName) as err:
            parse_program("int x = 1; int x = 2;")
        assert err.value.duplicate

    def test_positions_do_not_affect_equality(self):
        a = parse_program("int x = 1;\nint y = 2;")
        b = parse_program("int x = 1;   int y = 2;")
        assert a == b

    def test_parse_error_is_not_a_crash(self):
        for src in ["int", "while (", "x ++ ++;", "System.out.print(;", '"', "@"]:
            with pytest.raises(ParseError):
                parse_program(src)


class TestEvaluate:
    def test_array_walk_count(self):
        effect = run(ARRAY_WALK)
        assert effect.ok
        assert effect.bindings["count"] == 2
        assert effect.bindings["i1"] == 0 and effect.bindings["i2"] == 0

    def test_array_walk_brute_force_disagrees(self):
        # The intended task (count common elements) has answer 3; the
        # buggy walk above stops before index 0 and reports 2.
        x1, x2 = (1, 2, 4, 7), (1, 2, 5, 7)
        common = sum(1 for v in x1 if v in x2)
        assert common == 3
        assert run(ARRAY_WALK).bindings["count"] != common

    def test_val_program_bindings(self):
        effect = run(VAL_PROGRAM)
        assert effect.ok
        assert effect.bindings == {"x": 11, "y": 110, "z": -1188}
        assert effect.steps == 3

    def test_count_loop_stdout(self):
        effect = run(COUNT_LOOP)
        assert effect.ok
        assert effect.stdout == "0 2 "
        assert effect.bindings == {}  # loop variable is scoped to the loop

    def test_infinite_loop_exhausts_fuel(self):
        effect = run("int n = 0;\nwhile (true) { n += 1; }", fuel=1000)
        assert effect.status == "FuelExhausted"
        assert effect.steps == 1000
        assert "n" in effect.bindings  # partial state survives

    def test_fuel_is_monotone(self):
        src = "int n = 0;\nwhile (n < 50) { n += 1; }\nSystem.out.print(n);"
        prev = ""
        for fuel in [1, 3, 10, 40, 80, 200]:
            out = evaluate(parse_program(src), fuel).stdout
            assert out.startswith(prev)
            prev = out

    def test_completed_steps_within_fuel(self):
        effect = run(COUNT_LOOP, fuel=50)
        assert effect.ok and effect.steps <= 50

    def test_division_semantics(self):
        assert run("int a = 7 / 2;").bindings["a"] == 3
        assert run("int a = ~7 / 2;").bindings["a"] == -3
        assert run("int a = 7 % 2;").bindings["a"] == 1
        assert run("int a = ~7 % 2;").bindings["a"] == -1

    def test_division_by_zero(self):
        effect = run("int a = 1;\nint b = a / 0;")
        assert effect.status == "RuntimeError(DivisionByZero)"
        assert effect.bindings == {"a": 1}

    def test_index_out_of_bounds(self):
        effect = run("int[] a = {1, 2};\nint b = a[2];")
        assert effect.status == "RuntimeError(IndexOutOfBounds)"

    def test_overflow(self):
        big = 2 ** 62
        effect = run(f"int a = {big};\nint b = a + a;")
        assert effect.status == "RuntimeError(Overflow)"

    def test_short_circuit(self):
        src = "int[] a = {5};\nint i = 1;\nint hit = 0;\n" \
              "if ((i < 1) && (a[i] > 0)) hit = 1;"
        effect = run(src)
        assert effect.ok and effect.bindings["hit"] == 0

    def test_effect_json_shape(self):
        doc = run(COUNT_LOOP).to_json()
        assert set(doc) == {"stdout", "bindings", "steps", "status"}
        assert doc["stdout"] == "0 2 " and doc["status"] == "Completed"

    def test_uninitialized_int_defaults_to_zero(self):
        assert run("int x;").bindings["x"] == 0


class TestTrace:
    def test_val_program_snapshots(self):
        entries = trace(parse_program(VAL_PROGRAM))
        assert len(entries) == 3
        assert entries[0].env == {"x": 11}
        assert entries[1].env == {"x": 11, "y": 110}
        assert "z" not in entries[1].env
        assert entries[2].env == {"x": 11, "y": 110, "z": -1188}

    def test_final_snapshot_matches_effect(self):
        prog = parse_program(ARRAY_WALK)
        entries = trace(prog)
        assert entries[-1].env == evaluate(prog).bindings

    def test_empty_program(self):
        assert trace(parse_program("")) == []
        effect = run("")
        assert effect.ok and effect.steps == 0

    def test_array_walk_never_compares_index_zero(self):
        prog = parse_program(ARRAY_WALK)
        if_line = ARRAY_WALK.splitlines().index("    if (x1[i1] == x2[i2]) {") + 1
        entries = [e for e in trace(prog) if e.pos[0] == if_line]
        assert entries, "loop body should run"
        for entry in entries:
            assert entry.env["i1"] > 0 and entry.env["i2"] > 0

    def test_trace_positions_are_line_col(self):
        entries = trace(parse_program("int x = 1;\nint y = 2;"))
        assert [e.pos for e in entries] == [(1, 1), (2, 1)]


# property checks ------------------------------------------------------

@st.composite
def small_programs(draw):
    """Straight-line and bounded-loop programs over a few int variables."""
    lines = ["int a = %d;" % draw(st.integers(-5, 5)),
             "int b = %d;" % draw(st.integers(-5, 5))]
    n = draw(st.integers(1, 5))
    for _ in range(n):
        kind = draw(st.sampled_from(["assign", "if", "loop", "print"]))
        v = draw(st.integers(-3, 3))
        if kind == "assign":
            lines.append(draw(st.sampled_from(["a", "b"])) + " += %d;" % v)
        elif kind == "if":
            lines.append("if (a < b) a += 1; else b -= 1;")
        elif kind == "loop":
            lines.append("for(int i=0;i<%d;i++) a += 1;" % draw(st.integers(0, 4)))
        else:
            lines.append("System.out.print(a+\" \");")
    return "\n".join(lines)


@settings(max_examples=60, deadline=None)
@given(small_programs(), st.integers(1, 40))
def test_evaluate_is_deterministic_and_fuel_bounded(src, fuel):
    prog = parse_program(src)
    first = evaluate(prog, fuel)
    second = evaluate(prog, fuel)
    assert first == second
    assert first.steps <= fuel
    full = evaluate(prog, 10_000)
    assert full.stdout.startswith(first.stdout)


@settings(max_examples=40, deadline=None)
@given(small_programs())
def test_trace_agrees_with_evaluate(src):
    prog = parse_program(src)
    effect = evaluate(prog)
    entries = trace(prog)
    assert len(entries) == effect.steps
    if effect.ok and entries:
        top_level = {k: v for k, v in entries[-1].env.items()
                     if k in effect.bindings}
        assert top_level == effect.bindings
