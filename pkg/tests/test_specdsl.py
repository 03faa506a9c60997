"""Spec format tests: parse, render round-trip, and validation."""

import pytest

from exr.bloom import BloomCell, KnowledgeCategory as K, ProcessCategory as P
from exr.specdsl import (
    DuplicateCorrectOption, DuplicateOptionKey, Expectation, McqOption,
    MissingCorrectOption, Mode, SpecError, parse_spec, render, validate_spec,
)

LEEDS = '''\
exercise "leeds-q2" {
  target: Understand x Conceptual
  requires: arrays, while-loops
  question {
Consider the following code fragment:
```
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
```
After the above while loop finishes, 'count' contains what value?
  }
  mcq {
    a: "3" expect count = 3
    b: "2" * expect count = 2
    c: "1" expect count = 1
    d: "0" expect count = 0
  }
  plan { read(DR) ; infer_intent(MDR) ; count_common(DR) ; check_bounds(Eval) }
}
'''

LOOP = '''\
exercise "loop-output" {
  target: Evaluate x Procedural
  question {
What output is produced by the following code:
```
for(int i=0;i<=3;i+=2) System.out.print(i+" ");
```
  }
  mcq {
    a: "0 1 2" expect stdout = "0 1 2 "
    b: "0 1 2 3" expect stdout = "0 1 2 3 "
    c: "0 2" * expect stdout = "0 2 "
    d: "0 2 3" expect stdout = "0 2 3 "
    e: "0 2 4" expect stdout = "0 2 4 "
  }
  plan { read(DR) ; (run_case(Eval) ; compare(DR))* ; conclude(DR) }
}
'''

FREE = '''\
exercise "ml-bindings" {
  target: Apply x Procedural
  question {
Which value is bound to z after these declarations?
```
val x = 7 + 4
val y = x * (x - 1)
val z = ~x * (y - 2)
```
  }
  answer: z = -1188
  plan { read(DR) ; execute(Eval) }
}
'''


class TestParse:
    def test_leeds_shape(self):
        spec = parse_spec(LEEDS)
        assert spec.id == "leeds-q2"
        assert spec.mode is Mode.MCQ
        assert spec.declared_target == BloomCell(P.Understand, K.Conceptual)
        assert spec.requires == ("arrays", "while-loops")
        assert [o.key for o in spec.options] == ["a", "b", "c", "d"]
        assert spec.correct_option.key == "b"
        assert spec.options[0].expect == Expectation("binding", "count", 3)
        assert len(spec.programs) == 1
        assert spec.plan is not None

    def test_fences_are_opaque_to_braces(self):
        spec = parse_spec(LEEDS)
        assert "while ((i1 > 0) && (i2 > 0))" in spec.question
        assert spec.code_sources[0].startswith("int[] x1")

    def test_free_mode(self):
        spec = parse_spec(FREE)
        assert spec.mode is Mode.FREE
        assert spec.answer == Expectation("binding", "z", -1188)
        assert spec.options == ()

    def test_text_answer_with_braces(self):
        src = ('exercise "g" {\n  question {\nWrite a getter for x.\n  }\n'
               '  answer: "public int getX(){return x;}"\n}\n')
        spec = parse_spec(src)
        assert spec.answer == "public int getX(){return x;}"
        assert not spec.target_declared

    def test_two_correct_options_rejected(self):
        bad = LEEDS.replace('a: "3" expect count = 3',
                            'a: "3" * expect count = 3')
        with pytest.raises(DuplicateCorrectOption):
            parse_spec(bad)

    def test_no_correct_option_rejected(self):
        bad = LEEDS.replace('b: "2" * expect count = 2',
                            'b: "2" expect count = 2')
        with pytest.raises(MissingCorrectOption):
            parse_spec(bad)

    def test_duplicate_key_rejected(self):
        bad = LEEDS.replace('c: "1" expect count = 1',
                            'a: "1" expect count = 1')
        with pytest.raises(DuplicateOptionKey):
            parse_spec(bad)

    def test_unparseable_fence_rejected(self):
        bad = LOOP.replace("for(int i=0;i<=3;i+=2) System.out.print(i+\" \");",
                           "for(int i=0;i<=3;i+=2 System.out.print(i);")
        with pytest.raises(SpecError, match="fenced code"):
            parse_spec(bad)

    def test_needs_mcq_or_answer(self):
        with pytest.raises(SpecError, match="mcq block or an answer"):
            parse_spec('exercise "x" {\n  question {\nHm?\n  }\n}\n')

    def test_bad_plan_position_is_file_relative(self):
        bad = FREE.replace("read(DR) ; execute(Eval)", "read(DR ; execute(Eval)")
        with pytest.raises(SpecError) as err:
            parse_spec(bad)
        assert err.value.pos[0] == FREE.splitlines().index(
            "  plan { read(DR) ; execute(Eval) }") + 1

    def test_via_tag(self):
        src = LOOP.replace('a: "0 1 2" expect stdout = "0 1 2 "',
                           'a: "0 1 2" expect stdout = "0 1 2 " via buggy_limit')
        assert parse_spec(src).options[0].via == "buggy_limit"


class TestRender:
    @pytest.mark.parametrize("src", [LEEDS, LOOP, FREE])
    def test_round_trip(self, src):
        spec = parse_spec(src)
        again = parse_spec(render(spec))
        assert again == spec

    def test_render_is_a_fixpoint(self):
        once = render(parse_spec(LEEDS))
        assert render(parse_spec(once)) == once

    def test_default_target_round_trips(self):
        src = 'exercise "x" {\n  question {\nQ?\n  }\n  answer: 4\n}\n'
        spec = parse_spec(src)
        again = parse_spec(render(spec))
        # render writes the defaulted target explicitly
        assert again.declared_target == spec.declared_target
        assert again.target_declared


class TestValidate:
    def test_leeds_outcomes(self):
        report = validate_spec(parse_spec(LEEDS))
        assert report.ok
        assert report.options["b"].status == "confirmed"
        for key in "acd":
            assert report.options[key].status == "refuted"
        assert report.effect.bindings["count"] == 2

    def test_loop_outcomes(self):
        report = validate_spec(parse_spec(LOOP))
        assert report.ok
        assert report.options["c"].status == "confirmed"
        assert {report.options[k].status for k in "abde"} == {"refuted"}
        assert report.effect.stdout == "0 2 "

    def test_free_answer_confirmed(self):
        report = validate_spec(parse_spec(FREE))
        assert report.ok and report.findings == ()

    def test_tampered_correct_option(self):
        bad = LEEDS.replace('b: "2" * expect count = 2',
                            'b: "3" * expect count = 3')
        bad = bad.replace('a: "3" expect count = 3',
                          'a: "2" expect count = 2')
        report = validate_spec(parse_spec(bad))
        assert not report.ok
        codes = [f.code for f in report.findings]
        assert "CorrectOptionRefuted" in codes
        assert "DegenerateDistractor" in codes  # option a now matches reality

    def test_tampered_free_answer(self):
        bad = FREE.replace("answer: z = -1188", "answer: z = -1000")
        report = validate_spec(parse_spec(bad))
        assert [f.code for f in report.findings] == ["AnswerRefuted"]

    def test_unverifiable_text_answer_is_info(self):
        src = ('exercise "g" {\n  target: Apply x Procedural\n'
               '  question {\nWrite a getter for x.\n  }\n'
               '  answer: "public int getX(){return x;}"\n}\n')
        report = validate_spec(parse_spec(src))
        assert report.ok
        assert [f.code for f in report.findings] == ["Unverifiable"]
        assert report.findings[0].severity == "info"

    def test_crashing_subject_program(self):
        src = ('exercise "x" {\n  target: Apply x Factual\n  question {\n'
               '```\nint a = 1 / 0;\n```\n  }\n'
               '  mcq {\n    a: "1" * expect a = 1\n    b: "2" expect a = 2\n  }\n'
               '}\n')
        report = validate_spec(parse_spec(src))
        assert not report.ok
        assert any(f.code == "EvaluationFailed" and "DivisionByZero" in f.message
                   for f in report.findings)
        assert report.options["a"].status == "eval_failed"

    def test_duplicate_labels_flagged(self):
        bad = LEEDS.replace('c: "1" expect count = 1',
                            'c: "2" expect count = 1')
        report = validate_spec(parse_spec(bad))
        assert any(f.code == "DuplicateLabel" for f in report.findings)

    def test_default_target_warns(self):
        src = 'exercise "x" {\n  question {\nQ?\n  }\n  answer: 4\n}\n'
        report = validate_spec(parse_spec(src))
        codes = [f.code for f in report.findings]
        assert "DefaultTarget" in codes

    def test_validation_is_pure(self):
        spec = parse_spec(LEEDS)
        assert validate_spec(spec) == validate_spec(spec)

    def test_fuel_exhaustion_is_an_error_finding(self):
        src = ('exercise "x" {\n  target: Apply x Factual\n  question {\n'
               '```\nint n = 0;\nwhile (true) { n += 1; }\n```\n  }\n'
               '  mcq {\n    a: "1" * expect n = 1\n    b: "2" expect n = 2\n  }\n'
               '}\n')
        report = validate_spec(parse_spec(src), fuel=100)
        assert any(f.code == "EvaluationFailed" and "FuelExhausted" in f.message
                   for f in report.findings)
