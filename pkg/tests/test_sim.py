"""Student-simulation tests.

Statistical assertions use 3-sigma binomial bands around the model
probability, wide enough to be stable for the fixed seeds used here.
The softmax check for the expert on the Eval-vs-MDR choice has a
closed form: both branches cost 5, affinities 0.1 and 0.6, so
P(MDR branch) = 1 / (1 + exp(-2.5)).
"""

import math
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from exr.bloom import KnowledgeCategory as K
from exr.plans import Layer, PlanError, Weights, load_verb_map, load_weights, parse_plan
from exr.sim import (
    SimOutcome,
    StudentProfile,
    branch_probabilities,
    load_profile,
    parse_profile,
    simulate,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "exr" / "data"

FIG_PLAN = "read(DR) ; infer_intent(MDR) ; count_manual(Eval) ; conclude(DR)"
EXTENDED_PLAN = "read(DR) ; infer_intent(MDR) ; count_common(DR) ; check_bounds(Eval)"
CHOICE_PLAN = "read(DR) ; (execute(Eval) | infer_intent(MDR)) ; conclude(DR)"


@pytest.fixture(scope="module")
def verb_cells():
    return load_verb_map(DATA / "verbs.txt")


@pytest.fixture(scope="module")
def weights():
    return load_weights(DATA / "weights.txt")


@pytest.fixture(scope="module")
def expert():
    return load_profile(DATA / "profiles" / "expert.profile")


@pytest.fixture(scope="module")
def novice():
    return load_profile(DATA / "profiles" / "novice.profile")


def three_sigma(n: int, p: float) -> float:
    return 3 * math.sqrt(n * p * (1 - p))


class TestProfiles:
    def test_shipped_expert(self, expert):
        assert expert.label == "expert"
        assert expert.knowledge_level is K.Procedural
        assert expert.layer_preference == {
            Layer.Eval: 0.1, Layer.DR: 0.3, Layer.MDR: 0.6}
        assert expert.slip == {"P3": 0.3}
        assert expert.temperature == 1.0

    def test_shipped_novice(self, novice):
        assert novice.label == "novice"
        assert novice.layer_preference[Layer.Eval] == 0.6
        assert novice.slip == {}

    def test_one_line_form(self):
        p = parse_profile(
            "level: Procedural; prefer Eval=0.6 DR=0.3 MDR=0.1; slip P3=0.2")
        assert p.knowledge_level is K.Procedural
        assert p.layer_preference[Layer.MDR] == 0.1
        assert p.slip == {"P3": 0.2}

    def test_defaults(self):
        p = parse_profile("level: Factual")
        assert p.label == "student"
        assert p.layer_preference == {l: pytest.approx(1 / 3) for l in Layer}
        assert p.slip == {} and p.temperature == 1.0

    def test_label_statement_overrides_stem(self, tmp_path):
        f = tmp_path / "anon.profile"
        f.write_text("label: keen\nlevel: Conceptual\n")
        assert load_profile(f).label == "keen"

    def test_label_defaults_to_stem(self, tmp_path):
        f = tmp_path / "anon.profile"
        f.write_text("level: Conceptual\n")
        assert load_profile(f).label == "anon"

    def test_comments_and_temperature(self):
        p = parse_profile("level: Procedural  # a comment\ntemperature: 2.5")
        assert p.temperature == 2.5

    @pytest.mark.parametrize("text,fragment", [
        ("prefer Eval=1.0", "needs a `level:`"),
        ("level: Wisdom", "unknown knowledge level"),
        ("level: Factual; prefer Eval=0.9 DR=0.3 MDR=0.1", "sum to"),
        ("level: Factual; prefer Eval=0.5 DR=0.5 MDR=0.5 Eval=0.5", "duplicate"),
        ("level: Factual; prefer Meta=1.0", "unknown preference key"),
        ("level: Factual; slip P9=0.1", "unknown slip key"),
        ("level: Factual; slip P3=1.5", "expected in [0, 1]"),
        ("level: Factual; temperature: 0", "positive"),
        ("level: Factual; wander: yes", "cannot parse"),
        ("level: Factual; prefer Eval==0.5", "cannot parse"),
        ("label: ; level: Factual", "empty profile label"),
    ])
    def test_rejects(self, text, fragment):
        with pytest.raises(ValueError, match=None) as err:
            parse_profile(text)
        assert fragment in str(err.value)

    def test_profile_invariants_direct(self):
        with pytest.raises(ValueError):
            StudentProfile("x", K.Factual,
                           {Layer.Eval: 0.7, Layer.DR: 0.7, Layer.MDR: -0.4})


class TestBranchChoice:
    def test_expert_probability_closed_form(self, expert, verb_cells, weights):
        probs = branch_probabilities(
            parse_plan(CHOICE_PLAN), expert, verb_cells, weights)
        site = probs["execute | infer_intent"]
        assert site["infer_intent"] == pytest.approx(1 / (1 + math.exp(-2.5)))
        assert site["execute"] + site["infer_intent"] == pytest.approx(1.0)

    def test_mirrored_profiles_mirror_probabilities(
            self, expert, novice, verb_cells, weights):
        plan = parse_plan(CHOICE_PLAN)
        pe = branch_probabilities(plan, expert, verb_cells, weights)
        pn = branch_probabilities(plan, novice, verb_cells, weights)
        assert pe["execute | infer_intent"]["infer_intent"] == pytest.approx(
            pn["execute | infer_intent"]["execute"])

    def test_expert_majority_on_mdr_branch(self, expert, verb_cells, weights):
        plan = parse_plan(CHOICE_PLAN)
        out = simulate(plan, expert, verb_cells, weights, seed=7, trials=10_000)
        counts = out.branch_counts["execute | infer_intent"]
        assert counts["infer_intent"] > counts["execute"]
        assert counts["execute"] + counts["infer_intent"] == out.trials
        p = branch_probabilities(plan, expert, verb_cells,
                                 weights)["execute | infer_intent"]["infer_intent"]
        assert abs(counts["infer_intent"] - p * out.trials) <= three_sigma(
            out.trials, p)
        assert out.solved == out.trials and out.misses == {}

    def test_novice_majority_on_eval_branch(self, novice, verb_cells, weights):
        plan = parse_plan(CHOICE_PLAN)
        out = simulate(plan, novice, verb_cells, weights, seed=7, trials=10_000)
        counts = out.branch_counts["execute | infer_intent"]
        assert counts["execute"] > counts["infer_intent"]
        p = branch_probabilities(plan, novice, verb_cells,
                                 weights)["execute | infer_intent"]["execute"]
        assert abs(counts["execute"] - p * out.trials) <= three_sigma(
            out.trials, p)
        assert out.solved == out.trials and out.misses == {}

    def test_high_temperature_flattens_choice(self, verb_cells, weights):
        hot = parse_profile("level: Procedural; "
                            "prefer Eval=0.1 DR=0.3 MDR=0.6; temperature: 1000")
        probs = branch_probabilities(
            parse_plan(CHOICE_PLAN), hot, verb_cells, weights)
        assert probs["execute | infer_intent"]["execute"] == pytest.approx(
            0.5, abs=0.01)

    def test_choice_under_star_counts_each_pass(self, expert, verb_cells, weights):
        out = simulate(parse_plan("(execute(Eval) | infer_intent(MDR))*"),
                       expert, verb_cells, weights, seed=3, trials=100)
        counts = out.branch_counts["execute | infer_intent"]
        assert sum(counts.values()) == 2 * out.trials

    def test_huge_effort_gap_does_not_overflow(self, verb_cells, weights):
        cold = parse_profile("level: Procedural; temperature: 0.001")
        plan = parse_plan("read(DR) | conclude(DR)")
        probs = branch_probabilities(plan, cold, verb_cells, weights)
        site = probs["read | conclude"]
        assert site["read"] == pytest.approx(1.0)


class TestSlip:
    def test_expert_slips_on_flagged_check(self, expert, verb_cells, weights):
        out = simulate(parse_plan(EXTENDED_PLAN), expert, verb_cells, weights,
                       seed=42, trials=10_000)
        missed = out.misses["check_bounds"]
        assert abs(missed - 0.3 * out.trials) <= three_sigma(out.trials, 0.3)
        assert out.solved == out.trials - missed
        assert out.branch_counts == {}

    def test_novice_never_slips(self, novice, verb_cells, weights):
        out = simulate(parse_plan(EXTENDED_PLAN), novice, verb_cells, weights,
                       seed=42, trials=500)
        assert out.solved == out.trials and out.misses == {}

    def test_generic_slip_covers_unlisted_patterns(self, verb_cells, weights):
        profile = parse_profile(
            "level: Procedural; prefer Eval=0.4 DR=0.4 MDR=0.2; slip generic=0.5")
        out = simulate(parse_plan("read(DR) ; (run_case(Eval) ; compare(DR))*"),
                       profile, verb_cells, weights, seed=11, trials=2_000)
        missed = out.misses["read"]
        assert abs(missed - 0.5 * out.trials) <= three_sigma(out.trials, 0.5)

    def test_specific_slip_beats_generic(self, verb_cells, weights):
        profile = parse_profile("level: Procedural; slip P3=0.3 generic=0.9")
        out = simulate(parse_plan(EXTENDED_PLAN), profile, verb_cells, weights,
                       seed=5, trials=10_000)
        assert abs(out.misses["check_bounds"] - 3_000) <= three_sigma(
            out.trials, 0.3)

    def test_largest_detected_slip_wins(self, verb_cells, weights):
        profile = parse_profile("level: Procedural; slip P2=0.1 P3=0.4")
        out = simulate(parse_plan(EXTENDED_PLAN), profile, verb_cells, weights,
                       seed=5, trials=10_000)
        assert abs(out.misses["check_bounds"] - 4_000) <= three_sigma(
            out.trials, 0.4)

    def test_no_slip_without_detected_pattern(self, verb_cells, weights):
        # The tail `compare` is 4x cheaper, but an all-DR signature has
        # no oscillation pattern, so even a certain slip never fires.
        profile = parse_profile("level: Procedural; slip generic=1.0")
        out = simulate(parse_plan("count_common(DR) ; conclude(DR) ; compare(DR)"),
                       profile, verb_cells, weights, seed=5, trials=200)
        assert out.solved == out.trials and out.misses == {}


class TestEscalation:
    def test_level_below_knowledge_row_misses(self, verb_cells, weights):
        profile = parse_profile("level: Factual")
        out = simulate(parse_plan("execute(Eval)"), profile, verb_cells,
                       weights, seed=1, trials=50)
        assert out.misses == {"execute": 50}
        assert out.solved == 0

    def test_level_at_knowledge_row_is_fine(self, verb_cells, weights):
        profile = parse_profile("level: Procedural")
        out = simulate(parse_plan("execute(Eval)"), profile, verb_cells,
                       weights, seed=1, trials=50)
        assert out.solved == 50 and out.misses == {}

    def test_escalation_counts_every_star_pass(self, verb_cells, weights):
        profile = parse_profile("level: Factual")
        out = simulate(parse_plan("(execute(Eval))*"), profile, verb_cells,
                       weights, seed=1, trials=10)
        assert out.misses == {"execute": 20}


class TestDeterminism:
    def test_bit_exact_repeats(self, expert, verb_cells, weights):
        plan = parse_plan(EXTENDED_PLAN)
        a = simulate(plan, expert, verb_cells, weights, seed=42, trials=10_000)
        b = simulate(plan, expert, verb_cells, weights, seed=42, trials=10_000)
        assert a == b
        assert a.to_json() == b.to_json()

    def test_single_trial_repeats(self, expert, verb_cells, weights):
        plan = parse_plan(CHOICE_PLAN)
        a = simulate(plan, expert, verb_cells, weights, seed=99, trials=1)
        b = simulate(plan, expert, verb_cells, weights, seed=99, trials=1)
        assert a == b and a.trials == 1

    def test_trial_prefix_stability(self, expert, verb_cells, weights):
        # Substreams hang off (seed, trial index), so a longer run
        # extends a shorter one instead of reshuffling it.
        plan = parse_plan(EXTENDED_PLAN)
        short = simulate(plan, expert, verb_cells, weights, seed=8, trials=100)
        full = simulate(plan, expert, verb_cells, weights, seed=8, trials=200)
        assert short.misses.get("check_bounds", 0) <= full.misses["check_bounds"]


class TestValidation:
    def test_trials_must_be_positive(self, expert, verb_cells, weights):
        with pytest.raises(ValueError):
            simulate(parse_plan(FIG_PLAN), expert, verb_cells, weights,
                     seed=0, trials=0)

    def test_path_explosion_is_rejected(self, expert, verb_cells, weights):
        wide = " ; ".join(f"(x{i}(Eval) | y{i}(DR))" for i in range(7))
        with pytest.raises(PlanError):
            simulate(parse_plan(wide), expert, verb_cells, weights,
                     seed=0, trials=1)

    def test_default_weights(self, expert, verb_cells):
        out = simulate(parse_plan(FIG_PLAN), expert, verb_cells,
                       seed=0, trials=5)
        assert out.solved == 5


@settings(max_examples=40, deadline=None)
@given(
    raw=st.tuples(st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1)),
    slips=st.dictionaries(st.sampled_from(["P1", "P2", "P3", "generic"]),
                          st.floats(0, 1), max_size=4),
    level=st.sampled_from([K.Procedural, K.Metacognitive]),
    seed=st.integers(0, 2**16),
)
def test_single_clean_path_always_solves(raw, slips, level, seed):
    # The reference plan has one path, no flagged sites, and no
    # oscillation patterns, so any profile at or above Procedural
    # solves every trial no matter its slips or preferences.
    total = sum(raw)
    prefs = {l: v / total for l, v in zip(Layer, raw)}
    profile = StudentProfile("any", level, prefs, slips)
    verb_cells = load_verb_map(DATA / "verbs.txt")
    out = simulate(parse_plan(FIG_PLAN), profile, verb_cells,
                   Weights(), seed=seed, trials=20)
    assert out.solved == out.trials == 20
    assert out.misses == {}
