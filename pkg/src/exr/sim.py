"""Prototypical-student simulation over solution plans.

A student profile is a small stochastic model: a knowledge level, a
preference weight per reasoning layer, and slip probabilities for
skipping cheap steps flagged by the plan lint.  `simulate` walks a plan
trial by trial.  Choice branches are drawn from a softmax over branch
effort penalized by layer mismatch, flagged subplans are dropped with
the profile's slip probability when the plan exhibits a detected
oscillation pattern, and atoms whose knowledge row exceeds the
profile's level escalate to Create and count as misses.  A trial is
solved when nothing was dropped or escalated.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .bloom import KnowledgeCategory, dynamic_cell
from .plans import (
    Atom,
    Choice,
    Layer,
    Plan,
    PlanError,
    PlanExpr,
    Seq,
    Star,
    VerbCellMap,
    Weights,
    _expr_pos,
    _Typing,
    missing_path_lint,
    plan_summary,
    type_plan,
)

_SLIP_IDS = ("P1", "P2", "P3", "generic")


@dataclass(frozen=True)
class StudentProfile:
    """A parameterized random walker standing in for a kind of student."""

    label: str
    knowledge_level: KnowledgeCategory
    layer_preference: dict[Layer, float]
    slip: dict[str, float] = field(default_factory=dict)
    temperature: float = 1.0

    def __post_init__(self):
        total = sum(self.layer_preference.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"layer preferences sum to {total}, expected 1")
        for layer, w in self.layer_preference.items():
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"preference for {layer.value} is {w}, "
                                 f"expected a weight in [0, 1]")
        for pid, p in self.slip.items():
            if pid not in _SLIP_IDS:
                raise ValueError(f"unknown slip id {pid!r}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"slip {pid} is {p}, expected in [0, 1]")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")


@dataclass
class SimOutcome:
    """Aggregated results of `simulate`: per-site miss counts and
    per-choice branch counts over all trials."""

    trials: int
    solved: int
    misses: dict[str, int]
    branch_counts: dict[str, dict[str, int]]

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "solved": self.solved,
            "misses": dict(sorted(self.misses.items())),
            "branch_counts": {
                site: dict(sorted(counts.items()))
                for site, counts in sorted(self.branch_counts.items())
            },
        }


# --- profile files --------------------------------------------------------

_PAIR_RE = re.compile(r"([A-Za-z]\w*)\s*=\s*([0-9.]+)$")


def _parse_pairs(rest: str, allowed: tuple[str, ...], what: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for token in rest.split():
        m = _PAIR_RE.fullmatch(token)
        if m is None:
            raise ValueError(f"cannot parse {what} entry {token!r}")
        key, value = m.group(1), float(m.group(2))
        if key not in allowed:
            raise ValueError(f"unknown {what} key {key!r}")
        if key in out:
            raise ValueError(f"duplicate {what} key {key!r}")
        out[key] = value
    return out


def parse_profile(text: str, label: str = "student") -> StudentProfile:
    """Parse a profile from statements separated by newlines or `;`.

    Statements: `label: NAME`, `level: KNOWLEDGE`, `prefer L=w ...`,
    `slip ID=p ...`, `temperature: T`.  `#` starts a comment.  Only the
    level is required; preferences default to uniform.
    """
    level: KnowledgeCategory | None = None
    prefs: dict[Layer, float] | None = None
    slip: dict[str, float] = {}
    temperature = 1.0
    statements: list[str] = []
    for raw in text.splitlines():
        statements.extend(raw.split("#", 1)[0].split(";"))
    for stmt in statements:
        s = stmt.strip()
        if not s:
            continue
        if s.startswith("label:"):
            label = s[len("label:"):].strip()
            if not label:
                raise ValueError("empty profile label")
        elif s.startswith("level:"):
            name = s[len("level:"):].strip()
            try:
                level = KnowledgeCategory[name]
            except KeyError:
                raise ValueError(f"unknown knowledge level {name!r}") from None
        elif s.startswith("prefer"):
            raw_prefs = _parse_pairs(s[len("prefer"):],
                                     tuple(l.value for l in Layer), "preference")
            prefs = {l: raw_prefs.get(l.value, 0.0) for l in Layer}
        elif s.startswith("slip"):
            slip = _parse_pairs(s[len("slip"):], _SLIP_IDS, "slip")
        elif s.startswith("temperature:"):
            temperature = float(s[len("temperature:"):].strip())
        else:
            raise ValueError(f"cannot parse profile statement {s!r}")
    if level is None:
        raise ValueError("profile needs a `level:` statement")
    if prefs is None:
        prefs = {l: 1.0 / len(Layer) for l in Layer}
    return StudentProfile(label, level, prefs, slip, temperature)


def load_profile(path: str | Path) -> StudentProfile:
    """Load a profile file; the label defaults to the file stem."""
    path = Path(path)
    return parse_profile(path.read_text(), label=path.stem)


# --- the walker -----------------------------------------------------------

def _slip_probability(profile: StudentProfile, patterns: list[str]) -> float:
    """Drop probability for flagged sites given the plan's patterns."""
    specific = [profile.slip[p] for p in patterns if p in profile.slip]
    if specific:
        return max(specific)
    if patterns:
        return profile.slip.get("generic", 0.0)
    return 0.0


class _Walker:
    """Per-plan precomputation shared across trials."""

    def __init__(self, plan: Plan, profile: StudentProfile,
                 verb_cells: VerbCellMap, weights: Weights):
        self.profile = profile
        self.verb_cells = verb_cells
        report = type_plan(plan, verb_cells, weights)
        if report.truncated:
            raise PlanError("too many paths to simulate; raise path_bound "
                            "or simplify the plan")
        self.slip_p = _slip_probability(profile, report.patterns)
        self.expanded = plan.expanded()
        self.typing = _Typing(verb_cells, weights)
        self.reps = max(0, int(round(weights.star_factor)))
        self.flagged = {(f.site_label, f.site_pos)
                        for f in missing_path_lint(plan, verb_cells, weights)}
        # id(Choice node) -> (site key, left label, right label, P(left))
        self.choices: dict[int, tuple[str, str, str, float]] = {}
        self._prepare(self.expanded, set())

    def _prepare(self, e: PlanExpr, keys: set[str]) -> None:
        if isinstance(e, Seq):
            self._prepare(e.left, keys)
            self._prepare(e.right, keys)
        elif isinstance(e, Star):
            self._prepare(e.body, keys)
        elif isinstance(e, Choice):
            left_label = plan_summary(e.left)
            right_label = plan_summary(e.right)
            if left_label == right_label:
                left_label += "#1"
                right_label += "#2"
            key = f"{left_label} | {right_label}"
            if key in keys:
                key += f" @{e.pos[0]}:{e.pos[1]}"
            keys.add(key)
            self.choices[id(e)] = (key, left_label, right_label,
                                   self._left_probability(e))
            self._prepare(e.left, keys)
            self._prepare(e.right, keys)

    def _score(self, e: PlanExpr) -> float:
        """Branch effort scaled up by layer-preference mismatch."""
        effort = self.typing.analyze(e)[0]
        atoms = self.typing.min_path_atoms(e)
        affinity = 0.0
        if atoms:
            pref = self.profile.layer_preference
            affinity = sum(pref.get(a.layer, 0.0) for a in atoms) / len(atoms)
        return effort * (2.0 - affinity)

    def _left_probability(self, e: Choice) -> float:
        sl, sr = self._score(e.left), self._score(e.right)
        t = self.profile.temperature
        base = min(sl, sr)
        wl = math.exp(-(sl - base) / t)
        wr = math.exp(-(sr - base) / t)
        return wl / (wl + wr)

    def run_trial(self, rng: random.Random, misses: dict[str, int],
                  branches: dict[str, dict[str, int]]) -> int:
        """Walk one trial; returns the number of miss events."""
        return self._walk(self.expanded, rng, misses, branches)

    def _walk(self, e: PlanExpr, rng, misses, branches) -> int:
        if isinstance(e, Atom):
            cell = self.typing.cell_of(e)
            if dynamic_cell(cell, self.profile.knowledge_level) != cell:
                misses[e.verb] = misses.get(e.verb, 0) + 1
                return 1
            return 0
        if isinstance(e, Seq):
            return (self._walk_side(e.left, rng, misses, branches)
                    + self._walk_side(e.right, rng, misses, branches))
        if isinstance(e, Choice):
            key, left_label, right_label, p_left = self.choices[id(e)]
            take_left = rng.random() < p_left
            label = left_label if take_left else right_label
            per_site = branches.setdefault(key, {})
            per_site[label] = per_site.get(label, 0) + 1
            return self._walk(e.left if take_left else e.right,
                              rng, misses, branches)
        total = 0
        for _ in range(self.reps):
            total += self._walk(e.body, rng, misses, branches)
        return total

    def _walk_side(self, side: PlanExpr, rng, misses, branches) -> int:
        label = plan_summary(side)
        if (label, _expr_pos(side)) in self.flagged and self.slip_p > 0.0:
            if rng.random() < self.slip_p:
                misses[label] = misses.get(label, 0) + 1
                return 1
        return self._walk(side, rng, misses, branches)


def simulate(plan: Plan, profile: StudentProfile, verb_cells: VerbCellMap,
             weights: Weights | None = None, seed: int = 0,
             trials: int = 1) -> SimOutcome:
    """Run `trials` independent walks of the plan.

    Each trial draws from its own substream seeded by (seed, trial
    index), so results are bit-identical across runs and independent of
    any batching.  Atoms missing from the verb map get the same default
    cells the typing assumes.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    weights = weights or Weights()
    walker = _Walker(plan, profile, verb_cells, weights)
    misses: dict[str, int] = {}
    branch_counts: dict[str, dict[str, int]] = {}
    solved = 0
    for t in range(trials):
        rng = random.Random(seed * 1_000_003 + t)
        if walker.run_trial(rng, misses, branch_counts) == 0:
            solved += 1
    return SimOutcome(trials, solved, misses, branch_counts)


def branch_probabilities(plan: Plan, profile: StudentProfile,
                         verb_cells: VerbCellMap,
                         weights: Weights | None = None
                         ) -> dict[str, dict[str, float]]:
    """Model probabilities for every Choice site, keyed like the
    branch_counts of `simulate`."""
    weights = weights or Weights()
    walker = _Walker(plan, profile, verb_cells, weights)
    out: dict[str, dict[str, float]] = {}
    for key, left_label, right_label, p_left in walker.choices.values():
        out[key] = {left_label: p_left, right_label: 1.0 - p_left}
    return out
