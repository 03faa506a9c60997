"""Two-dimensional cognitive classification of learning-goal statements.

A statement like "to be able to distinguish between an interpreter and a
compiler" is reduced to a verb plus noun phrases, then mapped through a
clue table onto a (process, knowledge) cell.  The process axis orders six
cognitive operations, the knowledge axis four content kinds; both are
totally ordered so cells support componentwise min/max.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path


class ProcessCategory(IntEnum):
    Remember = 0
    Understand = 1
    Apply = 2
    Analyze = 3
    Evaluate = 4
    Create = 5


class KnowledgeCategory(IntEnum):
    Factual = 0
    Conceptual = 1
    Procedural = 2
    Metacognitive = 3


@dataclass(frozen=True, order=True)
class BloomCell:
    process: ProcessCategory
    knowledge: KnowledgeCategory

    def __str__(self) -> str:
        return f"({self.process.name}, {self.knowledge.name})"

    def max_with(self, other: "BloomCell") -> "BloomCell":
        return BloomCell(max(self.process, other.process),
                         max(self.knowledge, other.knowledge))

    def min_with(self, other: "BloomCell") -> "BloomCell":
        return BloomCell(min(self.process, other.process),
                         min(self.knowledge, other.knowledge))

    def dominates(self, other: "BloomCell") -> bool:
        return self.process >= other.process and self.knowledge >= other.knowledge


class CannotNormalize(Exception):
    """No verb found in the statement."""


class Unclassifiable(Exception):
    def __init__(self, missing: str, verb: str = "", nouns: tuple[str, ...] = ()):
        assert missing in ("verb", "noun", "both")
        self.missing = missing
        self.verb = verb
        self.nouns = nouns
        super().__init__(f"no clue entry for {missing}: "
                         f"verb={verb!r} nouns={list(nouns)}")


# Words skipped when segmenting a statement into verb and noun phrases.
STOPWORDS = frozenset("""
    a an the to be able being is are was were been of in on at by for with
    from as and or its it their his her this that these those into onto
    how what which who whom whose when where why between among via per
    do does did done then than also not
""".split())


def _singularize(word: str) -> str:
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith("s") and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    return word


def _tokens(text: str) -> list[str]:
    return re.findall(r"[a-z][a-z0-9'-]*", text.lower())


class ClueTable:
    """Lookup tables: verb lemma -> process, concept id -> knowledge.

    Concept ids are hyphenated lowercase compounds with a singularized
    head word, e.g. "primitive-data-type".  Lookups are case-insensitive.
    """

    def __init__(self,
                 verbs: dict[str, ProcessCategory],
                 nouns: dict[str, KnowledgeCategory]):
        self.verbs = {k.lower(): v for k, v in verbs.items()}
        self.nouns = {k.lower(): v for k, v in nouns.items()}

    @classmethod
    def from_text(cls, text: str) -> "ClueTable":
        verbs: dict[str, ProcessCategory] = {}
        nouns: dict[str, KnowledgeCategory] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.fullmatch(r"(verb|noun)\s+([\w-]+)\s*->\s*(\w+)", line)
            if m is None:
                raise ValueError(f"clue table line {lineno}: cannot parse {raw!r}")
            kind, lemma, target = m.groups()
            if kind == "verb":
                verbs[lemma.lower()] = ProcessCategory[target]
            else:
                nouns[lemma.lower()] = KnowledgeCategory[target]
        return cls(verbs, nouns)

    @classmethod
    def from_file(cls, path: str | Path) -> "ClueTable":
        return cls.from_text(Path(path).read_text())


def normalize_statement(text: str, clues: ClueTable) -> tuple[str, list[str]]:
    """Reduce a goal statement to (verb, noun phrases).

    The verb is the first token present in the clue table's verb lexicon;
    stopwords are dropped and the remaining maximal runs of content words
    become hyphenated concept ids with a singularized head word.
    Raises CannotNormalize when no verb is found.
    """
    toks = _tokens(text)
    verb = None
    rest: list[str] = []
    for i, tok in enumerate(toks):
        if tok in clues.verbs:
            verb = tok
            rest = toks[i + 1:]
            break
    if verb is None:
        raise CannotNormalize(f"no known verb in {text!r}")
    phrases: list[str] = []
    run: list[str] = []
    for tok in rest + ["and"]:  # sentinel flushes the last run
        if tok in STOPWORDS:
            if run:
                run[-1] = _singularize(run[-1])
                phrases.append("-".join(run))
                run = []
        else:
            run.append(tok)
    return verb, phrases


def classify(verb: str, noun_phrases: list[str], clues: ClueTable) -> BloomCell:
    """Map a normalized statement onto a cell.

    The process comes from the verb; the knowledge is the maximum over the
    noun phrases that the table knows.  Raises Unclassifiable naming the
    side(s) whose lookup failed entirely.
    """
    process = clues.verbs.get(verb.lower())
    knowledges = [clues.nouns[np.lower()] for np in noun_phrases
                  if np.lower() in clues.nouns]
    missing = None
    if process is None and not knowledges:
        missing = "both"
    elif process is None:
        missing = "verb"
    elif not knowledges:
        missing = "noun"
    if missing is not None:
        raise Unclassifiable(missing, verb, tuple(noun_phrases))
    return BloomCell(process, max(knowledges))


def classify_statement(text: str, clues: ClueTable) -> BloomCell:
    verb, phrases = normalize_statement(text, clues)
    return classify(verb, phrases, clues)


def dynamic_cell(static: BloomCell, student: KnowledgeCategory) -> BloomCell:
    """Re-situate a cell for a student below the cell's knowledge row.

    A task whose knowledge kind the student has not yet acquired demands
    construction from scratch: the cell escalates to (Create, knowledge).
    Students at or above the row see the static cell unchanged.
    """
    if student < static.knowledge:
        return BloomCell(ProcessCategory.Create, static.knowledge)
    return static


class CourseLevel(IntEnum):
    ReadingUnderstanding = 0
    WritingSmallFragments = 1
    WritingNontrivial = 2


_COURSE_LEVELS = {
    ProcessCategory.Remember: CourseLevel.ReadingUnderstanding,
    ProcessCategory.Understand: CourseLevel.ReadingUnderstanding,
    ProcessCategory.Apply: CourseLevel.WritingSmallFragments,
    ProcessCategory.Analyze: CourseLevel.WritingSmallFragments,
    ProcessCategory.Evaluate: CourseLevel.WritingNontrivial,
    ProcessCategory.Create: CourseLevel.WritingNontrivial,
}


def course_level(cell: BloomCell) -> CourseLevel:
    """Introductory-course band for a cell; depends on the process only."""
    return _COURSE_LEVELS[cell.process]


@dataclass(frozen=True)
class Grouping:
    """A named partition of one cell axis into coarser bands."""
    name: str
    axis: str  # "process" | "knowledge"
    mapping: dict  # category -> band name

    def band(self, cell: BloomCell) -> str:
        key = cell.process if self.axis == "process" else cell.knowledge
        return self.mapping[key]


def load_grouping(path: str | Path) -> Grouping:
    axis = None
    mapping: dict = {}
    name = Path(path).stem
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"(process|knowledge)\s+(\w+)\s*->\s*([\w-]+)", line)
        if m is None:
            raise ValueError(f"grouping line {lineno}: cannot parse {raw!r}")
        kind, cat, band = m.groups()
        if axis is None:
            axis = kind
        elif axis != kind:
            raise ValueError(f"grouping line {lineno}: mixed axes")
        key = ProcessCategory[cat] if kind == "process" else KnowledgeCategory[cat]
        mapping[key] = band
    if axis is None:
        raise ValueError(f"empty grouping file: {path}")
    expected = set(ProcessCategory) if axis == "process" else set(KnowledgeCategory)
    missing = expected - set(mapping)
    if missing:
        raise ValueError(f"grouping {name} misses {sorted(c.name for c in missing)}")
    return Grouping(name, axis, mapping)
