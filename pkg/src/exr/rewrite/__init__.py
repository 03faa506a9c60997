"""Term rewriting: worked-solution graphs and wrong-answer diagnosis.

Terms are constants (exact rationals), symbols, and applications.
`normalize` provides the canonical form used for node identity; rule
packs pair expert rewrite steps with tagged buggy variants so that
`diagnose` can search for the most plausible explanation of a student's
answer.
"""

from .terms import (
    App, Const, PHead, PSeg, PVar, Sym, SubRef, Term, TermError,
    TermEvalError, contains_op, flatten_ac, format_term, normalize,
    parse_term, substitute, term_eval, term_key,
)
from .rules import (
    Binding, Guard, RewriteRule, RuleError, RulePack, check_guards,
    instantiate, match_term,
)
from .engine import (
    ExplanationPath, GraphEdge, GraphNode, NoExplanation, SolutionGraph,
    Step, Successor, build_solution_graph, diagnose, positions, replace,
    subterm, successors,
)

__all__ = [
    "App", "Const", "PHead", "PSeg", "PVar", "Sym", "SubRef", "Term",
    "TermError", "TermEvalError", "contains_op", "flatten_ac", "format_term",
    "normalize", "parse_term", "substitute", "term_eval", "term_key",
    "Binding", "Guard", "RewriteRule", "RuleError", "RulePack",
    "check_guards", "instantiate", "match_term",
    "ExplanationPath", "GraphEdge", "GraphNode", "NoExplanation",
    "SolutionGraph", "Step", "Successor", "build_solution_graph", "diagnose",
    "positions", "replace", "subterm", "successors",
]
