"""Applying rule packs: successor states, solution graphs, diagnosis.

`successors` enumerates single rewrite steps anywhere in a term.
`build_solution_graph` expands a task with expert rules only and propagates
results bottom-up, mirroring how a worked solution decomposes into
subtasks.  `diagnose` searches expert and buggy steps for derivations that
land exactly on a student's answer and ranks them by how much went wrong.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .rules import Binding, RewriteRule, RulePack, instantiate
from .terms import App, Term, contains_op, format_term, normalize


def subterm(t: Term, pos: tuple[int, ...]) -> Term:
    for i in pos:
        if not isinstance(t, App):
            raise IndexError(f"no subterm at {pos}")
        t = t.args[i]
    return t


def replace(t: Term, pos: tuple[int, ...], new: Term) -> Term:
    if not pos:
        return new
    if not isinstance(t, App):
        raise IndexError(f"no subterm at {pos}")
    i = pos[0]
    args = list(t.args)
    args[i] = replace(args[i], pos[1:], new)
    return App(t.op, tuple(args))


def positions(t: Term) -> list[tuple[int, ...]]:
    """All positions in breadth-first order, outermost first."""
    out: list[tuple[int, ...]] = []
    queue: deque[tuple[tuple[int, ...], Term]] = deque([((), t)])
    while queue:
        pos, node = queue.popleft()
        out.append(pos)
        if isinstance(node, App):
            for i, a in enumerate(node.args):
                queue.append((pos + (i,), a))
    return out


@dataclass(frozen=True)
class Successor:
    rule: str
    kind: str
    tags: frozenset[str]
    pos: tuple[int, ...]
    term: Term


def successors(term: Term, rules: tuple[RewriteRule, ...]) -> list[Successor]:
    """Every distinct single-step rewrite of `term` under `rules`.

    Rules are tried at every position (outermost first) with every
    matching binding; results are normalized and deduplicated per rule
    name.  Steps that leave the term unchanged are dropped.
    """
    term = normalize(term)
    out: list[Successor] = []
    seen: set[tuple[str, Term]] = set()
    for pos in positions(term):
        sub = subterm(term, pos)
        for rule in rules:
            for binding in rule.matches(sub):
                subresults = tuple(instantiate(st, binding)
                                   for st in rule.subtasks)
                built = instantiate(rule.rebuild, binding, subresults)
                result = normalize(replace(term, pos, built))
                if result == term:
                    continue
                key = (rule.name, result)
                if key in seen:
                    continue
                seen.add(key)
                out.append(Successor(rule.name, rule.kind, rule.tags,
                                     pos, result))
    return out


# --- solution graphs --------------------------------------------------------

@dataclass
class GraphEdge:
    rule: str
    subtasks: tuple[Term, ...]
    rebuild: Term
    binding: Binding


@dataclass
class GraphNode:
    term: Term
    depth: int
    edges: list[GraphEdge] = field(default_factory=list)
    result: Term | None = None


@dataclass
class SolutionGraph:
    root: Term
    nodes: dict[Term, GraphNode]
    depth_exceeded: bool

    def solution(self) -> Term | None:
        return self.nodes[self.root].result

    def node(self, term: Term) -> GraphNode:
        return self.nodes[normalize(term)]


def build_solution_graph(task: Term, pack: RulePack,
                         max_depth: int = 8) -> SolutionGraph:
    """Expand `task` with the pack's expert rules.

    Each node gets at most one edge per rule name: the first clause and
    first binding that match the whole node term.  Subtasks become child
    nodes.  Results propagate bottom-up: a node with no applicable rule
    and no pending derivative is its own result; otherwise the first edge
    whose subtasks are all solved supplies the result through its rebuild
    template.
    """
    root = normalize(task)
    experts = [r for r in pack.rules if r.kind == "expert"]
    names: list[str] = []
    for r in experts:
        if r.name not in names:
            names.append(r.name)
    nodes: dict[Term, GraphNode] = {}
    depth_exceeded = False
    queue: deque[tuple[Term, int]] = deque([(root, 0)])
    while queue:
        term, depth = queue.popleft()
        if term in nodes:
            continue
        node = GraphNode(term, depth)
        nodes[term] = node
        for name in names:
            for clause in experts:
                if clause.name != name:
                    continue
                binding = next(clause.matches(term), None)
                if binding is None:
                    continue
                subtasks = tuple(normalize(instantiate(st, binding))
                                 for st in clause.subtasks)
                node.edges.append(GraphEdge(name, subtasks,
                                            clause.rebuild, binding))
                break
        if depth >= max_depth:
            if any(e.subtasks for e in node.edges):
                depth_exceeded = True
            continue
        for e in node.edges:
            for st in e.subtasks:
                queue.append((st, depth + 1))

    changed = True
    while changed:
        changed = False
        for node in nodes.values():
            if node.result is not None:
                continue
            if not node.edges:
                if not contains_op(node.term, "d"):
                    node.result = node.term
                    changed = True
                continue
            for e in node.edges:
                subresults = tuple(nodes[st].result for st in e.subtasks
                                   if st in nodes)
                if len(subresults) != len(e.subtasks) \
                        or any(r is None for r in subresults):
                    continue
                node.result = normalize(
                    instantiate(e.rebuild, e.binding, subresults))
                changed = True
                break
    return SolutionGraph(root, nodes, depth_exceeded)


# --- diagnosis ----------------------------------------------------------------

class NoExplanation(Exception):
    def __init__(self, task: Term, answer: Term, max_steps: int):
        super().__init__(
            f"no derivation from {format_term(task)!r} to "
            f"{format_term(answer)!r} within {max_steps} step(s)")
        self.task = task
        self.answer = answer
        self.max_steps = max_steps


@dataclass(frozen=True)
class Step:
    rule: str
    kind: str
    tags: frozenset[str]
    term_after: Term


@dataclass(frozen=True)
class ExplanationPath:
    steps: tuple[Step, ...]

    @property
    def buggy_count(self) -> int:
        return sum(1 for s in self.steps if s.kind == "buggy")

    @property
    def rule_names(self) -> tuple[str, ...]:
        return tuple(s.rule for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)


def diagnose(task: Term, answer: Term, pack: RulePack,
             max_steps: int = 6) -> list[ExplanationPath]:
    """All derivations from `task` to `answer` in at most `max_steps`
    rewrites, expert and buggy alike, best explanation first.

    Paths are ranked by (number of buggy steps, length, rule names): the
    top path is the closest-to-sound account of how the answer could have
    been produced.  Raises NoExplanation when no derivation exists.
    """
    start = normalize(task)
    target = normalize(answer)
    if start == target:
        return [ExplanationPath(())]
    found: list[tuple[Step, ...]] = []

    def walk(term: Term, path: tuple[Step, ...],
             visited: frozenset[Term]) -> None:
        if len(path) >= max_steps:
            return
        for succ in successors(term, pack.rules):
            if succ.term in visited:
                continue
            step = Step(succ.rule, succ.kind, succ.tags, succ.term)
            if succ.term == target:
                found.append(path + (step,))
                continue
            walk(succ.term, path + (step,), visited | {succ.term})

    walk(start, (), frozenset([start]))
    if not found:
        raise NoExplanation(start, target, max_steps)
    paths = [ExplanationPath(p) for p in found]
    paths.sort(key=lambda p: (p.buggy_count, len(p), p.rule_names))
    return paths
