"""Call-graph construction and method call path extraction.

Localizes the client methods that invoke the reported vulnerable API, builds
a class-hierarchy call graph over the parsed model, and extracts the filtered
method call paths leading from user-accessible entry methods down to each
vulnerable call site.
"""

from __future__ import annotations

from dataclasses import dataclass

from .code_model import (
    CodeModel,
    ExternalCallee,
    MethodDecl,
    Statement,
    resolve_invocation,
)
from .vuln_report import VulnerabilityReport, match_signature


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    site: Statement


@dataclass(frozen=True)
class CallGraph:
    nodes: frozenset[str]
    edges: frozenset[CallEdge]

    def callers_of(self, callee_sig: str) -> list[CallEdge]:
        found = [e for e in self.edges if e.callee == callee_sig]
        found.sort(key=lambda e: (e.caller, e.site.line, e.site.index))
        return found


@dataclass(frozen=True)
class PathFilterConfig:
    exclude_annotations: frozenset[str] = frozenset({"Test"})
    exclude_visibilities: frozenset[str] = frozenset({"private"})
    max_depth: int = 8
    max_paths: int = 64

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")


@dataclass(frozen=True)
class MethodCallPath:
    """Ordered chain of client methods, entry first, ending at the method
    that contains the vulnerable call site.

    call_sites[i] is the statement in methods[i] performing the call to
    methods[i+1]; the final element is the vulnerable call statement.
    """

    methods: tuple[MethodDecl, ...]
    call_sites: tuple[Statement, ...]

    @property
    def entry(self) -> MethodDecl:
        return self.methods[0]

    @property
    def vulnerable_site(self) -> Statement:
        return self.call_sites[-1]

    def signatures(self) -> tuple[str, ...]:
        return tuple(m.signature() for m in self.methods)


@dataclass
class PathBudgetExceeded:
    """Diagnostic: max_paths truncated the enumeration (results still valid)."""

    limit: int


def localize_vulnerable_methods(model: CodeModel, report: VulnerabilityReport
                                ) -> list[tuple[MethodDecl, Statement]]:
    """Every (client method, call-site statement) pair invoking the
    vulnerable API. Empty when the project never uses the vulnerable code."""
    found: list[tuple[MethodDecl, Statement]] = []
    for _, method in model.all_methods():
        for stmt in method.body:
            for call_expr in stmt.calls():
                if match_signature(report, call_expr, model, method):
                    found.append((method, stmt))
                    break  # one entry per statement
    return found


def build_call_graph(model: CodeModel) -> CallGraph:
    """Class-hierarchy call graph: one edge per resolvable invocation target.

    External callees produce no edge.
    """
    nodes: set[str] = set()
    edges: set[CallEdge] = set()
    for _, method in model.all_methods():
        nodes.add(method.signature())
    for _, method in model.all_methods():
        caller_sig = method.signature()
        for stmt in method.body:
            for call_expr in stmt.calls():
                resolved = resolve_invocation(model, method, call_expr)
                if isinstance(resolved, ExternalCallee):
                    continue
                for target in sorted(resolved, key=lambda m: m.signature()):
                    edges.add(CallEdge(caller=caller_sig, callee=target.signature(),
                                       site=stmt))
    return CallGraph(nodes=frozenset(nodes), edges=frozenset(edges))


def is_entry_eligible(method: MethodDecl, filters: PathFilterConfig) -> bool:
    if method.is_constructor:
        return False
    if method.visibility in filters.exclude_visibilities:
        return False
    if any(a in filters.exclude_annotations for a in method.annotations):
        return False
    return True


def extract_call_paths(graph: CallGraph, model: CodeModel,
                       targets: list[tuple[MethodDecl, Statement]],
                       filters: PathFilterConfig | None = None,
                       diagnostics: list | None = None) -> list[MethodCallPath]:
    """All maximal acyclic caller chains ending at each vulnerable call site.

    Backward traversal from each target method; a chain is emitted when it
    cannot be extended by any unvisited caller (or max_depth is reached, in
    which case the still-extensible chain is dropped as incomplete) and its
    first method passes the entry filters. Ordering is deterministic:
    lexicographic by signature sequence, then by call-site position.
    """
    if not targets:
        raise ValueError("targets must be non-empty")
    if filters is None:
        filters = PathFilterConfig()
    results: list[MethodCallPath] = []
    truncated = False

    for target_method, site in targets:
        # chain: list of (method, site-of-call-to-next) built backward.
        def visit(chain: list[tuple[MethodDecl, Statement]], seen: set[str]):
            nonlocal truncated
            head, _ = chain[0]
            incoming = [e for e in graph.callers_of(head.signature())
                        if e.caller not in seen]
            if not incoming:
                if is_entry_eligible(head, filters):
                    results.append(_to_path(chain))
                return
            if len(chain) >= filters.max_depth:
                # Extensible but over budget: incomplete, drop.
                return
            for edge in incoming:
                caller = model.method_by_signature(edge.caller)
                if caller is None:
                    continue
                visit([(caller, edge.site)] + chain, seen | {edge.caller})

        visit([(target_method, site)], {target_method.signature()})

    results.sort(key=lambda p: (p.signatures(),
                                tuple((s.line, s.index) for s in p.call_sites)))
    if len(results) > filters.max_paths:
        truncated = True
        results = results[: filters.max_paths]
    if truncated and diagnostics is not None:
        diagnostics.append(PathBudgetExceeded(limit=filters.max_paths))
    return results


def _to_path(chain: list[tuple[MethodDecl, Statement]]) -> MethodCallPath:
    methods = tuple(m for m, _ in chain)
    sites = tuple(s for _, s in chain)
    return MethodCallPath(methods=methods, call_sites=sites)
