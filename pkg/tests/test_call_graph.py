import pytest

from vulnreach.call_graph import (
    MethodCallPath,
    PathFilterConfig,
    build_call_graph,
    extract_call_paths,
    is_entry_eligible,
    localize_vulnerable_methods,
)
from vulnreach.code_model import parse_project
from vulnreach.vuln_report import load_report, match_signature

from conftest import analyse_fixture, fixture_paths


def _setup(name):
    project, poc, _ = fixture_paths(name)
    model = parse_project(project, emit_warnings=False)
    report = load_report(poc)
    return model, report


class TestLocalize:
    def test_lion(self):
        model, report = _setup("lion_reachable")
        found = localize_vulnerable_methods(model, report)
        assert len(found) == 1
        method, stmt = found[0]
        assert method.signature() == "com.lion.util.XmlUtil#xml2Obj(String,Class<T>)"
        assert stmt.line == 8

    def test_dependency_without_invocation(self):
        model, report = _setup("no_vulnerable_use")
        assert localize_vulnerable_methods(model, report) == []

    def test_two_call_sites_in_one_method(self):
        model, report = _setup("two_call_sites")
        found = localize_vulnerable_methods(model, report)
        assert len(found) == 2
        assert len({stmt.index for _, stmt in found}) == 2


class TestBuildCallGraph:
    def test_single_edge(self, tmp_path):
        (tmp_path / "A.java").write_text(
            "package g; public class A { public void m(B b) { b.n(); } }")
        (tmp_path / "B.java").write_text(
            "package g; public class B { public void n() { } }")
        model = parse_project(tmp_path, emit_warnings=False)
        graph = build_call_graph(model)
        pairs = {(e.caller, e.callee) for e in graph.edges}
        assert pairs == {("g.A#m(B)", "g.B#n()")}

    def test_interface_dispatch_two_edges(self):
        model, _ = _setup("interface_dispatch")
        graph = build_call_graph(model)
        from_handle = {(e.caller, e.callee) for e in graph.edges
                       if e.caller.startswith("fx.iface.Gateway#handle")}
        assert from_handle == {
            ("fx.iface.Gateway#handle(String)", "fx.iface.XmlParserA#parse(String)"),
            ("fx.iface.Gateway#handle(String)", "fx.iface.XmlParserB#parse(String)"),
        }

    def test_lion_edge(self):
        model, _ = _setup("lion_reachable")
        graph = build_call_graph(model)
        assert ("com.lion.service.ConfigService#loadConfig(String)",
                "com.lion.util.XmlUtil#xml2Obj(String,Class<T>)") in {
            (e.caller, e.callee) for e in graph.edges}

    def test_edge_endpoints_in_nodes(self):
        for name in ("lion_reachable", "diamond_paths", "interface_dispatch"):
            model, _ = _setup(name)
            graph = build_call_graph(model)
            for e in graph.edges:
                assert e.caller in graph.nodes and e.callee in graph.nodes


class TestExtractCallPaths:
    def _paths(self, name, filters=None):
        model, report = _setup(name)
        targets = localize_vulnerable_methods(model, report)
        graph = build_call_graph(model)
        return model, report, extract_call_paths(graph, model, targets,
                                                 filters or PathFilterConfig())

    def test_lion_single_path(self):
        _, _, paths = self._paths("lion_reachable")
        assert [p.signatures() for p in paths] == [(
            "com.lion.service.ConfigService#loadConfig(String)",
            "com.lion.util.XmlUtil#xml2Obj(String,Class<T>)",
        )]
        assert paths[0].entry.name == "loadConfig"

    def test_degenerate_length_one_path(self):
        _, _, paths = self._paths("rule_direct")
        assert len(paths) == 1
        assert len(paths[0].methods) == 1
        assert paths[0].entry is paths[0].methods[0]

    def test_diamond_exactly_two_paths_ordered(self):
        _, _, paths = self._paths("diamond_paths")
        sigs = [p.signatures() for p in paths]
        assert len(sigs) == 2
        assert sigs == sorted(sigs)
        assert sigs[0][1].endswith("viaPrimary(String)")
        assert sigs[1][1].endswith("viaSecondary(String)")

    def test_private_root_dropped(self):
        _, _, paths = self._paths("private_entry")
        assert paths == []

    def test_test_annotation_root_dropped(self):
        _, _, paths = self._paths("test_annotation_entry")
        assert paths == []

    def test_path_invariants(self):
        for name in ("lion_reachable", "diamond_paths", "two_call_sites",
                     "deep_chain_reachable"):
            model, report, paths = self._paths(name)
            for p in paths:
                assert len(p.methods) >= 1
                assert p.entry.visibility != "private"
                assert "Test" not in p.entry.annotations
                sigs = set(p.signatures())
                assert len(sigs) == len(p.methods)  # acyclic
                # Last method contains a statement matching the report.
                matched = any(
                    match_signature(report, c, model, p.methods[-1])
                    for c in p.vulnerable_site.calls())
                assert matched

    def test_shrinking_depth_never_adds(self):
        model, report = _setup("deep_chain_reachable")
        targets = localize_vulnerable_methods(model, report)
        graph = build_call_graph(model)
        deep = extract_call_paths(graph, model, targets, PathFilterConfig(max_depth=8))
        shallow = extract_call_paths(graph, model, targets, PathFilterConfig(max_depth=2))
        assert {p.signatures() for p in shallow} <= {p.signatures() for p in deep}

    def test_shrinking_exclusions_never_removes(self):
        model, report = _setup("test_annotation_entry")
        targets = localize_vulnerable_methods(model, report)
        graph = build_call_graph(model)
        strict = extract_call_paths(graph, model, targets, PathFilterConfig())
        lax = extract_call_paths(
            graph, model, targets,
            PathFilterConfig(exclude_annotations=frozenset()))
        assert {p.signatures() for p in strict} <= {p.signatures() for p in lax}
        # The @Test-rooted path appears once the exclusion is lifted.
        assert len(lax) == 1

    def test_max_paths_budget(self):
        model, report = _setup("diamond_paths")
        targets = localize_vulnerable_methods(model, report)
        graph = build_call_graph(model)
        diags = []
        capped = extract_call_paths(graph, model, targets,
                                    PathFilterConfig(max_paths=1), diags)
        assert len(capped) == 1
        assert diags and diags[0].limit == 1

    def test_byte_stable_output(self):
        a = self._paths("diamond_paths")[2]
        b = self._paths("diamond_paths")[2]
        assert [p.signatures() for p in a] == [p.signatures() for p in b]
        assert [[s.index for s in p.call_sites] for p in a] == \
               [[s.index for s in p.call_sites] for p in b]


def test_constructor_not_entry_eligible():
    model, _ = _setup("interface_dispatch")
    ctor = next(m for _, m in model.all_methods() if m.is_constructor)
    assert not is_entry_eligible(ctor, PathFilterConfig())
