"""
Tests for the tiled Cholesky task graph
"""

import json
import re
from math import comb

import networkx as nx
import numpy as np
import pytest

from src.cholesky_dag import (
    TASK_DURATIONS,
    compute_cp_to_sink,
    critical_path_lengths,
    export_dot,
    export_json,
    generate_cholesky_dag,
    static_node_counts,
)
from src.errors import InvalidGraphError
from src.models import GraphExport, TaskKind


def by_label(graph):
    return {task.label: task.id for task in graph.tasks}


@pytest.mark.parametrize(
    "tiles,nodes,work,cp",
    [(4, 21, 116, 74), (8, 121, 536, 158), (16, 817, 3056, 326), (1, 2, 11, 11)],
)
def test_reference_statistics(tiles, nodes, work, cp):
    graph = generate_cholesky_dag(tiles)
    assert len(graph) == nodes
    assert graph.total_work == work
    assert graph.critical_path == cp


@pytest.mark.parametrize("tiles", range(1, 33))
def test_closed_forms(tiles):
    graph = generate_cholesky_dag(tiles)
    pairs = tiles * (tiles - 1) // 2
    triples = comb(tiles, 3)

    assert len(graph) == tiles + 2 * pairs + triples + 1
    assert graph.total_work == 11 * tiles + 8 * pairs + 2 * pairs + 3 * triples
    assert graph.critical_path == 21 * (tiles - 1) + 11


def test_kind_counts_and_durations(graph4):
    kinds = [t.kind for t in graph4.tasks]
    assert kinds.count(TaskKind.POTRF) == 4
    assert kinds.count(TaskKind.TRSM) == 6
    assert kinds.count(TaskKind.SYRK) == 6
    assert kinds.count(TaskKind.GEMM) == 4
    assert kinds.count(TaskKind.VIRTUAL_SINK) == 1
    for task in graph4.tasks:
        assert graph4.duration[task.id] == TASK_DURATIONS[task.kind]


def test_single_source_and_sink(graph8):
    dag = graph8.to_networkx()
    assert nx.is_directed_acyclic_graph(dag)
    assert [n for n in dag if dag.in_degree(n) == 0] == [graph8.source]
    assert [n for n in dag if dag.out_degree(n) == 0] == [graph8.sink]
    assert graph8.tasks[graph8.source].label == "POTRF(0)"
    assert graph8.tasks[graph8.sink].kind is TaskKind.VIRTUAL_SINK
    for node in graph8.real_tasks:
        assert nx.has_path(dag, node, graph8.sink)


def test_ids_follow_topological_order(graph8):
    for src, dst in graph8.edges:
        assert src < dst


def test_dependencies_follow_last_writer(graph4):
    ids = by_label(graph4)
    preds = {t: set(graph4.predecessors[i]) for t, i in ids.items()}

    assert preds["POTRF(0)"] == set()
    assert preds["POTRF(1)"] == {ids["SYRK(0,1)"]}
    assert preds["TRSM(0,2)"] == {ids["POTRF(0)"]}
    assert preds["TRSM(1,2)"] == {ids["POTRF(1)"], ids["GEMM(0,1,2)"]}
    assert preds["SYRK(1,2)"] == {ids["TRSM(1,2)"], ids["SYRK(0,2)"]}
    assert preds["GEMM(1,2,3)"] == {ids["TRSM(1,2)"], ids["TRSM(1,3)"], ids["GEMM(0,2,3)"]}
    assert preds["SINK"] == {ids["POTRF(3)"]}


def test_cp_to_sink_examples(graph4):
    ids = by_label(graph4)
    cp = graph4.cp_to_sink
    assert cp[ids["POTRF(3)"]] == 11
    assert cp[ids["POTRF(0)"]] == 74
    assert cp[graph4.sink] == 0


def test_cp_is_tight_along_edges(graph8):
    cp = graph8.cp_to_sink
    for u in range(len(graph8)):
        succs = graph8.successors[u]
        if not succs:
            continue
        for v in succs:
            assert cp[u] >= graph8.duration[u] + cp[v]
        assert any(cp[u] == graph8.duration[u] + cp[v] for v in succs)


def test_compute_cp_matches_cached_values(graph8):
    np.testing.assert_array_equal(compute_cp_to_sink(graph8), graph8.cp_to_sink)


def test_cycle_is_rejected():
    dag = nx.DiGraph([(0, 1), (1, 2), (2, 0)])
    with pytest.raises(InvalidGraphError):
        critical_path_lengths(dag, np.ones(3))


@pytest.mark.parametrize("tiles", [0, -3])
def test_rejects_non_positive_tiles(tiles):
    with pytest.raises(InvalidGraphError):
        generate_cholesky_dag(tiles)


def test_static_node_counts():
    counts4 = static_node_counts(generate_cholesky_dag(4))
    assert counts4[0, 0] == 3
    assert counts4[0, 1] == 0
    assert counts4[-1, 0] == 0

    counts5 = static_node_counts(generate_cholesky_dag(5))
    assert counts5[0, 0] == 4


def test_lower_bound(graph8):
    assert graph8.lower_bound(1) == 536
    assert graph8.lower_bound(2) == 268
    assert graph8.lower_bound(4) == 158


def test_depth_counts_edges(graph4):
    assert graph4.depth == nx.dag_longest_path_length(graph4.to_networkx())
    assert generate_cholesky_dag(1).depth == 1


NODE_LINE = re.compile(r'^  n\d+ \[label="[A-Z]+(\([\d,]+\))?", fillcolor="#[0-9a-f]{6}"(, shape=point)?\];$')
EDGE_LINE = re.compile(r"^  n\d+ -> n\d+;$")


@pytest.mark.parametrize("tiles", [1, 3, 5])
def test_dot_export_is_well_formed(tiles):
    graph = generate_cholesky_dag(tiles)
    lines = export_dot(graph).splitlines()
    assert lines[0] == f"digraph cholesky_T{tiles} {{"
    assert lines[-1] == "}"
    body = lines[3:-1]
    nodes = [line for line in body if NODE_LINE.match(line)]
    edges = [line for line in body if EDGE_LINE.match(line)]
    assert len(nodes) == len(graph)
    assert len(edges) == len(graph.edges)
    assert len(nodes) + len(edges) == len(body)


def test_dot_labels():
    text = export_dot(generate_cholesky_dag(1))
    assert text.count("POTRF(") == 1

    text = export_dot(generate_cholesky_dag(5))
    assert text.count('"POTRF(') == 5
    assert text.count('"TRSM(') == 10
    assert text.count('"SYRK(') == 10
    assert text.count('"GEMM(') == 10


def test_json_export(graph4):
    raw = json.loads(export_json(graph4))
    assert set(raw) == {"tiles", "nodes", "edges", "total_work", "critical_path"}
    assert set(raw["nodes"][0]) == {"id", "kind", "indices", "duration", "cp"}

    export = GraphExport.model_validate(raw)
    assert export.tiles == 4
    assert len(export.nodes) == 21
    assert export.nodes[0].cp == 74
    assert export.nodes[-1].kind is TaskKind.VIRTUAL_SINK
    assert [tuple(e) for e in export.edges] == list(graph4.edges)
    assert export.critical_path == 74


def test_graph_is_cached_and_read_only(graph4):
    assert generate_cholesky_dag(4) is graph4
    with pytest.raises(ValueError):
        graph4.duration[0] = 1.0
