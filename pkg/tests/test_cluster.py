from hypothesis import given, settings, strategies as st

from utdmt.cluster import (
    Occurrence, cluster_matches, connected_components, load_clusters, merge_overlapping,
    overlap_fraction, save_clusters,
)
from utdmt.utd import Match, Segment

ORDER = {u: k for k, u in enumerate("ABCDEFGH")}.__getitem__


def _m(ua, sa, ea, ub, sb, eb, score=0.9):
    return Match(Segment(ua, sa, ea), Segment(ub, sb, eb), score).canonical()


def intruder_matches():
    # A/B share one pattern; C/D share a good pair, and an incorrect match
    # from B lands on the C occurrence, pulling part of B into that cluster.
    return [
        _m("A", 10, 70, "B", 5, 65),
        _m("C", 20, 90, "D", 40, 110),
        _m("B", 100, 160, "C", 25, 85, 0.86),
    ]


def test_overlap_fraction_min_denominator():
    assert overlap_fraction(Segment("u", 10, 60), Segment("u", 12, 62)) == 48 / 50
    assert overlap_fraction(Segment("u", 0, 10), Segment("v", 0, 10)) == 0.0


def test_merge_overlapping_sides():
    ms = [_m("u", 10, 60, "v", 0, 50), _m("u", 12, 62, "w", 0, 50)]
    nodes, side_map = merge_overlapping(ms, 0.5)
    u_nodes = [n for n in nodes if n.segment.utterance_id == "u"]
    assert [n.segment for n in u_nodes] == [Segment("u", 10, 62)]
    assert side_map[(0, 0)] == side_map[(1, 0)]


def test_disjoint_sides_stay_apart():
    ms = [_m("u", 10, 60, "v", 0, 50), _m("u", 70, 120, "w", 0, 50)]
    nodes, _ = merge_overlapping(ms, 0.5)
    assert sum(n.segment.utterance_id == "u" for n in nodes) == 2


def test_transitive_merge():
    ms = [_m("u", 0, 60, "v", 0, 50), _m("u", 40, 100, "w", 0, 50), _m("u", 80, 140, "x", 0, 50)]
    nodes, _ = merge_overlapping(ms, 0.3)
    assert [n.segment for n in nodes if n.segment.utterance_id == "u"] == [Segment("u", 0, 140)]


def test_path_connectivity():
    c = cluster_matches([_m("x", 0, 50, "y", 0, 50), _m("y", 100, 150, "z", 0, 50)], order=None)
    assert len(c) == 2
    c = cluster_matches([_m("x", 0, 50, "y", 0, 50), _m("y", 0, 50, "z", 0, 50)])
    assert list(c.clusters) == ["c1"] and len(c.clusters["c1"]) == 3


def test_two_components():
    c = cluster_matches([_m("A", 0, 50, "B", 0, 50), _m("C", 0, 50, "D", 0, 50)], order=ORDER)
    assert {k: len(v) for k, v in c.clusters.items()} == {"c1": 2, "c2": 2}
    assert c.clusters["c1"][0].segment.utterance_id == "A"


def test_intruder_joins_good_pair():
    c = cluster_matches(intruder_matches(), order=ORDER)
    utts = {k: [o.segment.utterance_id for o in v] for k, v in c.clusters.items()}
    assert utts == {"c1": ["A", "B"], "c2": ["B", "C", "D"]}


def test_labels_follow_corpus_order_not_id_order():
    order = {"z": 0, "a": 1, "m": 2, "q": 3}.__getitem__
    c = cluster_matches([_m("a", 0, 50, "m", 0, 50), _m("z", 0, 50, "q", 0, 50)], order=order)
    assert c.clusters["c1"][0].segment.utterance_id == "z"


def test_self_merged_match_is_singleton_cluster():
    # Two sides of one match in the same utterance that merge into one node.
    ms = [_m("u", 0, 60, "u", 70, 130), _m("u", 20, 80, "v", 0, 60), _m("u", 60, 120, "w", 0, 60)]
    c = cluster_matches(ms, 0.3)
    assert len(c.occurrences) == len({o.node_id for o in c.occurrences})


segments = st.builds(
    lambda u, s, n: Segment(u, s, s + n),
    st.sampled_from("ABCD"), st.integers(0, 200), st.integers(20, 80),
)
match_lists = st.lists(st.builds(lambda a, b: Match(a, b, 0.9), segments, segments)
                       .filter(lambda m: not m.a.overlaps(m.b)).map(Match.canonical), max_size=12)


@settings(max_examples=80, deadline=None)
@given(match_lists, st.floats(0.1, 1.0))
def test_partition_invariants(matches, rho):
    nodes, side_map = merge_overlapping(matches, rho, ORDER)
    c = connected_components(nodes, side_map, matches, ORDER)
    ids = [o.node_id for o in c.occurrences]
    assert sorted(ids) == list(range(len(nodes)))
    labels = c.label_of()
    for k in range(len(matches)):
        assert labels[side_map[(k, 0)]] == labels[side_map[(k, 1)]]
    assert list(c.clusters) == [f"c{n}" for n in range(1, len(c) + 1)]
    again = cluster_matches(matches, rho, ORDER)
    assert again.clusters == c.clusters


@settings(max_examples=80, deadline=None)
@given(match_lists.filter(lambda ms: len(ms) >= 2), st.data())
def test_adding_match_never_adds_clusters(matches, data):
    # New edges between already discovered sides can only join components.
    sides = sorted({s for m in matches for s in (m.a, m.b)})
    a = data.draw(st.sampled_from(sides))
    b = data.draw(st.sampled_from(sides))
    if a.overlaps(b):
        return
    before = cluster_matches(matches, 0.5, ORDER)
    after = cluster_matches(matches + [Match(a, b, 0.9).canonical()], 0.5, ORDER)
    assert len(after) <= len(before)


def test_adding_new_pair_adds_at_most_one_cluster():
    ms = [_m("A", 0, 50, "B", 0, 50)]
    assert len(cluster_matches(ms + [_m("C", 0, 50, "D", 0, 50)])) == len(cluster_matches(ms)) + 1


def test_clusters_file_round_trip(tmp_path):
    c = cluster_matches(intruder_matches(), order=ORDER)
    save_clusters(c, tmp_path / "c.json")
    assert (tmp_path / "c.json").read_text().startswith('{\n "c1": [')
    save_clusters(load_clusters(tmp_path / "c.json"), tmp_path / "c2.json")
    assert (tmp_path / "c.json").read_bytes() == (tmp_path / "c2.json").read_bytes()


def test_occurrence_is_hashable():
    assert len({Occurrence(0, Segment("u", 0, 5)), Occurrence(0, Segment("u", 0, 5))}) == 1
