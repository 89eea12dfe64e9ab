import pathlib

import pytest

import lazytensor as lt

GOLDEN = pathlib.Path(__file__).resolve().parents[2] / "tests" / "golden"


def test_fig1_dump_matches_golden():
    d = 10
    x = lt.randn([2, 4], 0, d)
    y = lt.randn([2, 4], 1, d)
    z = lt.randn([2, 4], 2, d)
    r = lt.add(x * y, z, alpha=1.0)
    assert r.is_pending
    text = lt.pending_ir(d).replace("CPU:10", "CPU:0")
    assert text == (GOLDEN / "fig1.txt").read_text()
    lt.mark_step(d)
    assert not r.is_pending
    assert lt.metrics(d)["graphs_executed"] == 1


def test_loop_unrolls_into_two_adds():
    d = 11
    x = lt.randn([2, 4], 0, d)
    acc = lt.randn([2, 4], 1, d)
    for _ in range(2):
        acc = lt.add(acc, x, alpha=1.0)
    text = lt.pending_ir(d).replace("CPU:11", "CPU:0")
    assert text == (GOLDEN / "loop.txt").read_text()


def test_values_match_eager_mode():
    lazy, eager = 12, 13
    lt.set_mode(eager, "eager")
    assert lt.get_mode(eager) == "eager"
    out = []
    for d in (lazy, eager):
        a = lt.from_list([1, 2, 3, 4, 5, 6, 7, 8], [2, 4], d)
        b = lt.full([2, 4], 2.0, d)
        c = lt.full([2, 4], 10.0, d)
        out.append((a * b + c).tolist())
    assert out[0] == out[1] == [12, 14, 16, 18, 20, 22, 24, 26]


def test_view_add_updates_base():
    d = 14
    t = lt.full([4, 4], 0.0, d)
    v = lt.view(t, [2, 8])
    assert v.is_view and v.shape == [2, 8]
    v += 1
    assert t.tolist() == [1.0] * 16


def test_in_place_keeps_uid_and_reads_are_stable():
    d = 15
    a = lt.full([3], 1.0, d)
    uid = a.uid
    b = a + 2.0
    a.add_(1.0)
    assert a.uid == uid
    assert a.tolist() == [2.0] * 3
    assert a.tolist() == [2.0] * 3
    assert b.tolist() == [3.0] * 3


def test_item_forces_barrier():
    d = 16
    s = lt.sum_all(lt.full([2, 4], 1.0, d))
    assert s.item() == 8.0
    assert lt.metrics(d)["graphs_executed"] == 1


def test_cache_reuse_across_steps():
    d = 17
    w = lt.randn([4, 4], 0, d)
    for i in range(5):
        w.sub_(lt.randn([4, 4], 100 + i, d) * 0.01)
        lt.mark_step(d)
    m = lt.metrics(d)
    assert m["compile_count"] == 1
    assert m["graphs_executed"] == 5


def test_fallback_breaks_trace():
    d = 18
    x = lt.from_list([3.0, 1.0, 2.0], [3], d)
    idx = lt.argsort(lt.relu(x))
    assert idx.dtype == "i64"
    assert idx.tolist() == [1, 2, 0]
    assert lt.metrics(d)["eager_fallback_dispatches"] == 1


def test_errors_raise():
    with pytest.raises(lt.Error, match="ShapeMismatch"):
        lt.full([2, 4], 0.0, 19) + lt.full([3, 3], 0.0, 19)
    with pytest.raises(lt.Error):
        lt.from_list([1.0, 2.0, 3.0], [2, 2], 19)
    with pytest.raises(lt.Error):
        lt.full([2], 0.0, 1) + lt.full([2], 0.0, 2)
