'''Unit tests for segments'''

from .. import segments


def _find_runs(mask, expected):
    actual = segments.find_runs(mask)
    assert actual == expected, f'{actual} != {expected}'
    for seg in actual:
        assert seg.start < seg.end, f'{seg} not a segment!'


def test_find_runs():
    '''Test segments.find_runs()'''
    _find_runs([], [])
    _find_runs([False, False], [])
    _find_runs([True], [(0, 1)])
    _find_runs([True, True, True], [(0, 3)])
    _find_runs([False, True, True, False], [(1, 3)])
    _find_runs([True, False, True, True, False, True],
               [(0, 1), (2, 4), (5, 6)])


def test_closure():
    '''Test segments.closure() and segments.cell_count()'''
    seg = segments.Segment(3, 6)
    assert segments.closure(seg, 10) == (2, 7)
    assert segments.cell_count(seg, 10) == 4
    # Clamped at the window ends
    assert segments.closure(segments.Segment(0, 2), 3) == (0, 3)
    assert segments.cell_count(segments.Segment(1, 2), 3) == 2


def test_largest():
    '''Test segments.largest()'''
    runs = [segments.Segment(0, 2), segments.Segment(4, 9),
            segments.Segment(10, 15)]
    # Ties go to the leftmost run
    assert segments.largest(runs) == (4, 9)
    weights = [0.0] * 15
    weights[12] = 5.0
    assert segments.largest(runs, weights) == (10, 15)
    assert segments.Segment(4, 9).count() == 5
