'''This module contains helper functions to define and manipulate segments
of consecutive grid nodes, like the connected components of the support
of a profile.
'''

from typing import List
from typing import NamedTuple

import numpy as np


class Segment(NamedTuple):
    '''A segment is a pair of node indices (start, end) identifying a run
    of consecutive nodes. Please note that start is inclusive, while end
    is exclusive.
    '''
    start: int
    end: int

    def count(self) -> int:
        '''Returns the number of nodes in the segment.'''
        return self.end - self.start


def find_runs(mask) -> List[Segment]:
    '''Returns the sorted list of maximal runs of True values in the given
    boolean mask.'''
    flags = np.asarray(mask, dtype=bool)
    if flags.size == 0:
        return []
    # Pad with False on both sides so that every run has a rising and a
    # falling edge, then pair them up.
    padded = np.concatenate(([False], flags, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    assert len(edges) % 2 == 0
    return [Segment(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])]


def closure(seg: Segment, n_nodes: int) -> Segment:
    '''Extends the segment by one node on each side, within bounds. For a
    run of positive heights of a piecewise-linear profile, the closure
    spans every cell on which the interpolant is positive.'''
    return Segment(max(seg.start - 1, 0), min(seg.end + 1, n_nodes))


def cell_count(seg: Segment, n_nodes: int) -> int:
    '''Returns the number of cells spanned by the closure of the
    segment.'''
    closed = closure(seg, n_nodes)
    return closed.count() - 1


def largest(runs: List[Segment], weights=None) -> Segment:
    '''Returns the run with the largest weight sum (node count when no
    weights are given). Ties go to the leftmost run.'''
    assert len(runs) > 0
    if weights is None:
        return max(runs, key=Segment.count)
    w = np.asarray(weights, dtype=float)
    return max(runs, key=lambda s: float(w[s.start:s.end].sum()))
