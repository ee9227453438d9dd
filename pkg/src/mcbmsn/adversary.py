"""Evidence-theory eavesdropper.

The adversary hears every transmission and knows which cell it came from
and went to.  Directed cell-pair counts are chained into path hypotheses
whose evidence is the weakest link on the path; normalised path evidence,
weighted by hop count, accrues to the path's terminal cell as belief that
the cell hosts the sink.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .topology import GridSpec, cell_of

EVIDENCE_MODES = ("fractional", "binary")


class EvidenceLedger:
    """Per-link observation counts E(U), keyed by ``(tx_cell, rx_cell)``.

    ``mode`` decides what a beamformed burst leaves behind: ``"fractional"``
    credits each of the n co-transmitters' links with 1/n, ``"binary"``
    leaves no evidence at all.
    """

    def __init__(self, grid: GridSpec, mode: str = "fractional"):
        if mode not in EVIDENCE_MODES:
            raise ValueError(f"unknown evidence mode {mode!r}")
        self.grid = grid
        self.mode = mode
        self.link_counts: dict[tuple[int, int], float] = {}

    def copy(self) -> "EvidenceLedger":
        other = EvidenceLedger(self.grid, self.mode)
        other.link_counts = dict(self.link_counts)
        return other

    def __len__(self) -> int:
        return len(self.link_counts)

    def __getitem__(self, link: tuple[int, int]) -> float:
        return self.link_counts.get(link, 0.0)

    def total(self) -> float:
        return math.fsum(self.link_counts.values())

    def add(self, tx_cell: int, rx_cell: int, amount: float = 1.0) -> None:
        if amount < 0:
            raise ValueError("evidence increments must be >= 0")
        n = self.grid.n_cells
        if not (0 <= tx_cell < n and 0 <= rx_cell < n):
            raise ValueError(f"cell index out of range: {tx_cell}->{rx_cell}")
        if amount == 0:
            return
        key = (int(tx_cell), int(rx_cell))
        self.link_counts[key] = self.link_counts.get(key, 0.0) + amount

    def record(self, tx_position, rx_position) -> None:
        """A conventional point-to-point frame."""
        self.add(cell_of(tx_position, self.grid), cell_of(rx_position, self.grid))

    def record_beam(self, tx_positions: Sequence, rx_position) -> None:
        """A beamformed burst from several phase-aligned transmitters."""
        tx_positions = list(tx_positions)
        if self.mode == "binary" and len(tx_positions) > 1:
            return
        share = 1.0 / len(tx_positions)
        rx = cell_of(rx_position, self.grid)
        for p in tx_positions:
            self.add(cell_of(p, self.grid), rx, share)

    def record_multicast(self, tx_position, rx_positions: Sequence) -> None:
        """One local broadcast; its unit of evidence is split over receivers.

        With no receiver the frame is still heard and is logged as a
        same-cell link, which never enters path chaining.
        """
        tx = cell_of(tx_position, self.grid)
        rx_positions = list(rx_positions)
        if not rx_positions:
            self.add(tx, tx)
            return
        share = 1.0 / len(rx_positions)
        for p in rx_positions:
            self.add(tx, cell_of(p, self.grid), share)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tx_cell", "rx_cell", "count"])
            for (a, b), c in sorted(self.link_counts.items()):
                w.writerow([a, b, repr(c)])


def record_transmission(ledger: EvidenceLedger, tx_position, rx_position) -> EvidenceLedger:
    """Record one frame.  ``tx_position`` may be a list of positions (a beam)."""
    tx = np.asarray(tx_position, dtype=float)
    if tx.ndim == 2:
        ledger.record_beam(list(tx), rx_position)
    else:
        ledger.record(tx, rx_position)
    return ledger


@dataclass(frozen=True)
class PathHypothesis:
    cells: tuple[int, ...]
    evidence: float
    normalized: float = 0.0

    @property
    def hops(self) -> int:
        return len(self.cells) - 1


def _adjacency(ledger: EvidenceLedger) -> dict[int, list[tuple[int, float]]]:
    adj: dict[int, list[tuple[int, float]]] = {}
    for (a, b), c in sorted(ledger.link_counts.items()):
        if a != b and c > 0:
            adj.setdefault(a, []).append((b, c))
    return adj


def _walk(ledger: EvidenceLedger, max_hops: int) -> Iterator[tuple[tuple[int, ...], float]]:
    """Every simple directed chain of 1..max_hops links with its evidence."""
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    adj = _adjacency(ledger)
    for start in sorted(adj):
        stack = [((start,), math.inf)]
        while stack:
            cells, ev = stack.pop()
            if len(cells) > 1:
                yield cells, ev
            if len(cells) - 1 >= max_hops:
                continue
            for nxt, c in reversed(adj.get(cells[-1], ())):
                if nxt not in cells:
                    stack.append((cells + (nxt,), min(ev, c)))


def enumerate_paths(ledger: EvidenceLedger, max_hops: int = 4) -> list[PathHypothesis]:
    """All path hypotheses, with evidence normalised over the whole set."""
    raw = list(_walk(ledger, max_hops))
    total = math.fsum(ev for _, ev in raw)
    return [PathHypothesis(cells, ev, ev / total if total > 0 else 0.0) for cells, ev in raw]


def path_evidence(path, ledger: EvidenceLedger) -> float:
    """Weakest-link evidence of a chain of cells."""
    cells = path.cells if isinstance(path, PathHypothesis) else tuple(path)
    if len(cells) < 2:
        raise ValueError("a path needs at least two cells")
    counts = []
    for a, b in zip(cells[:-1], cells[1:]):
        if (a, b) not in ledger.link_counts:
            raise KeyError(f"link {a}->{b} not in ledger")
        counts.append(ledger.link_counts[(a, b)])
    return min(counts)


@dataclass
class BeliefMap:
    belief: np.ndarray
    bs_cell: Optional[int] = None
    mass_total: float = 0.0

    def __getitem__(self, cell: int) -> float:
        return float(self.belief[cell])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell", "belief"])
            for i, b in enumerate(self.belief):
                w.writerow([i, repr(float(b))])


def belief(ledger: EvidenceLedger, max_hops: int = 4, bs_cell: Optional[int] = None) -> BeliefMap:
    """Hop-weighted normalised evidence accrued at each path's terminal cell.

    ``mass_total`` is the sum of normalised evidence over all hypotheses
    (1 whenever any hypothesis carries evidence, else 0).
    """
    acc = np.zeros(ledger.grid.n_cells)
    mass = np.zeros(ledger.grid.n_cells)
    total = 0.0
    for cells, ev in _walk(ledger, max_hops):
        acc[cells[-1]] += (len(cells) - 1) * ev
        mass[cells[-1]] += ev
        total += ev
    if total > 0:
        return BeliefMap(acc / total, bs_cell, float(mass.sum() / total))
    return BeliefMap(acc, bs_cell, 0.0)


@dataclass(frozen=True)
class AnonymityReport:
    bs_belief: float
    argmax_cell: int
    entropy_bits: float


def anonymity_report(belief_map: BeliefMap, bs_cell: Optional[int] = None) -> AnonymityReport:
    """Belief at the true sink cell, the adversary's best guess and the
    Shannon entropy (bits) of belief normalised to a distribution."""
    bs = belief_map.bs_cell if bs_cell is None else bs_cell
    b = np.asarray(belief_map.belief, dtype=float)
    argmax = int(np.argmax(b))
    total = b.sum()
    if total > 0:
        p = b[b > 0] / total
        entropy = float(-(p * np.log2(p)).sum())
    else:
        entropy = 0.0
    return AnonymityReport(float(b[bs]) if bs is not None else math.nan, argmax, entropy)
