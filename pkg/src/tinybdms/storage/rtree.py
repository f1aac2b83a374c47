"""A small in-memory R-tree (Guttman, quadratic split).

Used to answer MBR-intersection probes over the entries of one immutable LSM
component. Items are opaque; each is stored with its bounding box
``(xmin, ymin, xmax, ymax)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MAX_ENTRIES = 16
MIN_ENTRIES = 6


def _union(a, b):
    return (min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3]))


def _area(r) -> float:
    return (r[2] - r[0]) * (r[3] - r[1])


def _enlargement(r, add) -> float:
    return _area(_union(r, add)) - _area(r)


def intersects(a, b) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


@dataclass
class _Node:
    leaf: bool
    entries: list = field(default_factory=list)  # (mbr, child-or-item)

    def mbr(self):
        it = iter(self.entries)
        box = next(it)[0]
        for r, _ in it:
            box = _union(box, r)
        return box


class RTree:
    def __init__(self, max_entries: int = MAX_ENTRIES, min_entries: int = MIN_ENTRIES):
        if not 2 <= min_entries <= max_entries // 2:
            raise ValueError("need 2 <= min_entries <= max_entries / 2")
        self.max_entries = max_entries
        self.min_entries = min_entries
        self.root = _Node(leaf=True)
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def insert(self, box, item) -> None:
        split = self._insert(self.root, tuple(box), item)
        if split is not None:
            old = self.root
            self.root = _Node(leaf=False, entries=[(old.mbr(), old), (split.mbr(), split)])
        self.size += 1

    def _insert(self, node: _Node, box, item):
        if node.leaf:
            node.entries.append((box, item))
        else:
            i = min(range(len(node.entries)),
                    key=lambda j: (_enlargement(node.entries[j][0], box), _area(node.entries[j][0])))
            child = node.entries[i][1]
            split = self._insert(child, box, item)
            node.entries[i] = (child.mbr(), child)
            if split is not None:
                node.entries.append((split.mbr(), split))
        if len(node.entries) > self.max_entries:
            return self._split(node)
        return None

    def _split(self, node: _Node) -> _Node:
        entries = node.entries
        # quadratic pick-seeds: the pair wasting the most area
        best, seeds = -1.0, (0, 1)
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                waste = _area(_union(entries[i][0], entries[j][0])) - _area(entries[i][0]) - _area(entries[j][0])
                if waste > best:
                    best, seeds = waste, (i, j)
        g1, g2 = [entries[seeds[0]]], [entries[seeds[1]]]
        b1, b2 = entries[seeds[0]][0], entries[seeds[1]][0]
        rest = [e for k, e in enumerate(entries) if k not in seeds]
        while rest:
            if len(g1) + len(rest) == self.min_entries:
                g1.extend(rest)
                break
            if len(g2) + len(rest) == self.min_entries:
                g2.extend(rest)
                break
            # pick-next: the entry with the strongest preference
            k = max(range(len(rest)),
                    key=lambda m: abs(_enlargement(b1, rest[m][0]) - _enlargement(b2, rest[m][0])))
            e = rest.pop(k)
            d1, d2 = _enlargement(b1, e[0]), _enlargement(b2, e[0])
            if (d1, _area(b1), len(g1)) <= (d2, _area(b2), len(g2)):
                g1.append(e)
                b1 = _union(b1, e[0])
            else:
                g2.append(e)
                b2 = _union(b2, e[0])
        node.entries = g1
        return _Node(leaf=node.leaf, entries=g2)

    def search(self, box):
        """Items whose box intersects ``box``."""
        box = tuple(box)
        if not self.root.entries:
            return
        stack = [self.root]
        while stack:
            node = stack.pop()
            for r, x in node.entries:
                if intersects(r, box):
                    if node.leaf:
                        yield x
                    else:
                        stack.append(x)

    def depth(self) -> int:
        d, node = 1, self.root
        while not node.leaf:
            node = node.entries[0][1]
            d += 1
        return d
