"""Set with O(1) add/discard and O(1) uniform sampling.

The event engines need to draw a uniformly random element from a set that
mutates on every event (discordant edges, vertices per opinion).  A plain
``set`` cannot be indexed, so elements are kept in a list with a position
map; removal swaps the victim with the tail (stack-overflow folklore, same
trick as in the epidemic-simulation literature).
"""


class SampleableSet:
    __slots__ = ("items", "pos")

    def __init__(self, iterable=()):
        self.items = []
        self.pos = {}
        for x in iterable:
            self.add(x)

    def __len__(self):
        return len(self.items)

    def __contains__(self, x):
        return x in self.pos

    def __iter__(self):
        return iter(self.items)

    def add(self, x):
        """Insert x; returns True if it was not present."""
        if x in self.pos:
            return False
        self.pos[x] = len(self.items)
        self.items.append(x)
        return True

    def discard(self, x):
        """Remove x if present; returns True if it was removed."""
        i = self.pos.pop(x, None)
        if i is None:
            return False
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i
        return True

    def pick(self, rnd):
        """Uniform element, using rnd.random() (bias ~ len/2^53, negligible)."""
        return self.items[int(rnd.random() * len(self.items))]
