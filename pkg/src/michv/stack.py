"""Immutable execution stack. Index 0 is the top."""

from michv.model import format_value, typ_infer, well_formed


class Stack:
    __slots__ = ("slots",)

    def __init__(self, slots=()):
        self.slots = tuple(slots)

    @classmethod
    def of(cls, *values):
        """Build a stack from external data, checking every slot is well formed."""
        for v in values:
            if not well_formed(v):
                raise ValueError(f"ill-formed value {format_value(v)}")
        return cls(values)

    def __len__(self):
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots)

    def __eq__(self, other):
        return isinstance(other, Stack) and self.slots == other.slots

    def __hash__(self):
        return hash(self.slots)

    def __repr__(self):
        return f"Stack([{', '.join(format_value(v) for v in self.slots)}])"

    def push(self, v):
        return Stack((v,) + self.slots)

    def top(self):
        return self.at(0)

    def at(self, i):
        if not 0 <= i < len(self.slots):
            raise IndexError(f"stack index {i} out of range for depth {len(self.slots)}")
        return self.slots[i]

    def drop_n(self, n):
        if not 0 <= n <= len(self.slots):
            raise IndexError(f"cannot drop {n} slots from depth {len(self.slots)}")
        return Stack(self.slots[n:])

    def tail_from(self, i):
        return self.drop_n(i)

    def ty_of(self):
        """The stack type: ``typ_infer`` of each slot."""
        return tuple(typ_infer(v) for v in self.slots)

    def render(self):
        return "\n".join(f"{i}: {format_value(v)} : {typ_infer(v)}" for i, v in enumerate(self.slots))


def push(s, v):
    return s.push(v)


def top(s):
    return s.top()


def drop_n(s, n):
    return s.drop_n(n)


def at(s, i):
    return s.at(i)


def tail_from(s, i):
    return s.tail_from(i)


def ty_of(s):
    return s.ty_of()
