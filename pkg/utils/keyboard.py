"""
QWERTY key geometry shared by the swype renderer and the dataset labelling rules.

Keys sit on an axis-aligned integer grid (row stagger ignored), one unit per
key. The supported alphabet is the DNS hostname alphabet: a-z, 0-9, '.', '-'.

    row 0:  1 2 3 4 5 6 7 8 9 0 -
    row 1:  q w e r t y u i o p
    row 2:  a s d f g h j k l
    row 3:  z x c v b n m . (col 8)
"""

from dataclasses import dataclass
from types import MappingProxyType

from utils.errors import UnsupportedCharacter

ROWS = (
    "1234567890-",
    "qwertyuiop",
    "asdfghjkl",
    "zxcvbnm",
)
ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789.-"


@dataclass(frozen=True, order=True)
class GridCoord:
    """Key position in key units (1 unit = one key height / width)."""

    row: int
    col: int


class KeyboardLayout:
    """Immutable character -> GridCoord map."""

    def __init__(self, keys):
        coords = list(keys.values())
        if len(set(coords)) != len(coords):
            raise ValueError("Keyboard layout maps two characters to one key")
        self._keys = MappingProxyType(dict(keys))
        self.rows = max(c.row for c in coords) + 1
        self.cols = max(c.col for c in coords) + 1

    @classmethod
    def qwerty(cls):
        keys = {}
        for row, chars in enumerate(ROWS):
            for col, char in enumerate(chars):
                keys[char] = GridCoord(row, col)
        keys["."] = GridCoord(3, 8)
        return cls(keys)

    @property
    def keys(self):
        return self._keys

    @property
    def alphabet(self):
        return "".join(self._keys)

    def __contains__(self, char):
        return isinstance(char, str) and len(char) == 1 and char.lower() in self._keys

    def key_position(self, char):
        """
        Return the grid coordinate of `char` (uppercase is folded).

        Raises:
            UnsupportedCharacter: if `char` is not a single supported character
        """
        if not isinstance(char, str) or len(char) != 1:
            raise UnsupportedCharacter(char)
        try:
            return self._keys[char.lower()]
        except KeyError:
            raise UnsupportedCharacter(char) from None

    def keyboard_distance(self, a, b):
        """Chebyshev distance between the keys of `a` and `b`, in key units."""
        pa = self.key_position(a)
        pb = self.key_position(b)
        return max(abs(pa.row - pb.row), abs(pa.col - pb.col))

    def neighbours(self, char, max_distance=1, alphabet=None):
        """
        Characters whose key lies within `max_distance` of `char`, excluding `char`.

        Args:
            char (str): Reference character
            max_distance (int): Chebyshev radius in key units
            alphabet (str, optional): Restrict the result to these characters

        Returns:
            list[str]: Neighbouring characters in layout order
        """
        pool = alphabet if alphabet is not None else self.alphabet
        origin = char.lower()
        return [
            c
            for c in pool
            if c != origin and self.keyboard_distance(origin, c) <= max_distance
        ]


QWERTY = KeyboardLayout.qwerty()


def key_position(char, layout=QWERTY):
    return layout.key_position(char)


def keyboard_distance(a, b, layout=QWERTY):
    return layout.keyboard_distance(a, b)
