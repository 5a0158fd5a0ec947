import itertools

import pytest

from utils.errors import UnsupportedCharacter
from utils.keyboard import ALPHABET, QWERTY, GridCoord, KeyboardLayout, key_position, keyboard_distance


@pytest.mark.parametrize(
    "char, expected",
    [("q", (1, 0)), ("1", (0, 0)), ("p", (1, 9)), ("c", (3, 2)), (".", (3, 8)), ("-", (0, 10))],
)
def test_key_position(char, expected):
    assert key_position(char) == GridCoord(*expected)


def test_key_position_folds_case():
    assert key_position("Q") == key_position("q")


@pytest.mark.parametrize("char", ["_", " ", "é", "", "ab", None])
def test_unsupported_character(char):
    with pytest.raises(UnsupportedCharacter):
        key_position(char)


def test_alphabet_is_exactly_the_hostname_alphabet():
    assert sorted(QWERTY.alphabet) == sorted(ALPHABET)


def test_layout_is_injective_and_in_bounds():
    coords = [key_position(c) for c in ALPHABET]
    assert len(set(coords)) == len(coords)
    assert all(0 <= c.row <= 3 for c in coords)
    assert all(0 <= c.col <= 10 for c in coords)
    assert [c for c in ALPHABET if key_position(c).col == 10] == ["-"]


@pytest.mark.parametrize("a, b, expected", [("a", "a", 0), ("o", "0", 1), ("p", "c", 7), ("f", "g", 1), ("q", "p", 9)])
def test_keyboard_distance(a, b, expected):
    assert keyboard_distance(a, b) == expected


def test_keyboard_distance_is_a_metric():
    for a, b in itertools.product(ALPHABET, repeat=2):
        assert keyboard_distance(a, b) == keyboard_distance(b, a)
        assert (keyboard_distance(a, b) == 0) == (a == b)
    for a, b, c in itertools.product("qazplm5.-", repeat=3):
        assert keyboard_distance(a, c) <= keyboard_distance(a, b) + keyboard_distance(b, c)


def test_neighbours():
    assert QWERTY.neighbours("s") == ["q", "w", "e", "a", "d", "z", "x", "c"]
    assert QWERTY.neighbours("s", alphabet="abc") == ["a", "c"]
    assert all(keyboard_distance("g", n) <= 2 for n in QWERTY.neighbours("g", max_distance=2))


def test_duplicate_key_rejected():
    with pytest.raises(ValueError):
        KeyboardLayout({"a": GridCoord(0, 0), "b": GridCoord(0, 0)})
