"""Error types raised across the typoswype toolkit.

Everything derives from TyposwypeError so the CLI can map failures to exit
code 2 in one place. Input-shaped errors also derive from ValueError.
"""


class TyposwypeError(Exception):
    """Base class. `index` is set when the failure happened inside a batch."""

    index = None

    def at_index(self, index):
        self.index = index
        return self

    def __str__(self):
        message = super().__str__()
        if self.index is not None:
            return f"{message} (batch item {self.index})"
        return message


class UnsupportedCharacter(TyposwypeError, ValueError):
    def __init__(self, char, position=None, domain=None):
        self.char = char
        self.position = position
        self.domain = domain
        where = f" at position {position}" if position is not None else ""
        what = f" in {domain!r}" if domain is not None else ""
        super().__init__(f"Unsupported character {char!r}{where}{what}")


class EmptyString(TyposwypeError, ValueError):
    pass


class ShapeMismatch(TyposwypeError, ValueError):
    pass


class NonFiniteActivation(TyposwypeError):
    pass


class DegenerateNorm(TyposwypeError, ValueError):
    pass


class FormatError(TyposwypeError, ValueError):
    pass


class FingerprintMismatch(TyposwypeError):
    pass


class EmptyNegatives(TyposwypeError, ValueError):
    pass


class BankTooSmall(TyposwypeError, ValueError):
    pass


class NonFiniteLoss(TyposwypeError):
    pass


class EmptyDataset(TyposwypeError, ValueError):
    pass


class UnknownLabel(TyposwypeError, ValueError):
    pass


class NoDomainColumn(TyposwypeError, ValueError):
    pass


class EmptyResult(TyposwypeError, ValueError):
    pass


class LengthMismatch(TyposwypeError, ValueError):
    pass


class Misalignment(TyposwypeError, ValueError):
    pass
