class SmilesError(ValueError):
    """Base class for SMILES/graph construction errors.

    ``offset`` is the byte offset into the SMILES text where the problem was
    detected, or ``None`` for graphs built programmatically.
    """

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class UnsupportedToken(SmilesError):
    pass


class UnclosedBranch(SmilesError):
    pass


class UnmatchedRingBond(SmilesError):
    pass


class ValenceViolation(SmilesError):
    pass


class DisconnectedInput(SmilesError):
    pass
