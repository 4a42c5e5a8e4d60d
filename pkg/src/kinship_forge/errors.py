"""Exception taxonomy shared across the package.

Every error raised on purpose derives from KinshipForgeError so the CLI
can map the whole family onto exit codes.
"""

from __future__ import annotations


class KinshipForgeError(Exception):
    """Base class for all package errors."""


class ConfigError(KinshipForgeError):
    """Bad parameter, flag, config-file entry, or rule file."""


class PoolExhaustedError(KinshipForgeError):
    """Name or cloze-token pool too small for the requested assignment."""


class EdgeConflictError(KinshipForgeError):
    """Two different predicates asserted for the same ordered entity pair."""


class ClosureConflictError(EdgeConflictError):
    """Closure derived two different predicates for one pair in the same round."""


class UnexpandableError(KinshipForgeError):
    """Backward chaining exhausted its restart budget without reaching length k."""


class NoiseSearchError(KinshipForgeError):
    """No noise path satisfying the structural constraints was found."""


class BankFormatError(KinshipForgeError):
    """Malformed template bank file; message carries the offending line number."""


class CoverageError(KinshipForgeError):
    """Template bank is missing a key required by the requested generation."""


class NoEligibleTemplateError(KinshipForgeError):
    """All templates for a key sit in the other split."""


class InsufficientTemplatesError(KinshipForgeError):
    """A key has too few templates for the requested holdout fraction."""


class DisconnectedPathError(KinshipForgeError):
    """Fact sequence handed to the fold is not a connected edge path."""


class NoPathError(KinshipForgeError):
    """No derivable simple path between the query entities."""


class AmbiguousAnswerError(KinshipForgeError):
    """Fact set derives more than one predicate for the query pair."""

    def __init__(self, predicates) -> None:
        names = ", ".join(sorted(p.value for p in predicates))
        super().__init__(f"ambiguous derivation: {{{names}}}")
        self.predicates = frozenset(predicates)


class EnumerationCapError(KinshipForgeError):
    """Shape enumeration requested beyond the configured length cap."""


class GenerationBudgetError(KinshipForgeError):
    """A puzzle could not be produced within the per-row retry budget."""


class SchemaError(KinshipForgeError):
    """Dataset file is missing a column or holds an unparseable value."""
