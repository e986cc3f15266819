"""Exception hierarchy for the package.

Everything raised deliberately by the library derives from GradKitError so
callers (and the CLI) can catch one type and report cleanly.
"""

from __future__ import annotations


class GradKitError(Exception):
    """Base class for all library errors."""


class InvalidTokenError(GradKitError):
    """A token id is outside the vocabulary range."""


class SequenceTooShortError(GradKitError):
    """An operation needs a longer token sequence than it was given."""


class ReplayUnderrunError(GradKitError):
    """A replay source ran out of scripted logit vectors."""


class ScoreAlignmentError(GradKitError):
    """Transition scores do not line up with the token sequence."""


class ShapeMismatchError(GradKitError):
    """Two logit vectors (or a vector and a vocabulary) differ in length."""


class IncompatibleGraphError(GradKitError):
    """Graphs with different vocabulary sizes cannot be combined."""


class IncompatibleArtifactsError(GradKitError):
    """Vocab, graph, and logit source disagree on vocabulary size."""


class GraphFormatError(GradKitError):
    """A graph file is malformed (bad magic, version, or truncation)."""


class CorpusFormatError(GradKitError):
    """A corpus file cannot be read (names the offending line)."""


class ConfigError(GradKitError):
    """Invalid decoder or CLI configuration."""


class BridgeError(GradKitError):
    """Base class for failures talking to an external logit server."""


class BridgeProtocolError(BridgeError):
    """The server sent something the wire protocol does not allow."""


class BridgeTimeoutError(BridgeError):
    """The server did not answer within the allotted time."""
