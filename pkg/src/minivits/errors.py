"""Exception hierarchy shared across the package.

Every error that callers are expected to catch derives from
:class:`MiniVitsError`; the CLI maps subclasses to exit codes.
"""


class MiniVitsError(Exception):
    """Base class for all errors raised by this package."""


# --- corpus / manifest errors -------------------------------------------------

class SchemaError(MiniVitsError):
    """A manifest line is malformed or violates the manifest-kind contract."""


class MissingFileError(MiniVitsError):
    """A referenced file (audio, manifest, alphabet, checkpoint) does not exist."""


class EmptyManifestError(MiniVitsError):
    """A manifest parsed correctly but contains no entries."""


class SpeakerOverlapError(MiniVitsError):
    """Paired and untranscribed corpora share speaker ids."""

    def __init__(self, overlap):
        self.overlap = sorted(overlap)
        super().__init__(f"speaker sets overlap: {self.overlap}")


class EmptyCorpusError(MiniVitsError):
    """An operation needs a non-empty corpus but got an empty one."""


# --- signal / feature errors --------------------------------------------------

class UnsupportedRateError(MiniVitsError):
    """Input sample rate outside the supported set."""


class EmptyWaveformError(MiniVitsError):
    """A waveform with zero samples where at least one is required."""


class EmptyTextError(MiniVitsError):
    """Text is empty after trimming."""


class ShapeMismatchError(MiniVitsError):
    """Array shapes do not satisfy an operation's contract."""


class TooShortError(MiniVitsError):
    """Input shorter than the operation's minimum length."""


# --- model errors -------------------------------------------------------------

class TooFewFramesError(MiniVitsError):
    """Alignment needs at least as many frames as tokens."""


class OddChannelsError(MiniVitsError):
    """Coupling flows require an even channel count."""


class UntrainedModelError(MiniVitsError):
    """Inference requested on a model that has not been trained."""


class NonFiniteLossError(MiniVitsError):
    """A training loss became NaN or infinite; the run aborts."""

    def __init__(self, step, components):
        self.step = step
        self.components = dict(components)
        bad = {k: v for k, v in self.components.items()}
        super().__init__(f"non-finite loss at step {step}: {bad}")


class SeenSpeakerWarning(UserWarning):
    """An evaluation reference speaker also appears in the training corpora."""
