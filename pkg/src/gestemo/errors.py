"""Exception types raised across the toolkit.

Every error that callers are expected to catch and distinguish gets its own
class; all inherit from GestemoError so a bare pipeline can catch one type.
"""


class GestemoError(Exception):
    """Base class for all toolkit errors."""


# -- event / stream construction ------------------------------------------

class OutOfBoundsError(GestemoError):
    """Event coordinate or timestamp outside the declared sensor domain."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class BadPolarityError(GestemoError):
    """Polarity outside {0, 1}."""


class NonMonotonicTimeError(GestemoError):
    """Timestamps decrease at the given index."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class BadSpecError(GestemoError):
    """Invalid synthetic-stream or synthetic-dataset specification."""


# -- file formats and manifests -------------------------------------------

class ParseError(GestemoError):
    """Malformed file content.  Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class RaggedRowsError(ParseError):
    """Feature row whose length disagrees with the declared dimension."""


class UnknownIdError(GestemoError):
    """Sample id not present in the manifest."""


class MissingFileError(GestemoError):
    """A file referenced by a manifest entry does not exist."""


class MissingFeaturesError(GestemoError):
    """An analysis needs frame features a manifest entry does not carry."""


class UnknownLabelError(GestemoError):
    """Gesture label not in the taxonomy."""


# -- alignment --------------------------------------------------------------

class BadRangeError(GestemoError):
    """Search range [lo, hi] invalid for the timestamp list."""


class EmptyTimeListError(GestemoError):
    """Search requested on an empty timestamp list."""


class UnsortedTagsError(GestemoError):
    """Annotation tags are not strictly increasing."""


class BadCutsError(GestemoError):
    """Segment cut indices unsorted or outside [0, stream length]."""


# -- encoding ----------------------------------------------------------------

class EmptyStreamError(GestemoError):
    """Operation requires at least one event."""


class BadKError(GestemoError):
    """Plane count K < 1."""


class BadFactorError(GestemoError):
    """Downsampling factor < 1."""


# -- networks ----------------------------------------------------------------

class ShapeMismatchError(GestemoError):
    """Array shapes incompatible with the declared architecture."""


class UninitializedParamsError(GestemoError):
    """Parameter dict is missing tensors the architecture requires."""


class NoRecordedForwardError(GestemoError):
    """Backward pass requested without a recorded forward tape."""


class DimMismatchError(GestemoError):
    """Vector dimensions disagree."""


# -- training / evaluation ---------------------------------------------------

class EmptyClassError(GestemoError):
    """A class has zero samples where a positive count is required."""


class DataError(GestemoError):
    """Dataset unusable for the requested training mode."""


class DivergedLossError(GestemoError):
    """Training loss became non-finite."""


class EmptySplitError(GestemoError):
    """Evaluation requested on a split with no samples."""
