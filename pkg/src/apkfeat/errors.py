"""Exception hierarchy for the apkfeat pipeline.

Every failure raised by this package derives from ApkfeatError, one subclass
per failure mode so callers can match precisely. Parsers must raise these and
never leak IndexError / struct.error on malformed input.
"""


class ApkfeatError(Exception):
    """Base class for all apkfeat errors."""


# -- APK container ------------------------------------------------------------

class ArchiveError(ApkfeatError):
    """Base class for ZIP container errors."""


class NotAZip(ArchiveError):
    """No valid end-of-central-directory record found."""


class TruncatedArchive(ArchiveError):
    """A ZIP structure points past the end of the file."""


class DuplicateEntryName(ArchiveError):
    """Two central-directory entries share one name."""


class UnsupportedZipFeature(ArchiveError):
    """ZIP64, encryption, multi-disk, or a compression method we reject."""


class MissingManifest(ArchiveError):
    """Archive has no AndroidManifest.xml entry."""


class MissingDex(ArchiveError):
    """Archive has no classes.dex entry."""


class InflateError(ArchiveError):
    """Entry body is corrupt (bad deflate stream, size or CRC mismatch)."""


# -- DEX parser ---------------------------------------------------------------

class DexError(ApkfeatError):
    """Base class for Dalvik executable errors."""


class BadMagic(DexError):
    pass


class UnsupportedVersion(DexError):
    pass


class BadEndianTag(DexError):
    pass


class OffsetOutOfBounds(DexError):
    pass


class BadUleb128(DexError):
    pass


class MutfDecodeError(DexError):
    """Malformed MUTF-8 string data."""


class IndexOutOfRange(DexError):
    """A cross-table index exceeds the referenced table."""


class BadChecksum(DexError):
    """Stored Adler-32 does not match the file body."""


# -- AXML decoder -------------------------------------------------------------

class AxmlError(ApkfeatError):
    """Base class for binary-XML errors."""


class BadChunkSignature(AxmlError):
    pass


class TruncatedChunk(AxmlError):
    pass


class StringPoolIndexError(AxmlError):
    pass


class UnbalancedElements(AxmlError):
    pass


class NotAManifest(AxmlError):
    """Document root is not a <manifest> element."""


# -- feature dictionary -------------------------------------------------------

class DictionaryError(ApkfeatError):
    """Base class for dictionary file errors."""


class FormatError(DictionaryError):
    pass


class OrderError(DictionaryError):
    """Entries violate the group-then-lexicographic ordering."""


class DuplicateFeature(DictionaryError):
    pass


# -- vectors and models -------------------------------------------------------

class DimensionMismatch(ApkfeatError):
    """Vector, dictionary, and model dimensions disagree."""


class VectorFormatError(ApkfeatError):
    """Malformed vector text file."""


class ModelError(ApkfeatError):
    """Base class for model file errors."""


class ModelFormatError(ModelError):
    pass


class ShapeMismatch(ModelError):
    pass


class NonFiniteWeight(ModelError):
    pass


class UnknownArchitecture(ModelError):
    pass


class ChecksumMismatch(ModelError):
    """Model payload CRC-32 does not match the trailer."""


# -- benchmark ----------------------------------------------------------------

class SizeTooSmall(ApkfeatError):
    """Requested synthetic APK size cannot hold the mandatory content."""
