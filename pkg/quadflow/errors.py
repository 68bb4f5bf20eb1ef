"""
quadflow - Error Types

Every failure the library reports derives from ``QuadFlowError`` so callers
(the CLI in particular) can separate domain errors from programming errors.
"""

from contextlib import contextmanager
from typing import Iterator, Optional, Tuple


class QuadFlowError(Exception):
    """Base class for all quadflow errors"""
    pass


class FormatError(QuadFlowError):
    """Raised when an image, flow or mask file is malformed"""

    def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(path)
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DimensionMismatchError(QuadFlowError):
    """Raised when two rasters that must agree in size do not"""

    def __init__(self, what: str, expected: Tuple[int, ...], actual: Tuple[int, ...]):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected shape {expected}, got {actual}")


class ParameterError(QuadFlowError):
    """Raised when an operation receives an out-of-range parameter"""
    pass


class SceneError(QuadFlowError):
    """Raised for invalid synthetic scenes (parse errors, margin or overlap violations)"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MetricError(QuadFlowError):
    """Raised when a metric is undefined for its inputs"""
    pass


class FlowPairError(QuadFlowError):
    """Raised when the flow for one (source, target) frame pair cannot be produced"""

    def __init__(self, pair: Tuple[int, int], cause: Exception):
        self.pair = pair
        self.cause = cause
        super().__init__(f"flow {pair[0]}->{pair[1]}: {cause}")


class StorageError(QuadFlowError):
    """Raised when an artifact cannot be read from or written to disk"""
    pass


class StageError(QuadFlowError):
    """A failure inside a named pipeline stage"""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@contextmanager
def stage(name: str) -> Iterator[None]:
    """
    Label any quadflow error raised inside the block with the stage name.
    Already-labelled errors pass through unchanged.
    """
    try:
        yield
    except StageError:
        raise
    except QuadFlowError as e:
        raise StageError(name, e) from e
