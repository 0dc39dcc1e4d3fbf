from .export import (
    ExportError,
    ExportManifest,
    ImageDecodeError,
    ModelLoadError,
    UnexpectedShapeError,
    export,
)
from .tpk import read_tpk_header, write_tpk

__version__ = "0.1.0"
