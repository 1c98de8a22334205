"""RIPL: an image-processing skeleton language lowered to dataflow process networks."""

__version__ = "0.1.0"

from .errors import CompileError, Diagnostic, EvalError, RiplError  # noqa: E402
from .image import Image  # noqa: E402

__all__ = ["CompileError", "Diagnostic", "EvalError", "Image", "RiplError", "__version__"]
