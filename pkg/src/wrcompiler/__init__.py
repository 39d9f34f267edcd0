"""Compiler from a While language with locks to RISC assembly, with bounded
checkers for value-dependent noninterference and secure refinement."""

__version__ = "0.1.0"
FORMAT_VERSION = 1

from .compiler import CompRec, CompileOutput, compile_cmd, compile_program, finalize  # noqa: E402
from .core import ClassificationPolicy, LockInterp, Mem, ModeState  # noqa: E402
from .risc import RiscProgram  # noqa: E402
from .while_lang import parse  # noqa: E402

__all__ = ["ClassificationPolicy", "CompRec", "CompileOutput", "LockInterp", "Mem", "ModeState",
           "RiscProgram", "compile_cmd", "compile_program", "finalize", "parse", "__version__"]
