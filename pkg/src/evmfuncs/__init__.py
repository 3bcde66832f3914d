"""Function entry and boundary identification for stripped EVM bytecode."""

from .disasm import Instruction, MalformedHex, Program, decode

__all__ = ["Instruction", "MalformedHex", "Program", "decode"]
__version__ = "0.1.0"
