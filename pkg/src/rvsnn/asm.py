"""Two-pass assembler and program disassembler.

Syntax: one instruction or directive per line; `label:` defines a symbol
(same line as an instruction is fine); `#` starts a comment.  Directives:
`.word`, `.dword`, `.byte` (comma-separated values), `.zero n`, `.align n`,
`.org addr`.  Numbers are decimal or 0x hex; branch/jump targets are labels
or literal byte offsets relative to the instruction.  A few pseudos expand
to base instructions: nop, mv, li (32-bit range), la (auipc+addi), j, jr,
beqz, bnez, ret.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .isa import (
    EncodeError,
    INSTRUCTIONS,
    Instruction,
    CANONICAL_FENCE,
    REGISTER_ALIASES,
    SSR_NAMES,
    disassemble,
    encode,
)

DEFAULT_BASE = 0x8000_0000

_LABEL_RE = re.compile(r"^([A-Za-z_.$][\w.$]*):\s*(.*)$")
_MEM_RE = re.compile(r"^(-?\w+)\((\w+)\)$")


class AssemblyError(Exception):
    """Carries every diagnostic collected over both passes."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        super().__init__("\n".join(f"line {n}: {msg}" for n, msg in errors))


@dataclass
class Program:
    data: bytes               # little-endian image, length a multiple of 4
    symbols: dict[str, int]
    base: int

    @property
    def words(self) -> list[int]:
        return [int.from_bytes(self.data[i:i + 4], "little") for i in range(0, len(self.data), 4)]


@dataclass
class _Item:
    line_no: int
    kind: str                 # instr | word | dword | byte | zero
    addr: int = 0
    mnemonic: str = ""
    operands: list[str] = field(default_factory=list)
    values: list[str] = field(default_factory=list)
    size: int = 0


def _parse_int(text: str) -> int:
    return int(text, 0)


def _split_operands(text: str) -> list[str]:
    return [p.strip() for p in text.split(",")] if text.strip() else []


def _reg(tok: str) -> int:
    r = REGISTER_ALIASES.get(tok.lower())
    if r is None:
        raise ValueError(f"unknown register {tok!r}")
    return r


def _ssr(tok: str) -> int:
    tok = tok.lower()
    if tok in SSR_NAMES:
        return SSR_NAMES.index(tok)
    idx = _parse_int(tok)
    if not 0 <= idx <= 15:
        raise ValueError(f"special register index {idx} out of range 0-15")
    return idx


def _value(tok: str, symbols: dict[str, int]) -> int:
    try:
        return _parse_int(tok)
    except ValueError:
        pass
    if tok in symbols:
        return symbols[tok]
    raise ValueError(f"undefined symbol {tok!r}")


def _expand_pseudo(mnemonic: str, ops: list[str]) -> list[tuple[str, list[str]]] | None:
    """Fixed-size pseudo expansions; returns None for real instructions."""
    if mnemonic == "nop":
        return [("addi", ["x0", "x0", "0"])]
    if mnemonic == "mv":
        return [("addi", [ops[0], ops[1], "0"])]
    if mnemonic == "j":
        return [("jal", ["x0", ops[0]])]
    if mnemonic == "jr":
        return [("jalr", ["x0", f"0({ops[0]})"])]
    if mnemonic == "ret":
        return [("jalr", ["x0", "0(ra)"])]
    if mnemonic == "beqz":
        return [("beq", [ops[0], "x0", ops[1]])]
    if mnemonic == "bnez":
        return [("bne", [ops[0], "x0", ops[1]])]
    if mnemonic == "li":
        value = _parse_int(ops[1])
        if -2048 <= value <= 2047:
            return [("addi", [ops[0], "x0", str(value)])]
        if -(1 << 31) <= value < (1 << 31):
            hi = (value + 0x800) >> 12
            lo = value - (hi << 12)
            return [("lui", [ops[0], str(hi & 0xFFFFF)]), ("addiw", [ops[0], ops[0], str(lo)])]
        raise ValueError(f"li value {value} outside 32-bit signed range")
    if mnemonic == "la":
        # auipc+addi pair; the label operand is resolved in pass 2
        return [("_la_hi", ops), ("_la_lo", ops)]
    return None


def assemble(text: str, base: int = DEFAULT_BASE) -> Program:
    """Assemble source text into a flat little-endian image at base."""
    errors: list[tuple[int, str]] = []
    symbols: dict[str, int] = {}
    items: list[_Item] = []
    loc = base

    # pass 1: sizes and symbols
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        while True:
            m = _LABEL_RE.match(line)
            if not m:
                break
            label = m.group(1)
            if label in symbols:
                errors.append((line_no, f"duplicate label {label!r}"))
            symbols[label] = loc
            line = m.group(2).strip()
        if not line:
            continue
        parts = line.split(None, 1)
        mnemonic = parts[0].lower()
        rest = parts[1] if len(parts) > 1 else ""
        ops = _split_operands(rest)
        try:
            if mnemonic == ".org":
                target = _parse_int(ops[0])
                if target < loc:
                    raise ValueError(f".org {target:#x} is behind the location counter {loc:#x}")
                if target > loc:
                    items.append(_Item(line_no, "zero", addr=loc, size=target - loc))
                loc = target
            elif mnemonic == ".align":
                n = _parse_int(ops[0])
                if n <= 0 or n & (n - 1):
                    raise ValueError(f".align needs a power of two, got {n}")
                pad = -loc % n
                if pad:
                    items.append(_Item(line_no, "zero", addr=loc, size=pad))
                    loc += pad
            elif mnemonic == ".zero":
                n = _parse_int(ops[0])
                items.append(_Item(line_no, "zero", addr=loc, size=n))
                loc += n
            elif mnemonic in (".word", ".dword", ".byte"):
                unit = {".word": 4, ".dword": 8, ".byte": 1}[mnemonic]
                if not ops:
                    raise ValueError(f"{mnemonic} needs at least one value")
                items.append(_Item(line_no, mnemonic[1:], addr=loc, values=ops, size=unit * len(ops)))
                loc += unit * len(ops)
            elif mnemonic.startswith("."):
                raise ValueError(f"unknown directive {mnemonic}")
            else:
                expansion = _expand_pseudo(mnemonic, ops) if mnemonic not in INSTRUCTIONS else None
                if expansion is None and mnemonic not in INSTRUCTIONS:
                    raise ValueError(f"unknown mnemonic {mnemonic!r}")
                if loc % 4:
                    raise ValueError(f"instruction at {loc:#x} is not 4-byte aligned (use .align 4)")
                for sub, subops in (expansion or [(mnemonic, ops)]):
                    items.append(_Item(line_no, "instr", addr=loc, mnemonic=sub, operands=subops))
                    loc += 4
        except (ValueError, IndexError) as e:
            errors.append((line_no, str(e)))

    if errors:
        raise AssemblyError(errors)

    # pass 2: encode with resolved symbols
    size = loc - base
    image = bytearray(size)
    for item in items:
        off = item.addr - base
        try:
            if item.kind == "zero":
                continue
            if item.kind in ("word", "dword", "byte"):
                unit = {"word": 4, "dword": 8, "byte": 1}[item.kind]
                for k, tok in enumerate(item.values):
                    v = _value(tok, symbols) & ((1 << (unit * 8)) - 1)
                    image[off + k * unit: off + (k + 1) * unit] = v.to_bytes(unit, "little")
                continue
            word = _encode_operands(item, symbols)
            image[off:off + 4] = word.to_bytes(4, "little")
        except (ValueError, EncodeError) as e:
            errors.append((item.line_no, str(e)))

    if errors:
        raise AssemblyError(sorted(set(errors)))
    if len(image) % 4:
        image += bytes(-len(image) % 4)
    return Program(data=bytes(image), symbols=symbols, base=base)


def _encode_operands(item: _Item, symbols: dict[str, int]) -> int:
    """Map operand strings to an Instruction per the mnemonic's format."""
    name, ops, addr = item.mnemonic, item.operands, item.addr

    def need(n):
        if len(ops) != n:
            raise ValueError(f"{name} expects {n} operands, got {len(ops)}")

    def branch_target(tok: str) -> int:
        if tok in symbols:
            return symbols[tok] - addr
        try:
            return _parse_int(tok)
        except ValueError:
            raise ValueError(f"undefined label {tok!r}") from None

    if name == "_la_hi" or name == "_la_lo":
        need(2)
        delta = _value(ops[1], symbols) - (addr if name == "_la_hi" else addr - 4)
        hi = (delta + 0x800) >> 12
        lo = delta - (hi << 12)
        if name == "_la_hi":
            return encode(Instruction("auipc", rd=_reg(ops[0]), imm=hi & 0xFFFFF))
        return encode(Instruction("addi", rd=_reg(ops[0]), rs1=_reg(ops[0]), imm=lo))

    fmt = INSTRUCTIONS[name].fmt
    if fmt in ("R", "SNNR"):
        need(3)
        return encode(Instruction(name, rd=_reg(ops[0]), rs1=_reg(ops[1]), rs2=_reg(ops[2])))
    if fmt in ("I", "SHIFT64", "SHIFTW"):
        need(3)
        return encode(Instruction(name, rd=_reg(ops[0]), rs1=_reg(ops[1]),
                                  imm=_value(ops[2], symbols)))
    if fmt in ("LOAD", "JALR"):
        need(2)
        m = _MEM_RE.match(ops[1])
        if not m:
            raise ValueError(f"{name} needs an offset(reg) operand, got {ops[1]!r}")
        return encode(Instruction(name, rd=_reg(ops[0]), rs1=_reg(m.group(2)),
                                  imm=_parse_int(m.group(1))))
    if fmt == "S":
        need(2)
        m = _MEM_RE.match(ops[1])
        if not m:
            raise ValueError(f"{name} needs an offset(reg) operand, got {ops[1]!r}")
        return encode(Instruction(name, rs2=_reg(ops[0]), rs1=_reg(m.group(2)),
                                  imm=_parse_int(m.group(1))))
    if fmt == "B":
        need(3)
        return encode(Instruction(name, rs1=_reg(ops[0]), rs2=_reg(ops[1]),
                                  imm=branch_target(ops[2])))
    if fmt == "U":
        need(2)
        return encode(Instruction(name, rd=_reg(ops[0]), imm=_value(ops[1], symbols)))
    if fmt == "J":
        need(2)
        return encode(Instruction(name, rd=_reg(ops[0]), imm=branch_target(ops[1])))
    if fmt == "SYS":
        need(0)
        return encode(Instruction(name))
    if fmt == "FENCE":
        need(0)
        return CANONICAL_FENCE
    if fmt == "SNNNU":
        need(1)
        return encode(Instruction(name, rd=_reg(ops[0])))
    if fmt == "SNNX2S":
        need(2)
        return encode(Instruction(name, ssr=_ssr(ops[0]), rs1=_reg(ops[1])))
    if fmt == "SNNS2X":
        need(2)
        return encode(Instruction(name, rd=_reg(ops[0]), ssr=_ssr(ops[1])))
    raise ValueError(f"unhandled format {fmt}")


def disassemble_program(data: bytes) -> str:
    """One line per 32-bit word; every line reassembles to the same word."""
    lines = []
    for i in range(0, len(data) - len(data) % 4, 4):
        word = int.from_bytes(data[i:i + 4], "little")
        lines.append(disassemble(word))
    return "\n".join(lines) + "\n"
