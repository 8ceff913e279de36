"""Instruction definitions, encoding and decoding for RV64I plus the
five-instruction SNN extension.

The SNN instructions live on the custom-0 opcode (0001011) in R-type layout:

    mnemonic      funct7   funct3  operands
    snn.sp        0000000  000     rd, rs1, rs2   count spikes, ACC += count
    snn.nu        0000000  001     rd             LIF update from the SSRs
    snn.up        0000000  010     rd, rs1, rs2   plasticity on one segment
    snn.mv.x2s    0000001  011     ssr, rs1       GPR -> special register
    snn.mv.s2x    0000001  100     rd, ssr        special register -> GPR

The move forms carry the special-register index in the rs2 field; unused
register fields must be zero, so every defined instruction has exactly one
encoding.  INSTRUCTIONS below is the single source of truth: the decoder
table, the assembler and the ISA reference document are all derived from it.
"""

from __future__ import annotations

from dataclasses import dataclass

CUSTOM0 = 0b0001011

# SNN special register file indices (9-15 reserved: read 0, writes ignored).
SSR_NAMES = ["acc", "vmem", "vth", "leak", "winc", "ltdp", "lfsr", "spikeout", "iext"]
SSR_ACC, SSR_VMEM, SSR_VTH, SSR_LEAK, SSR_WINC, SSR_LTDP, SSR_LFSR, SSR_SPIKEOUT, SSR_IEXT = range(9)
SSR_COUNT = 16

ABI_NAMES = ("zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 "
             "a6 a7 s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6").split()
REGISTER_ALIASES = {name: i for i, name in enumerate(ABI_NAMES)}
REGISTER_ALIASES["fp"] = 8
REGISTER_ALIASES.update({f"x{i}": i for i in range(32)})

CANONICAL_FENCE = 0x0FF0000F   # fence iorw, iorw


class IllegalInstruction(Exception):
    def __init__(self, word: int, reason: str = "undefined opcode/funct combination"):
        super().__init__(f"illegal instruction {word:#010x}: {reason}")
        self.word = word


class EncodeError(ValueError):
    pass


@dataclass(frozen=True)
class InstrDef:
    fmt: str                 # R I LOAD JALR S B U J SHIFT64 SHIFTW SYS FENCE SNNR SNNNU SNNX2S SNNS2X
    opcode: int
    funct3: int | None = None
    funct7: int | None = None


INSTRUCTIONS: dict[str, InstrDef] = {
    "lui":   InstrDef("U", 0b0110111),
    "auipc": InstrDef("U", 0b0010111),
    "jal":   InstrDef("J", 0b1101111),
    "jalr":  InstrDef("JALR", 0b1100111, 0b000),
    "beq":   InstrDef("B", 0b1100011, 0b000),
    "bne":   InstrDef("B", 0b1100011, 0b001),
    "blt":   InstrDef("B", 0b1100011, 0b100),
    "bge":   InstrDef("B", 0b1100011, 0b101),
    "bltu":  InstrDef("B", 0b1100011, 0b110),
    "bgeu":  InstrDef("B", 0b1100011, 0b111),
    "lb":    InstrDef("LOAD", 0b0000011, 0b000),
    "lh":    InstrDef("LOAD", 0b0000011, 0b001),
    "lw":    InstrDef("LOAD", 0b0000011, 0b010),
    "ld":    InstrDef("LOAD", 0b0000011, 0b011),
    "lbu":   InstrDef("LOAD", 0b0000011, 0b100),
    "lhu":   InstrDef("LOAD", 0b0000011, 0b101),
    "lwu":   InstrDef("LOAD", 0b0000011, 0b110),
    "sb":    InstrDef("S", 0b0100011, 0b000),
    "sh":    InstrDef("S", 0b0100011, 0b001),
    "sw":    InstrDef("S", 0b0100011, 0b010),
    "sd":    InstrDef("S", 0b0100011, 0b011),
    "addi":  InstrDef("I", 0b0010011, 0b000),
    "slti":  InstrDef("I", 0b0010011, 0b010),
    "sltiu": InstrDef("I", 0b0010011, 0b011),
    "xori":  InstrDef("I", 0b0010011, 0b100),
    "ori":   InstrDef("I", 0b0010011, 0b110),
    "andi":  InstrDef("I", 0b0010011, 0b111),
    "slli":  InstrDef("SHIFT64", 0b0010011, 0b001, 0b000000),
    "srli":  InstrDef("SHIFT64", 0b0010011, 0b101, 0b000000),
    "srai":  InstrDef("SHIFT64", 0b0010011, 0b101, 0b010000),
    "add":   InstrDef("R", 0b0110011, 0b000, 0b0000000),
    "sub":   InstrDef("R", 0b0110011, 0b000, 0b0100000),
    "sll":   InstrDef("R", 0b0110011, 0b001, 0b0000000),
    "slt":   InstrDef("R", 0b0110011, 0b010, 0b0000000),
    "sltu":  InstrDef("R", 0b0110011, 0b011, 0b0000000),
    "xor":   InstrDef("R", 0b0110011, 0b100, 0b0000000),
    "srl":   InstrDef("R", 0b0110011, 0b101, 0b0000000),
    "sra":   InstrDef("R", 0b0110011, 0b101, 0b0100000),
    "or":    InstrDef("R", 0b0110011, 0b110, 0b0000000),
    "and":   InstrDef("R", 0b0110011, 0b111, 0b0000000),
    "addiw": InstrDef("I", 0b0011011, 0b000),
    "slliw": InstrDef("SHIFTW", 0b0011011, 0b001, 0b0000000),
    "srliw": InstrDef("SHIFTW", 0b0011011, 0b101, 0b0000000),
    "sraiw": InstrDef("SHIFTW", 0b0011011, 0b101, 0b0100000),
    "addw":  InstrDef("R", 0b0111011, 0b000, 0b0000000),
    "subw":  InstrDef("R", 0b0111011, 0b000, 0b0100000),
    "sllw":  InstrDef("R", 0b0111011, 0b001, 0b0000000),
    "srlw":  InstrDef("R", 0b0111011, 0b101, 0b0000000),
    "sraw":  InstrDef("R", 0b0111011, 0b101, 0b0100000),
    "fence": InstrDef("FENCE", 0b0001111, 0b000),
    "ecall": InstrDef("SYS", 0b1110011),
    "ebreak": InstrDef("SYS", 0b1110011),
    "snn.sp": InstrDef("SNNR", CUSTOM0, 0b000, 0b0000000),
    "snn.nu": InstrDef("SNNNU", CUSTOM0, 0b001, 0b0000000),
    "snn.up": InstrDef("SNNR", CUSTOM0, 0b010, 0b0000000),
    "snn.mv.x2s": InstrDef("SNNX2S", CUSTOM0, 0b011, 0b0000001),
    "snn.mv.s2x": InstrDef("SNNS2X", CUSTOM0, 0b100, 0b0000001),
}

SNN_MNEMONICS = tuple(m for m in INSTRUCTIONS if m.startswith("snn."))


@dataclass(frozen=True)
class Instruction:
    name: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    ssr: int = 0


def _check_reg(name: str, value: int, field_name: str) -> None:
    if not 0 <= value <= 31:
        raise EncodeError(f"{name}: field {field_name} = {value} out of register range 0-31")


def _check_imm(name: str, value: int, lo: int, hi: int, field_name: str = "imm",
               even: bool = False) -> None:
    if not lo <= value <= hi:
        raise EncodeError(f"{name}: field {field_name} = {value} outside [{lo}, {hi}]")
    if even and value & 1:
        raise EncodeError(f"{name}: field {field_name} = {value} must be even")


def _sext(value: int, bits: int) -> int:
    mask = (1 << bits) - 1
    value &= mask
    return value - (1 << bits) if value & (1 << (bits - 1)) else value


def _b_imm_bits(imm: int) -> int:
    imm &= 0x1FFF
    return (((imm >> 12) & 1) << 31 | ((imm >> 5) & 0x3F) << 25
            | ((imm >> 1) & 0xF) << 8 | ((imm >> 11) & 1) << 7)


def _j_imm_bits(imm: int) -> int:
    imm &= 0x1FFFFF
    return (((imm >> 20) & 1) << 31 | ((imm >> 1) & 0x3FF) << 21
            | ((imm >> 11) & 1) << 20 | ((imm >> 12) & 0xFF) << 12)


def encode(instr: Instruction) -> int:
    """Encode to a 32-bit word, validating every operand range."""
    d = INSTRUCTIONS.get(instr.name)
    if d is None:
        raise EncodeError(f"unknown mnemonic {instr.name!r}")
    name, rd, rs1, rs2, imm, ssr = (instr.name, instr.rd, instr.rs1, instr.rs2,
                                    instr.imm, instr.ssr)
    fmt = d.fmt
    if fmt == "R":
        _check_reg(name, rd, "rd"); _check_reg(name, rs1, "rs1"); _check_reg(name, rs2, "rs2")
        return d.funct7 << 25 | rs2 << 20 | rs1 << 15 | d.funct3 << 12 | rd << 7 | d.opcode
    if fmt in ("I", "LOAD", "JALR"):
        _check_reg(name, rd, "rd"); _check_reg(name, rs1, "rs1")
        _check_imm(name, imm, -2048, 2047)
        return (imm & 0xFFF) << 20 | rs1 << 15 | d.funct3 << 12 | rd << 7 | d.opcode
    if fmt == "SHIFT64":
        _check_reg(name, rd, "rd"); _check_reg(name, rs1, "rs1")
        _check_imm(name, imm, 0, 63, "shamt")
        return d.funct7 << 26 | imm << 20 | rs1 << 15 | d.funct3 << 12 | rd << 7 | d.opcode
    if fmt == "SHIFTW":
        _check_reg(name, rd, "rd"); _check_reg(name, rs1, "rs1")
        _check_imm(name, imm, 0, 31, "shamt")
        return d.funct7 << 25 | imm << 20 | rs1 << 15 | d.funct3 << 12 | rd << 7 | d.opcode
    if fmt == "S":
        _check_reg(name, rs1, "rs1"); _check_reg(name, rs2, "rs2")
        _check_imm(name, imm, -2048, 2047)
        v = imm & 0xFFF
        return (v >> 5) << 25 | rs2 << 20 | rs1 << 15 | d.funct3 << 12 | (v & 0x1F) << 7 | d.opcode
    if fmt == "B":
        _check_reg(name, rs1, "rs1"); _check_reg(name, rs2, "rs2")
        _check_imm(name, imm, -4096, 4094, "offset", even=True)
        return _b_imm_bits(imm) | rs2 << 20 | rs1 << 15 | d.funct3 << 12 | d.opcode
    if fmt == "U":
        _check_reg(name, rd, "rd")
        _check_imm(name, imm, 0, 0xFFFFF, "imm20")
        return imm << 12 | rd << 7 | d.opcode
    if fmt == "J":
        _check_reg(name, rd, "rd")
        _check_imm(name, imm, -(1 << 20), (1 << 20) - 2, "offset", even=True)
        return _j_imm_bits(imm) | rd << 7 | d.opcode
    if fmt == "SYS":
        return (0 if name == "ecall" else 1) << 20 | d.opcode
    if fmt == "FENCE":
        _check_imm(name, imm, 0, (1 << 25) - 1, "fields")
        if imm & 0x1FFF:
            raise EncodeError(f"{name}: rd/funct3/rs1 bits must be zero in fence fields")
        return imm << 7 | d.opcode
    if fmt == "SNNR":
        _check_reg(name, rd, "rd"); _check_reg(name, rs1, "rs1"); _check_reg(name, rs2, "rs2")
        return d.funct7 << 25 | rs2 << 20 | rs1 << 15 | d.funct3 << 12 | rd << 7 | d.opcode
    if fmt == "SNNNU":
        _check_reg(name, rd, "rd")
        return d.funct3 << 12 | rd << 7 | d.opcode
    if fmt == "SNNX2S":
        _check_reg(name, rs1, "rs1")
        if not 0 <= ssr < SSR_COUNT:
            raise EncodeError(f"{name}: field ssr = {ssr} out of range 0-15")
        return d.funct7 << 25 | ssr << 20 | rs1 << 15 | d.funct3 << 12 | d.opcode
    if fmt == "SNNS2X":
        _check_reg(name, rd, "rd")
        if not 0 <= ssr < SSR_COUNT:
            raise EncodeError(f"{name}: field ssr = {ssr} out of range 0-15")
        return d.funct7 << 25 | ssr << 20 | d.funct3 << 12 | rd << 7 | d.opcode
    raise EncodeError(f"unhandled format {fmt}")


def _decode_mask_match(name: str, d: InstrDef) -> tuple[int, int]:
    """Fixed-bit mask/match pair for one mnemonic, derived from its format."""
    opcode_m, f3_m, f7_m = 0x7F, 0x7000, 0xFE000000
    rd_m, rs1_m, rs2_m = 0xF80, 0xF8000, 0x1F00000
    m, v = opcode_m, d.opcode
    if d.funct3 is not None:
        m |= f3_m
        v |= d.funct3 << 12
    if d.fmt in ("R", "SNNR"):
        m |= f7_m
        v |= d.funct7 << 25
    elif d.fmt == "SHIFT64":
        m |= 0xFC000000
        v |= d.funct7 << 26
    elif d.fmt == "SHIFTW":
        m |= f7_m
        v |= d.funct7 << 25
    elif d.fmt == "SYS":
        m, v = 0xFFFFFFFF, (0 if name == "ecall" else 1) << 20 | d.opcode
    elif d.fmt == "SNNNU":
        m |= f7_m | rs1_m | rs2_m
        v |= 0
    elif d.fmt == "SNNX2S":
        m |= f7_m | rd_m | 1 << 24      # ssr index is 4 bits; bit 24 must be clear
        v |= d.funct7 << 25
    elif d.fmt == "SNNS2X":
        m |= f7_m | rs1_m | 1 << 24
        v |= d.funct7 << 25
    return m, v


DECODE_TABLE: list[tuple[int, int, str]] = [
    (*_decode_mask_match(name, d), name) for name, d in INSTRUCTIONS.items()
]


def decode(word: int) -> Instruction:
    """Decode a 32-bit word or raise IllegalInstruction."""
    word &= 0xFFFFFFFF
    for mask, match, name in DECODE_TABLE:
        if word & mask == match:
            return _extract(name, word)
    raise IllegalInstruction(word)


def _extract(name: str, word: int) -> Instruction:
    d = INSTRUCTIONS[name]
    rd = (word >> 7) & 0x1F
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    fmt = d.fmt
    if fmt in ("R", "SNNR"):
        return Instruction(name, rd=rd, rs1=rs1, rs2=rs2)
    if fmt in ("I", "LOAD", "JALR"):
        return Instruction(name, rd=rd, rs1=rs1, imm=_sext(word >> 20, 12))
    if fmt == "SHIFT64":
        return Instruction(name, rd=rd, rs1=rs1, imm=(word >> 20) & 0x3F)
    if fmt == "SHIFTW":
        return Instruction(name, rd=rd, rs1=rs1, imm=(word >> 20) & 0x1F)
    if fmt == "S":
        imm = _sext(((word >> 25) << 5) | rd, 12)
        return Instruction(name, rs1=rs1, rs2=rs2, imm=imm)
    if fmt == "B":
        imm = _sext(((word >> 31) & 1) << 12 | ((word >> 7) & 1) << 11
                    | ((word >> 25) & 0x3F) << 5 | ((word >> 8) & 0xF) << 1, 13)
        return Instruction(name, rs1=rs1, rs2=rs2, imm=imm)
    if fmt == "U":
        return Instruction(name, rd=rd, imm=(word >> 12) & 0xFFFFF)
    if fmt == "J":
        imm = _sext(((word >> 31) & 1) << 20 | ((word >> 12) & 0xFF) << 12
                    | ((word >> 20) & 1) << 11 | ((word >> 21) & 0x3FF) << 1, 21)
        return Instruction(name, rd=rd, imm=imm)
    if fmt == "SYS":
        return Instruction(name)
    if fmt == "FENCE":
        return Instruction(name, imm=word >> 7)
    if fmt == "SNNNU":
        return Instruction(name, rd=rd)
    if fmt == "SNNX2S":
        return Instruction(name, rs1=rs1, ssr=rs2)
    if fmt == "SNNS2X":
        return Instruction(name, rd=rd, ssr=rs2)
    raise IllegalInstruction(word, f"unhandled format {fmt}")


def ssr_name(index: int) -> str:
    return SSR_NAMES[index] if index < len(SSR_NAMES) else str(index)


def disassemble(word: int) -> str:
    """Render one word; illegal words fall back to a .word directive.

    Output always reassembles to the same word.  Branch and jump offsets are
    printed as byte offsets relative to the instruction itself.
    """
    try:
        i = decode(word)
    except IllegalInstruction:
        return f".word {word & 0xFFFFFFFF:#010x}"
    d = INSTRUCTIONS[i.name]
    x = [f"x{n}" for n in range(32)]
    fmt = d.fmt
    if fmt in ("R", "SNNR"):
        return f"{i.name} {x[i.rd]}, {x[i.rs1]}, {x[i.rs2]}"
    if fmt == "I":
        return f"{i.name} {x[i.rd]}, {x[i.rs1]}, {i.imm}"
    if fmt in ("LOAD", "JALR"):
        return f"{i.name} {x[i.rd]}, {i.imm}({x[i.rs1]})"
    if fmt in ("SHIFT64", "SHIFTW"):
        return f"{i.name} {x[i.rd]}, {x[i.rs1]}, {i.imm}"
    if fmt == "S":
        return f"{i.name} {x[i.rs2]}, {i.imm}({x[i.rs1]})"
    if fmt == "B":
        return f"{i.name} {x[i.rs1]}, {x[i.rs2]}, {i.imm}"
    if fmt == "U":
        return f"{i.name} {x[i.rd]}, {i.imm}"
    if fmt == "J":
        return f"{i.name} {x[i.rd]}, {i.imm}"
    if fmt == "SYS":
        return i.name
    if fmt == "FENCE":
        return "fence" if word == CANONICAL_FENCE else f".word {word:#010x}"
    if fmt == "SNNNU":
        return f"{i.name} {x[i.rd]}"
    if fmt == "SNNX2S":
        return f"{i.name} {ssr_name(i.ssr)}, {x[i.rs1]}"
    if fmt == "SNNS2X":
        return f"{i.name} {x[i.rd]}, {ssr_name(i.ssr)}"
    raise AssertionError(fmt)


def render_isa_reference() -> str:
    """Markdown reference table generated from INSTRUCTIONS."""
    lines = [
        "# Instruction set reference",
        "",
        "Generated from `rvsnn.isa.INSTRUCTIONS`; regenerate with",
        "`python -c \"import rvsnn.isa; print(rvsnn.isa.render_isa_reference())\"`.",
        "",
        "R-type field layout: `funct7[31:25] rs2[24:20] rs1[19:15] funct3[14:12]",
        "rd[11:7] opcode[6:0]`.  The SNN extension uses the custom-0 opcode",
        "(0001011); `snn.mv.*` carry the special-register index in the rs2 field.",
        "",
        "| mnemonic | format | opcode | funct3 | funct7 |",
        "|----------|--------|--------|--------|--------|",
    ]
    for name, d in INSTRUCTIONS.items():
        f3 = f"{d.funct3:03b}" if d.funct3 is not None else "-"
        f7 = f"{d.funct7:07b}" if d.funct7 is not None else "-"
        lines.append(f"| {name} | {d.fmt} | {d.opcode:07b} | {f3} | {f7} |")
    lines += [
        "",
        "## SNN special registers",
        "",
        "| index | name | write behavior |",
        "|-------|------|----------------|",
        "| 0 | acc | valid-spike accumulator |",
        "| 1 | vmem | membrane potential |",
        "| 2 | vth | firing threshold |",
        "| 3 | leak | per-step leakage |",
        "| 4 | winc | potential units per valid spike |",
        "| 5 | ltdp | depression threshold, masked to 10 bits |",
        "| 6 | lfsr | random state, masked to 16 bits, 0 coerced to 1 |",
        "| 7 | spikeout | last spike flag, masked to 1 bit |",
        "| 8 | iext | external (teacher) current, signed |",
        "| 9-15 | reserved | reads return 0, writes are ignored |",
        "",
    ]
    return "\n".join(lines)
