import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rvsnn import isa
from rvsnn.isa import (
    DECODE_TABLE,
    EncodeError,
    IllegalInstruction,
    Instruction,
    decode,
    disassemble,
    encode,
    render_isa_reference,
)

regs = st.integers(0, 31)


class TestEncodeExamples:
    def test_snn_sp(self):
        assert encode(Instruction("snn.sp", rd=10, rs1=5, rs2=6)) == 0x0062850B

    def test_snn_nu(self):
        assert encode(Instruction("snn.nu", rd=1)) == 0x0000108B

    def test_canonical_nop(self):
        assert encode(Instruction("addi", rd=0, rs1=0, imm=0)) == 0x00000013

    def test_field_errors_name_the_field(self):
        with pytest.raises(EncodeError, match="rd"):
            encode(Instruction("snn.sp", rd=32, rs1=0, rs2=0))
        with pytest.raises(EncodeError, match="ssr"):
            encode(Instruction("snn.mv.x2s", rs1=1, ssr=16))
        with pytest.raises(EncodeError, match="offset"):
            encode(Instruction("beq", rs1=0, rs2=0, imm=5000))
        with pytest.raises(EncodeError, match="imm"):
            encode(Instruction("addi", rd=1, rs1=1, imm=5000))


class TestDecodeExamples:
    def test_snn_sp(self):
        assert decode(0x0062850B) == Instruction("snn.sp", rd=10, rs1=5, rs2=6)

    def test_unassigned_custom0_slot(self):
        with pytest.raises(IllegalInstruction):
            decode((0b111 << 12) | 0x0B)

    def test_base_nop(self):
        assert decode(0x00000013) == Instruction("addi", rd=0, rs1=0, imm=0)

    def test_zero_word_illegal(self):
        with pytest.raises(IllegalInstruction):
            decode(0)

    def test_nu_with_nonzero_rs_fields_illegal(self):
        word = encode(Instruction("snn.nu", rd=1)) | (3 << 15)
        with pytest.raises(IllegalInstruction):
            decode(word)

    def test_mv_ssr_high_bit_illegal(self):
        word = encode(Instruction("snn.mv.x2s", rs1=1, ssr=15)) | (1 << 24)
        with pytest.raises(IllegalInstruction):
            decode(word)


class TestRoundTrip:
    def test_snn_forms_exhaustive_ssr_sampled_regs(self):
        for ssr, r in itertools.product(range(16), [0, 1, 17, 31]):
            for i in (Instruction("snn.mv.x2s", rs1=r, ssr=ssr),
                      Instruction("snn.mv.s2x", rd=r, ssr=ssr)):
                assert decode(encode(i)) == i
        for rd, rs1, rs2 in itertools.product([0, 5, 31], repeat=3):
            for name in ("snn.sp", "snn.up"):
                i = Instruction(name, rd=rd, rs1=rs1, rs2=rs2)
                assert decode(encode(i)) == i
            assert decode(encode(Instruction("snn.nu", rd=rd))) == Instruction("snn.nu", rd=rd)

    @given(st.sampled_from(sorted(isa.INSTRUCTIONS)), regs, regs, regs,
           st.integers(-2048, 2047), st.integers(0, 15))
    def test_decode_encode_identity(self, name, rd, rs1, rs2, imm, ssr):
        fmt = isa.INSTRUCTIONS[name].fmt
        if fmt in ("B", "J"):
            imm &= ~1
        if fmt == "U":
            imm &= 0xFFFFF
        if fmt == "SHIFT64":
            imm &= 63
        if fmt == "SHIFTW":
            imm &= 31
        if fmt == "FENCE":
            imm = 0
        i = Instruction(name, rd=rd, rs1=rs1, rs2=rs2, imm=imm, ssr=ssr)
        word = encode(i)
        assert encode(decode(word)) == word

    def test_no_aliasing_between_table_entries(self):
        # two decode entries may never both match one word
        for (m1, v1, n1), (m2, v2, n2) in itertools.combinations(DECODE_TABLE, 2):
            both = m1 & m2
            assert (v1 & both) != (v2 & both), f"{n1} and {n2} overlap"


class TestDisassemble:
    def test_snn_sp(self):
        assert disassemble(0x0062850B) == "snn.sp x10, x5, x6"

    def test_illegal_fallback(self):
        assert disassemble(0xFFFFFFFF) == ".word 0xffffffff"

    def test_ssr_names(self):
        word = encode(Instruction("snn.mv.x2s", rs1=3, ssr=5))
        assert disassemble(word) == "snn.mv.x2s ltdp, x3"
        word = encode(Instruction("snn.mv.s2x", rd=4, ssr=6))
        assert disassemble(word) == "snn.mv.s2x x4, lfsr"

    def test_reserved_ssr_index_number(self):
        word = encode(Instruction("snn.mv.s2x", rd=4, ssr=12))
        assert disassemble(word) == "snn.mv.s2x x4, 12"


class TestReferenceDoc:
    def test_mentions_every_mnemonic(self):
        doc = render_isa_reference()
        for name in isa.INSTRUCTIONS:
            assert f"| {name} |" in doc

    def test_committed_doc_is_current(self):
        from pathlib import Path

        committed = Path(__file__).parent.parent / "docs" / "ISA.md"
        assert committed.exists(), "docs/ISA.md missing; regenerate from render_isa_reference()"
        assert committed.read_text() == render_isa_reference()
