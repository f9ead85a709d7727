"""Multi-level cell model: level/bit encodings and overwrite-word generation.

A cell stores one of ``2**bits_per_cell`` program levels; level 0 is the
erased state. NAND-like memory cannot lower a cell without erasing the whole
block, but it can always push a cell to a strictly higher level in place.
An in-place overwrite of a cell at level L therefore draws from
{L+1, ..., top}; a cell already at the top level keeps its value.
"""

from random import Random
from dataclasses import dataclass

__all__ = [
    "ALL_MAX",
    "DataWord",
    "FillKind",
    "available_levels",
    "decode_bits",
    "encode_level",
    "gen_fill_word",
    "gen_uniform_word",
    "gen_upward_random",
    "gen_upward_word",
    "max_level",
    "word_from_bits",
    "word_from_hex",
    "word_to_hex",
]


def max_level(bits_per_cell: int) -> int:
    """Highest program level a cell of the given width can hold."""
    if bits_per_cell < 1:
        raise ValueError(f"bits_per_cell must be >= 1, got {bits_per_cell}")
    return (1 << bits_per_cell) - 1


def _check_level(level: int, bits_per_cell: int) -> int:
    top = max_level(bits_per_cell)
    if not 0 <= level <= top:
        raise ValueError(f"level {level} out of range [0, {top}]")
    return top


def encode_level(level: int, bits_per_cell: int) -> str:
    """Binary encoding of a level, most-significant bit first."""
    _check_level(level, bits_per_cell)
    return format(level, f"0{bits_per_cell}b")


def decode_bits(bits: str, bits_per_cell: int) -> int:
    """Inverse of encode_level. The bit string must be exactly one cell wide."""
    if len(bits) != bits_per_cell:
        raise ValueError(
            f"expected {bits_per_cell} bits, got {len(bits)} ({bits!r})"
        )
    if any(c not in "01" for c in bits):
        raise ValueError(f"not a binary string: {bits!r}")
    return int(bits, 2)


def available_levels(original: int, bits_per_cell: int) -> set:
    """Levels an in-place overwrite may move a cell to: everything strictly
    above the current level. Empty for a cell already at the top."""
    top = _check_level(original, bits_per_cell)
    return set(range(original + 1, top + 1))


def gen_upward_random(original: int, bits_per_cell: int, rng: Random) -> int:
    """Uniform random level strictly above ``original``; unchanged at the top.

    Result >= original always, with equality exactly when original is the
    maximum level.
    """
    top = _check_level(original, bits_per_cell)
    if original == top:
        return original
    return rng.randint(original + 1, top)


@dataclass(frozen=True)
class DataWord:
    """Fixed-length sequence of cell levels sharing one bits-per-cell width."""

    levels: tuple
    bits_per_cell: int

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ValueError("a word needs at least one cell")
        top = max_level(self.bits_per_cell)
        for i, level in enumerate(self.levels):
            if not 0 <= level <= top:
                raise ValueError(f"cell {i}: level {level} out of range [0, {top}]")

    def __len__(self) -> int:
        return len(self.levels)

    def bits(self) -> str:
        """Concatenated per-cell encodings, cell 0 first."""
        return "".join(encode_level(l, self.bits_per_cell) for l in self.levels)


def word_from_bits(bits: str, bits_per_cell: int) -> DataWord:
    """Split a flat bit string into cells of ``bits_per_cell`` bits each."""
    if not bits or len(bits) % bits_per_cell:
        raise ValueError(
            f"bit string of width {len(bits)} does not divide into "
            f"{bits_per_cell}-bit cells"
        )
    levels = tuple(
        decode_bits(bits[i : i + bits_per_cell], bits_per_cell)
        for i in range(0, len(bits), bits_per_cell)
    )
    return DataWord(levels, bits_per_cell)


def word_from_hex(text: str, cells: int, bits_per_cell: int) -> DataWord:
    """Parse a 0x-prefixed hex payload whose bit width is cells * bits_per_cell.

    The hex digit count must match the word width exactly (4 bits per digit),
    so configurations are only hex-addressable when the slot width is a
    multiple of four bits.
    """
    if not text.lower().startswith("0x"):
        raise ValueError(f"payload must be 0x-prefixed hex: {text!r}")
    digits = text[2:]
    width = cells * bits_per_cell
    if width % 4:
        raise ValueError(f"slot width {width} bits is not hex-addressable")
    if len(digits) * 4 != width:
        raise ValueError(
            f"payload {text!r} is {len(digits) * 4} bits, slot is {width} bits"
        )
    if not digits or any(c not in "0123456789abcdefABCDEF" for c in digits):
        raise ValueError(f"not a hex payload: {text!r}")
    return word_from_bits(format(int(digits, 16), f"0{width}b"), bits_per_cell)


def word_to_hex(word: DataWord) -> str:
    """Inverse of word_from_hex for nibble-aligned words."""
    width = len(word) * word.bits_per_cell
    if width % 4:
        raise ValueError(f"word width {width} bits is not hex-representable")
    return "0x" + format(int(word.bits(), 2), f"0{width // 4}X")


def gen_upward_word(original: DataWord, rng: Random) -> DataWord:
    """Apply gen_upward_random to every cell independently."""
    return DataWord(
        tuple(gen_upward_random(l, original.bits_per_cell, rng) for l in original.levels),
        original.bits_per_cell,
    )


def gen_uniform_word(cells: int, bits_per_cell: int, rng: Random) -> DataWord:
    """Uniform word over the full level range, for freely rewritable memory."""
    top = max_level(bits_per_cell)
    if cells < 1:
        raise ValueError(f"cells must be >= 1, got {cells}")
    return DataWord(tuple(rng.randint(0, top) for _ in range(cells)), bits_per_cell)


@dataclass(frozen=True)
class FillKind:
    """Fixed overwrite pattern needing no random source.

    ``level is None`` means every cell goes to the maximum level for the
    target word's width; otherwise every cell goes to the given level.
    """

    level: int | None = None

    @property
    def label(self) -> str:
        return "AllMax" if self.level is None else f"Level={self.level}"


ALL_MAX = FillKind()


def gen_fill_word(pattern: FillKind, cells: int, bits_per_cell: int) -> DataWord:
    """Build the fixed word for a fill pattern."""
    if cells < 1:
        raise ValueError(f"cells must be >= 1, got {cells}")
    top = max_level(bits_per_cell)
    level = top if pattern.level is None else pattern.level
    _check_level(level, bits_per_cell)
    return DataWord((level,) * cells, bits_per_cell)
