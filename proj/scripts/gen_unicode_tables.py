#!/usr/bin/env python3
"""Regenerates core/src/unicode_tables.inc from Python's unicodedata."""
import sys
import unicodedata

CLASSES = {
    "L": 1, "N": 1,  # letters and numbers
    "P": 2,          # punctuation
    "Z": 3,          # separators
    "S": 4,          # symbols
    "C": 5,          # control, format, unassigned
    "M": 6,          # combining marks
}


def char_class(cp):
    return CLASSES[unicodedata.category(chr(cp))[0]]


def main(out):
    ranges = []
    prev = None
    for cp in range(0x110000):
        c = char_class(cp)
        if c != prev:
            ranges.append((cp, c))
            prev = c
    lower = []
    for cp in range(0x110000):
        ch = chr(cp)
        lo = ch.lower()
        if lo != ch:
            lower.append((cp, lo.encode("utf-8")))
    with open(out, "w", encoding="utf-8") as f:
        f.write("// Generated by scripts/gen_unicode_tables.py (Unicode %s). Do not edit.\n"
                % unicodedata.unidata_version)
        f.write("// clang-format off\n")
        f.write("constexpr ClassRange kClassRanges[] = {\n")
        for cp, c in ranges:
            f.write("  {0x%X, %d},\n" % (cp, c))
        f.write("};\n\n")
        f.write("constexpr LowerEntry kLowerTable[] = {\n")
        for cp, b in lower:
            esc = "".join("\\x%02X" % x for x in b)
            f.write('  {0x%X, "%s"},\n' % (cp, esc))
        f.write("};\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "core/src/unicode_tables.inc")
