#!/usr/bin/env python3
"""Generates src/unicode_tables.inc.

Character classes are derived from the running Python's unicodedata and `re`
module so that the BLEU international tokenizer agrees with the reference
implementation character-for-character (including the quirks of building a
regex character class from raw punctuation characters).
"""
import re
import sys
import unicodedata

MAX = sys.maxunicode + 1


def ranges(pred):
    out, start = [], None
    for cp in range(MAX):
        ok = pred(cp)
        if ok and start is None:
            start = cp
        elif not ok and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, MAX - 1))
    return out


def chars(prefix):
    return ''.join(chr(x) for x in range(sys.maxunicode)
                   if unicodedata.category(chr(x)).startswith(prefix))


punct_class = re.compile('[' + chars('P') + ']')
symbol_class = re.compile('[' + chars('S') + ']')
digit = re.compile(r'\d')


def emit(name, rs, out):
    out.append(f'constexpr CodepointRange {name}[] = {{')
    for a, b in rs:
        out.append(f'    {{0x{a:X}, 0x{b:X}}},')
    out.append('};')


out = ['// Generated by tools/gen_unicode_tables.py; do not edit.',
       f'// Unicode {unicodedata.unidata_version}', '']
emit('kSpaceRanges', ranges(lambda c: chr(c).isspace()), out)
emit("kBleuPunctRanges", ranges(lambda c: punct_class.fullmatch(chr(c)) is not None), out)
emit('kBleuSymbolRanges', ranges(lambda c: symbol_class.fullmatch(chr(c)) is not None), out)
emit('kDecimalRanges', ranges(lambda c: digit.fullmatch(chr(c)) is not None), out)
emit('kLetterRanges', ranges(lambda c: unicodedata.category(chr(c)).startswith('L')), out)
lower = []
for cp in range(MAX):
    s = chr(cp).lower()
    if len(s) == 1 and ord(s) != cp:
        lower.append((cp, ord(s)))
out.append('constexpr CodepointMapping kLowerMap[] = {')
for a, b in lower:
    out.append(f'    {{0x{a:X}, 0x{b:X}}},')
out.append('};')
sys.stdout.write('\n'.join(out) + '\n')
