#!/usr/bin/env python3
"""Independent reference for the constellation tables.

Regenerates constellation_gray.csv. Kept separate from the C++
implementation on purpose: the unit tests compare the library against
this frozen output, not against itself.
"""
import math

def gray_decode_ref(g: int) -> int:
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b

def build(q: int):
    if q == 0:
        return [(0, 0.0, 0.0, "")]
    qi = (q + 1) // 2
    qq = q // 2
    li, lq = 1 << qi, 1 << qq
    energy = (li * li - 1) / 3.0 + (lq * lq - 1) / 3.0
    scale = 1.0 / math.sqrt(energy)
    rows = []
    for label in range(1 << q):
        bits_i = label >> qq
        bits_q = label & ((1 << qq) - 1)
        idx_i = gray_decode_ref(bits_i)
        idx_q = gray_decode_ref(bits_q)
        re = (2 * idx_i - (li - 1)) * scale
        im = (2 * idx_q - (lq - 1)) * scale
        rows.append((label, re, im, format(label, f"0{q}b")))
    return rows

NAMES = [
    ("phi", 0), ("bpsk", 1), ("qpsk", 2), ("qam16", 4),
    ("qam64", 6), ("qam256", 8), ("qam1024", 10),
]

def main():
    with open("constellation_gray.csv", "w") as f:
        f.write("constellation,point_index,re,im,gray_bits\n")
        for name, q in NAMES:
            for label, re, im, bits in build(q):
                f.write(f"{name},{label},{re!r},{im!r},{bits}\n")

if __name__ == "__main__":
    main()
