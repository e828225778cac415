"""Huffman entropy coding kernels (baseline sequential, T.81 Annex F).

The per-symbol loops are compiled with numba; everything else in the codec is
vectorised numpy. Kernels report failures through integer status codes so the
Python side can raise typed errors.
"""

import numpy as np
from numba import njit

OK = 0
UNDERRUN = 1
BAD_CODE = 2
BAD_RESTART = 3
BAD_RUN = 4
NO_CODE = 5
OUT_OF_SPACE = 6

STATUS_TEXT = {
    UNDERRUN: "entropy data ended before all blocks were decoded",
    BAD_CODE: "invalid Huffman code",
    BAD_RESTART: "restart marker missing or out of sequence",
    BAD_RUN: "coefficient run past end of block",
    NO_CODE: "symbol has no Huffman code in the selected table",
}


def decode_tables(bits, vals):
    """MAXCODE / VALPTR / MINCODE arrays for one table (T.81 F.2.2.3)."""
    maxcode = np.full(18, -1, dtype=np.int32)
    valptr = np.zeros(17, dtype=np.int32)
    mincode = np.zeros(17, dtype=np.int32)
    huffval = np.zeros(256, dtype=np.int32)
    huffval[:len(vals)] = vals
    code = 0
    k = 0
    for length in range(1, 17):
        count = bits[length - 1]
        if count:
            valptr[length] = k
            mincode[length] = code
            code += count
            k += count
            maxcode[length] = code - 1
        code <<= 1
    maxcode[17] = 0x7FFFFFFF
    return maxcode, valptr, mincode, huffval


LOOKAHEAD = 9


def lookup_table(bits, vals):
    """Fast path: ``(length << 8) | symbol`` indexed by the next 9 bits, 0 if longer."""
    look = np.zeros(1 << LOOKAHEAD, dtype=np.int32)
    code = 0
    k = 0
    for length in range(1, LOOKAHEAD + 1):
        for _ in range(bits[length - 1]):
            shift = LOOKAHEAD - length
            look[code << shift:(code + 1) << shift] = (length << 8) | vals[k]
            code += 1
            k += 1
        code <<= 1
    return look


@njit(cache=True)
def _fill(data, end, pos, acc, nbits, pad):
    # Keeps at most 48 bits buffered. At a marker or past the end, zero bytes
    # are shifted in instead and counted in ``pad`` so over-reads show up.
    acc &= (1 << nbits) - 1
    while nbits <= 40:
        b = 0
        if pos < end:
            b = data[pos]
            if b != 0xFF:
                pos += 1
            elif pos + 1 < end and data[pos + 1] == 0:
                pos += 2
            else:
                b = 0
                pad += 8
        else:
            pad += 8
        acc = (acc << 8) | b
        nbits += 8
    return pos, acc, nbits, pad


@njit(cache=True)
def _symbol(acc, nbits, look, maxcode, valptr, mincode, huffval, t):
    """Return (symbol, bits consumed); consumed == 0 flags an invalid code."""
    peek = (acc >> (nbits - LOOKAHEAD)) & ((1 << LOOKAHEAD) - 1)
    e = look[t, peek]
    if e != 0:
        return e & 0xFF, e >> 8
    length = LOOKAHEAD + 1
    while length <= 16:
        code = (acc >> (nbits - length)) & ((1 << length) - 1)
        if code <= maxcode[t, length]:
            return huffval[t, valptr[t, length] + code - mincode[t, length]], length
        length += 1
    return 0, 0


@njit(cache=True)
def _extend(v, t):
    if t == 0:
        return 0
    if v < (1 << (t - 1)):
        return v - (1 << t) + 1
    return v


@njit(cache=True)
def decode_scan(data, start, end, restart_interval, schedule, slot_of,
                dc_sel, ac_sel, look, maxcode, valptr, mincode, huffval, zigzag, coefs):
    """Decode one scan into ``coefs`` (natural order, one row per block).

    ``schedule[m, b]`` is the destination row for block ``b`` of MCU ``m``
    and ``slot_of[b]`` the scan component it belongs to. Tables 0-3 of the
    lookup arrays are DC tables, 4-7 AC tables.
    """
    pos = start
    acc = 0
    nbits = 0
    pad = 0
    pred = np.zeros(4, dtype=np.int64)
    n_mcus, per_mcu = schedule.shape
    expected_rst = 0
    for m in range(n_mcus):
        if restart_interval > 0 and m > 0 and m % restart_interval == 0:
            if pad > nbits:
                return UNDERRUN
            while pos + 1 < end and data[pos] == 0xFF and data[pos + 1] == 0xFF:
                pos += 1
            if pos + 1 >= end or data[pos] != 0xFF or data[pos + 1] != 0xD0 + expected_rst:
                return BAD_RESTART
            pos += 2
            acc = 0
            nbits = 0
            pad = 0
            expected_rst = (expected_rst + 1) & 7
            for i in range(4):
                pred[i] = 0
        for b in range(per_mcu):
            row = schedule[m, b]
            slot = slot_of[b]
            if nbits < 32:
                pos, acc, nbits, pad = _fill(data, end, pos, acc, nbits, pad)
            size, used = _symbol(acc, nbits, look, maxcode, valptr, mincode, huffval, dc_sel[slot])
            if used == 0:
                return BAD_CODE
            nbits -= used
            if size > 11:
                return BAD_CODE
            diff = 0
            if size:
                diff = _extend((acc >> (nbits - size)) & ((1 << size) - 1), size)
                nbits -= size
            pred[slot] += diff
            coefs[row, 0] = pred[slot]
            t = ac_sel[slot] + 4
            k = 1
            while k < 64:
                if nbits < 32:
                    pos, acc, nbits, pad = _fill(data, end, pos, acc, nbits, pad)
                rs, used = _symbol(acc, nbits, look, maxcode, valptr, mincode, huffval, t)
                if used == 0:
                    return BAD_CODE
                nbits -= used
                r = rs >> 4
                s = rs & 15
                if s == 0:
                    if r == 15:
                        k += 16
                        if k > 64:
                            return BAD_RUN
                        continue
                    break
                k += r
                if k > 63:
                    return BAD_RUN
                coefs[row, zigzag[k]] = _extend((acc >> (nbits - s)) & ((1 << s) - 1), s)
                nbits -= s
                k += 1
            if pad > nbits:
                return UNDERRUN
    return OK


@njit(cache=True)
def _emit(out, pos, acc, nbits, code, length):
    """Append ``length`` (<= 32) bits; returns (pos, acc, nbits) or pos = -1 when full."""
    acc = (acc << length) | (code & ((1 << length) - 1))
    nbits += length
    while nbits >= 8:
        nbits -= 8
        byte = (acc >> nbits) & 0xFF
        if pos + 2 > out.shape[0]:
            return -1, acc, nbits
        out[pos] = byte
        pos += 1
        if byte == 0xFF:
            out[pos] = 0
            pos += 1
    return pos, acc & ((1 << nbits) - 1), nbits


@njit(cache=True)
def _bit_length(v):
    n = 0
    while v:
        v >>= 1
        n += 1
    return n


@njit(cache=True)
def encode_scan(coefs, schedule, slot_of, dc_sel, ac_sel, ehufco, ehufsi,
                restart_interval, zigzag, out):
    """Huffman-encode blocks in MCU order; returns (status, bytes written).

    ``ehufco[t, sym]`` / ``ehufsi[t, sym]`` hold code and length per table,
    tables 0-3 DC and 4-7 AC; a length of 0 means the symbol is not coded.
    """
    pos = 0
    acc = 0
    nbits = 0
    pred = np.zeros(4, dtype=np.int64)
    n_mcus, per_mcu = schedule.shape
    rst = 0
    for m in range(n_mcus):
        if restart_interval > 0 and m > 0 and m % restart_interval == 0:
            if nbits > 0:
                fill = 8 - nbits
                pos, acc, nbits = _emit(out, pos, acc, nbits, (1 << fill) - 1, fill)
            if pos < 0 or pos + 2 > out.shape[0]:
                return OUT_OF_SPACE, 0
            out[pos] = 0xFF
            out[pos + 1] = 0xD0 + rst
            pos += 2
            rst = (rst + 1) & 7
            for i in range(4):
                pred[i] = 0
        for b in range(per_mcu):
            row = schedule[m, b]
            slot = slot_of[b]
            t = dc_sel[slot]
            dc = np.int64(coefs[row, 0])
            diff = dc - pred[slot]
            pred[slot] = dc
            size = _bit_length(diff if diff >= 0 else -diff)
            if size > 11 or ehufsi[t, size] == 0:
                return NO_CODE, 0
            extra = diff if diff >= 0 else diff - 1
            pos, acc, nbits = _emit(out, pos, acc, nbits,
                                    (ehufco[t, size] << size) | (extra & ((1 << size) - 1)),
                                    ehufsi[t, size] + size)
            if pos < 0:
                return OUT_OF_SPACE, 0
            t = ac_sel[slot] + 4
            run = 0
            for k in range(1, 64):
                v = np.int64(coefs[row, zigzag[k]])
                if v == 0:
                    run += 1
                    continue
                while run > 15:
                    if ehufsi[t, 0xF0] == 0:
                        return NO_CODE, 0
                    pos, acc, nbits = _emit(out, pos, acc, nbits, ehufco[t, 0xF0], ehufsi[t, 0xF0])
                    run -= 16
                size = _bit_length(v if v >= 0 else -v)
                sym = (run << 4) | size
                if size > 10 or ehufsi[t, sym] == 0:
                    return NO_CODE, 0
                extra = v if v >= 0 else v - 1
                pos, acc, nbits = _emit(out, pos, acc, nbits,
                                        (ehufco[t, sym] << size) | (extra & ((1 << size) - 1)),
                                        ehufsi[t, sym] + size)
                if pos < 0:
                    return OUT_OF_SPACE, 0
                run = 0
            if run > 0:
                if ehufsi[t, 0] == 0:
                    return NO_CODE, 0
                pos, acc, nbits = _emit(out, pos, acc, nbits, ehufco[t, 0], ehufsi[t, 0])
                if pos < 0:
                    return OUT_OF_SPACE, 0
    if nbits > 0:
        fill = 8 - nbits
        pos, acc, nbits = _emit(out, pos, acc, nbits, (1 << fill) - 1, fill)
        if pos < 0:
            return OUT_OF_SPACE, 0
    return OK, pos
