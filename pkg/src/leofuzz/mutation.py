"""Havoc-style byte mutation."""

from __future__ import annotations

import random

INTERESTING = bytes([0x00, 0xFF, 0x7F]) + bytes(range(ord("A"), ord("Z") + 1))
OPERATORS = ("bit_flip", "byte_replace", "byte_insert", "byte_delete", "block_dup", "interesting")
MAX_STACK = 8


def bit_flip(buf: bytearray, pos: int, bit: int) -> None:
    buf[pos] ^= 1 << bit


def byte_replace(buf: bytearray, pos: int, value: int) -> None:
    buf[pos] = value


def byte_insert(buf: bytearray, pos: int, value: int) -> None:
    buf.insert(pos, value)


def byte_delete(buf: bytearray, pos: int) -> None:
    del buf[pos]


def block_dup(buf: bytearray, start: int, length: int, dest: int) -> None:
    buf[dest:dest] = buf[start:start + length]


def _apply(op: str, buf: bytearray, rng: random.Random, max_len: int) -> bool:
    """Apply ``op`` at random positions; False when it is not applicable."""
    n = len(buf)
    if op == "bit_flip":
        if not n:
            return False
        bit_flip(buf, rng.randrange(n), rng.randrange(8))
    elif op == "byte_replace":
        if not n:
            return False
        byte_replace(buf, rng.randrange(n), rng.randrange(256))
    elif op == "interesting":
        if not n:
            return False
        byte_replace(buf, rng.randrange(n), INTERESTING[rng.randrange(len(INTERESTING))])
    elif op == "byte_insert":
        if n >= max_len:
            return False
        byte_insert(buf, rng.randrange(n + 1), rng.randrange(256))
    elif op == "byte_delete":
        if n <= 1:
            return False
        byte_delete(buf, rng.randrange(n))
    elif op == "block_dup":
        if not n or n >= max_len:
            return False
        length = 1 + rng.randrange(min(n, max_len - n, 16))
        start = rng.randrange(n - length + 1)
        block_dup(buf, start, length, rng.randrange(n + 1))
    else:
        raise ValueError(f"unknown operator {op!r}")
    return True


def mutate(data: bytes, rng: random.Random, max_len: int = 1024, ops_out: list[str] | None = None) -> bytes:
    """Apply a stack of 1-8 randomly chosen operators to a copy of ``data``.

    Operators that do not fit the current buffer (deleting from a one-byte
    input, growing past ``max_len``) are re-rolled.  Chosen operator names
    are appended to ``ops_out`` when given.
    """
    buf = bytearray(data) if data else bytearray(b"\x00")
    for _ in range(1 + rng.randrange(MAX_STACK)):
        while True:
            op = OPERATORS[rng.randrange(len(OPERATORS))]
            if _apply(op, buf, rng, max_len):
                break
        if ops_out is not None:
            ops_out.append(op)
    return bytes(buf)
