"""Hash-linked ledger: transactions, blocks, Merkle commitments and chain checks.

All hashing is SHA-256. Serialization is canonical: unsigned integers are
8-byte big-endian, floats are 8-byte big-endian IEEE-754, and byte/string
fields carry a 4-byte big-endian length prefix.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Iterable

HASH_LEN = 32
ZERO_HASH = bytes(HASH_LEN)


class LedgerError(Exception):
    """Base class for blocks rejected by append_block."""


class IndexMismatch(LedgerError):
    pass


class PrevHashMismatch(LedgerError):
    pass


class MerkleMismatch(LedgerError):
    pass


class HashMismatch(LedgerError):
    pass


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _u64(n: int) -> bytes:
    return struct.pack(">Q", n)


def _f64(x: float) -> bytes:
    return struct.pack(">d", x)


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


@dataclass(frozen=True)
class Transaction:
    tx_id: str
    origin_head: str
    size_bytes: int
    created_at: float
    payload_digest: bytes = ZERO_HASH

    def __post_init__(self):
        if self.size_bytes <= 0:
            raise ValueError(f"size_bytes must be > 0, got {self.size_bytes}")
        if self.created_at < 0:
            raise ValueError(f"created_at must be >= 0, got {self.created_at}")

    def to_bytes(self) -> bytes:
        return (
            _lp(self.tx_id.encode())
            + _lp(self.origin_head.encode())
            + _u64(self.size_bytes)
            + _f64(self.created_at)
            + _lp(self.payload_digest)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transaction":
        """Inverse of to_bytes. Raises ValueError on malformed input."""
        pos = 0

        def take(n: int) -> bytes:
            nonlocal pos
            if pos + n > len(data):
                raise ValueError("truncated transaction encoding")
            chunk = data[pos:pos + n]
            pos += n
            return chunk

        def take_lp() -> bytes:
            (n,) = struct.unpack(">I", take(4))
            return take(n)

        try:
            tx_id = take_lp().decode()
            origin = take_lp().decode()
        except UnicodeDecodeError as exc:
            raise ValueError(str(exc)) from exc
        (size,) = struct.unpack(">Q", take(8))
        (created,) = struct.unpack(">d", take(8))
        digest = take_lp()
        if pos != len(data):
            raise ValueError("trailing bytes after transaction encoding")
        return cls(tx_id, origin, size, created, digest)

    def leaf_hash(self) -> bytes:
        return sha256(self.to_bytes())


def merkle_root(leaf_hashes: Iterable[bytes]) -> bytes:
    """Binary Merkle root; odd layers duplicate their last node.

    A single leaf is its own root and an empty list hashes the empty string.
    """
    layer = list(leaf_hashes)
    if not layer:
        return sha256(b"")
    while len(layer) > 1:
        if len(layer) % 2:
            layer.append(layer[-1])
        layer = [sha256(layer[i] + layer[i + 1]) for i in range(0, len(layer), 2)]
    return layer[0]


def tx_merkle_root(transactions: Iterable[Transaction]) -> bytes:
    return merkle_root(tx.leaf_hash() for tx in transactions)


def header_bytes(index: int, timestamp: float, merkle: bytes, prev_hash: bytes,
                 proposer: str) -> bytes:
    return (
        _u64(index)
        + _f64(timestamp)
        + _lp(merkle)
        + _lp(prev_hash)
        + _lp(proposer.encode())
    )


def hash_block(index: int, timestamp: float, merkle: bytes, prev_hash: bytes,
               proposer: str) -> bytes:
    return sha256(header_bytes(index, timestamp, merkle, prev_hash, proposer))


@dataclass(frozen=True)
class Block:
    index: int
    timestamp: float
    merkle_root: bytes
    transactions: tuple[Transaction, ...]
    prev_hash: bytes
    block_hash: bytes
    proposer: str

    @classmethod
    def build(cls, index: int, timestamp: float, transactions: Iterable[Transaction],
              prev_hash: bytes, proposer: str) -> "Block":
        txs = tuple(transactions)
        root = tx_merkle_root(txs)
        digest = hash_block(index, timestamp, root, prev_hash, proposer)
        return cls(index, timestamp, root, txs, prev_hash, digest, proposer)

    def header_hash(self) -> bytes:
        return hash_block(self.index, self.timestamp, self.merkle_root,
                          self.prev_hash, self.proposer)

    @property
    def total_bytes(self) -> int:
        return sum(tx.size_bytes for tx in self.transactions)


def genesis_block(timestamp: float = 0.0, proposer: str = "genesis") -> Block:
    return Block.build(0, timestamp, (), ZERO_HASH, proposer)


@dataclass
class Chain:
    blocks: list[Block] = field(default_factory=lambda: [genesis_block()])

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    def __len__(self) -> int:
        return len(self.blocks)

    def copy(self) -> "Chain":
        return Chain(list(self.blocks))

    def tx_ids(self) -> set[str]:
        return {tx.tx_id for b in self.blocks for tx in b.transactions}


def check_next(tip: Block, block: Block) -> None:
    """Raise the matching LedgerError if `block` cannot follow `tip`."""
    if block.index != tip.index + 1:
        raise IndexMismatch(f"expected index {tip.index + 1}, got {block.index}")
    if block.prev_hash != tip.block_hash:
        raise PrevHashMismatch(f"block {block.index} does not link to tip")
    if tx_merkle_root(block.transactions) != block.merkle_root:
        raise MerkleMismatch(f"block {block.index} merkle root does not match its transactions")
    if block.header_hash() != block.block_hash:
        raise HashMismatch(f"block {block.index} header hash mismatch")


def append_block(chain: Chain, block: Block) -> Chain:
    """Append in place after checking the link rules; returns the same chain."""
    check_next(chain.tip, block)
    chain.blocks.append(block)
    return chain


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    index: int | None = None
    reason: str = ""


def validate_chain(chain: Chain) -> ValidationReport:
    if not chain.blocks:
        return ValidationReport(False, None, "empty chain")
    g = chain.blocks[0]
    if g.index != 0:
        return ValidationReport(False, 0, "genesis index is not 0")
    if tx_merkle_root(g.transactions) != g.merkle_root:
        return ValidationReport(False, 0, "merkle root mismatch")
    if g.header_hash() != g.block_hash:
        return ValidationReport(False, 0, "block hash mismatch")
    seen: set[str] = {tx.tx_id for tx in g.transactions}
    for prev, blk in zip(chain.blocks, chain.blocks[1:]):
        i = blk.index if isinstance(blk.index, int) else None
        if blk.index != prev.index + 1:
            return ValidationReport(False, prev.index + 1, "index mismatch")
        if blk.prev_hash != prev.block_hash:
            return ValidationReport(False, i, "prev_hash mismatch")
        if tx_merkle_root(blk.transactions) != blk.merkle_root:
            return ValidationReport(False, i, "merkle root mismatch")
        if blk.header_hash() != blk.block_hash:
            return ValidationReport(False, i, "block hash mismatch")
        if blk.timestamp < prev.timestamp:
            return ValidationReport(False, i, "timestamp decreases")
        for tx in blk.transactions:
            if tx.tx_id in seen:
                return ValidationReport(False, i, f"duplicate tx {tx.tx_id}")
            seen.add(tx.tx_id)
    return ValidationReport(True)


def export_chain(chain: Chain) -> str:
    """One JSON record per block, fixed field order."""
    lines = []
    for b in chain.blocks:
        rec = {
            "index": b.index,
            "timestamp": b.timestamp,
            "proposer": b.proposer,
            "prev_hash": b.prev_hash.hex(),
            "block_hash": b.block_hash.hex(),
            "tx_count": len(b.transactions),
            "total_bytes": b.total_bytes,
        }
        lines.append(json.dumps(rec))
    return "\n".join(lines) + "\n"
