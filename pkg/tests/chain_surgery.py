"""Export tampering helpers for auditor soundness tests.

Each function edits an exported chain view the way a dishonest host or
miner could, optionally re-mining hashes so only the targeted property is
broken.
"""

from tendersim.chain import compute_block_hash
from tendersim.encoding import from_hex, to_hex


def remine(export: dict, start_height: int = 1) -> None:
    """Recompute block hashes and parent links from start_height onward."""
    blocks = export["blocks"]
    for block in blocks[start_height:]:
        block["parent_hash"] = blocks[block["height"] - 1]["block_hash"]
        tx_hashes = [from_hex(t["tx_hash"]) for t in block["transactions"]]
        block["block_hash"] = to_hex(compute_block_hash(
            block["height"], from_hex(block["parent_hash"]), block["timestamp"], tx_hashes))


def flip_payload_bit(export: dict, height: int, tx_index: int, bit: int) -> None:
    tx = export["blocks"][height]["transactions"][tx_index]
    raw = bytearray(from_hex(tx["payload"]))
    raw[bit // 8] ^= 1 << (bit % 8)
    tx["payload"] = to_hex(bytes(raw))


def flip_contract_data_bit(export: dict, address_hex: str, bit: int) -> None:
    snap = export["contracts"][address_hex]
    raw = bytearray(from_hex(snap["data"]))
    raw[bit // 8] ^= 1 << (bit % 8)
    snap["data"] = to_hex(bytes(raw))


def backdate_block(export: dict, height: int, new_timestamp: int) -> None:
    export["blocks"][height]["timestamp"] = new_timestamp
    remine(export, height)


def duplicate_publish(export: dict, rft_hex: str) -> None:
    """Append a block replaying the publish transaction, recorded as accepted."""
    publish = None
    for block in export["blocks"]:
        for tx in block["transactions"]:
            if tx["target"] == rft_hex and tx["status"] == "OK" \
                    and tx["kind"] == "publish_results":
                publish = dict(tx)
    assert publish is not None, "no publish transaction to duplicate"
    head = export["blocks"][-1]
    export["blocks"].append({
        "height": head["height"] + 1,
        "parent_hash": head["block_hash"],
        "timestamp": head["timestamp"] + 1,
        "block_hash": "0x" + "00" * 32,
        "transactions": [publish],
    })
    remine(export, len(export["blocks"]) - 1)
