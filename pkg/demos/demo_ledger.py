#!/usr/bin/env python3
"""Walk through the ledger layer: mining, tamper evidence, fork choice.

Run from the repository root:  python demos/demo_ledger.py
"""

from compacts.ledger import (
    Block,
    Chain,
    Event,
    genesis_chain,
    hash_block_header,
    mine_block,
    select_active_chain,
    verify_chain,
)

TARGET = 1 << 248  # one hash in 256 qualifies; mining takes a moment
ROSTER = {"ann": "ann-secret", "ben": "ben-secret"}


def signed(event_id, event_type, attributes, emitter):
    event = Event.make(event_id, event_type, attributes, emitter)
    return event.with_signature(ROSTER[emitter])


def main():
    print("== mining three blocks ==")
    chain = genesis_chain()
    batches = [
        (signed("e1", "Reading", {"sensor": "s1", "value": 17}, "ann"),),
        (signed("e2", "Reading", {"sensor": "s1", "value": 18}, "ben"),),
        (signed("e3", "Reading", {"sensor": "s2", "value": 3}, "ann"),),
    ]
    for events in batches:
        header = mine_block(events, chain.tip.header, TARGET, miner="ann")
        print(f"  block {header.index}: nonce={header.nonce} "
              f"hash={hash_block_header(header).hex()[:16]}...")
        chain = chain.extend(Block(header=header, events=events))
    print("  verify:", verify_chain(chain, target=TARGET, roster=ROSTER) or "ok")

    print("\n== tampering with one attribute ==")
    victim = chain.blocks[2]
    forged_event = Event.make("e2", "Reading", {"sensor": "s1", "value": 9999},
                              "ben", 0, victim.events[0].signature)
    forged = Chain(blocks=(
        chain.blocks[0], chain.blocks[1],
        Block(header=victim.header, events=(forged_event,)),
        chain.blocks[3],
    ))
    bad = verify_chain(forged, target=TARGET, roster=ROSTER)
    print(f"  verify now fails at block {bad.index}: {bad.rejection}")

    print("\n== fork choice ==")
    fork_header = mine_block(batches[2], chain.blocks[1].header, TARGET, miner="ben")
    short_fork = Chain(blocks=chain.blocks[:2] + (Block(fork_header, batches[2]),))
    winner = select_active_chain([short_fork, chain])
    print(f"  longest of {len(short_fork.blocks)} vs {len(chain.blocks)} blocks wins:",
          "original" if winner is chain else "fork")
    rival_header = mine_block(batches[1], chain.blocks[1].header, TARGET, miner="ben")
    rival = Chain(blocks=chain.blocks[:2] + (Block(rival_header, batches[1]),))
    same_len = select_active_chain([short_fork, rival])
    print("  equal lengths tie-break to smaller tip digest:",
          same_len.tip_digest().hex()[:16] + "...")


if __name__ == "__main__":
    main()
