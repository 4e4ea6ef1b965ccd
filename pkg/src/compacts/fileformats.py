"""External file formats: chain snapshots, scenarios, network configs, reports.

Chain snapshot: JSON {"blocks": [{"header": {...}, "events": [...]}]} with
digests as lowercase hex. Scenario: JSON Lines, one submission per line.
Network config: JSON with the NetworkConfig fields (target as hex) plus an
optional "roles" map for the organizational context. Evaluation report: one
JSON document with chain tip, instance table, derived facts and trust rows in
stable order; docs/report-schema.json is the schema it validates against.
"""

from __future__ import annotations

import json
from typing import Optional

from .evaluator import EvalState, NormInstance
from .governance import Organization
from .ledger import Block, BlockHeader, Chain, Event, Position
from .matching import Bindings, DerivedFact
from .network import NetworkConfig, NetworkResult, Submission
from .trust import TrustScore


class DataFormatError(Exception):
    """A file failed to parse against its documented format."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DataFormatError(message)


# --- chain snapshots ------------------------------------------------------


def event_to_json(event: Event) -> dict:
    return {
        "event_id": event.event_id,
        "event_type": event.event_type,
        "attributes": dict(event.attributes),
        "emitter": event.emitter,
        "logical_ts": event.logical_ts,
        "signature": event.signature.hex(),
    }


def event_from_json(data: dict) -> Event:
    try:
        return Event.make(
            event_id=data["event_id"],
            event_type=data["event_type"],
            attributes=data["attributes"],
            emitter=data["emitter"],
            logical_ts=data["logical_ts"],
            signature=bytes.fromhex(data["signature"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"bad event record: {exc}") from exc


def chain_to_json(chain: Chain) -> dict:
    return {
        "blocks": [
            {
                "header": {
                    "index": block.header.index,
                    "prev_hash": block.header.prev_hash.hex(),
                    "events_digest": block.header.events_digest.hex(),
                    "miner": block.header.miner,
                    "nonce": block.header.nonce,
                },
                "events": [event_to_json(e) for e in block.events],
            }
            for block in chain.blocks
        ]
    }


def chain_from_json(data: dict) -> Chain:
    _require(isinstance(data, dict) and "blocks" in data, "chain snapshot needs a blocks array")
    blocks = []
    for item in data["blocks"]:
        try:
            header = BlockHeader(
                index=item["header"]["index"],
                prev_hash=bytes.fromhex(item["header"]["prev_hash"]),
                events_digest=bytes.fromhex(item["header"]["events_digest"]),
                miner=item["header"]["miner"],
                nonce=item["header"]["nonce"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"bad block header: {exc}") from exc
        events = tuple(event_from_json(e) for e in item.get("events", ()))
        blocks.append(Block(header=header, events=events))
    _require(bool(blocks), "chain snapshot has no blocks")
    return Chain(blocks=tuple(blocks))


def write_chain(chain: Chain, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(chain_to_json(chain), handle, indent=2)
        handle.write("\n")


def read_chain(path: str) -> Chain:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"chain snapshot is not valid JSON: {exc}") from exc
    return chain_from_json(data)


# --- scenarios --------------------------------------------------------------


def read_scenario(path: str) -> list[Submission]:
    submissions = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            try:
                submissions.append(
                    Submission.make(
                        round=data["round"],
                        event_type=data["event_type"],
                        attributes=data.get("attributes", {}),
                        emitter=data["emitter"],
                        logical_ts=data.get("logical_ts", data["round"]),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad submission: {exc}") from exc
    return submissions


# --- network config ---------------------------------------------------------


def read_network_config(path: str) -> tuple[NetworkConfig, dict[str, list[str]]]:
    """Returns the config plus the optional per-principal role map."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"network config is not valid JSON: {exc}") from exc
    try:
        principals = tuple((p["id"], p["secret"]) for p in data["principals"])
        config = NetworkConfig(
            principals=principals,
            peers=tuple(data["peers"]),
            target=int(data["target"], 16),
            gossip_seed=data["gossip_seed"],
            max_rounds=data["max_rounds"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"bad network config: {exc}") from exc
    roles = {pid: list(role_list) for pid, role_list in data.get("roles", {}).items()}
    return config, roles


def organization_from_roles(context: str, roles: dict[str, list[str]]) -> Organization:
    return Organization.make(context, roles)


# --- reports ----------------------------------------------------------------


def _position_json(pos: Optional[Position]) -> Optional[dict]:
    if pos is None:
        return None
    return {"block_index": pos.block_index, "offset_in_block": pos.offset_in_block}


def _bindings_json(bindings: Bindings) -> dict:
    return dict(bindings)


def instance_to_json(instance: NormInstance) -> dict:
    return {
        "norm_id": instance.norm_id,
        "bindings": _bindings_json(instance.key_bindings),
        "state": instance.state.value,
        "created_at": _position_json(instance.created_at),
        "detached_at": _position_json(instance.detached_at),
        "closed_at": _position_json(instance.closed_at),
        "violating_event": instance.violating_event,
    }


def fact_to_json(fact: DerivedFact) -> dict:
    return {
        "name": fact.name,
        "bindings": _bindings_json(fact.bindings),
        "witness": _position_json(fact.witness),
    }


def trust_to_json(score: TrustScore) -> dict:
    return {
        "principal": score.principal,
        "norm_id": score.norm_id,
        "satisfied": score.satisfied,
        "violated": score.violated,
        "score": round(score.score, 6),
    }


def build_report(
    state: EvalState,
    chain: Chain,
    trust_rows: list[TrustScore],
    network: Optional[NetworkResult] = None,
) -> dict:
    report = {
        "compact": state.spec.name,
        "chain_tip": chain.tip_digest().hex(),
        "instances": [instance_to_json(i) for i in state.instances_in_order()],
        "facts": [fact_to_json(f) for f in state.facts],
        "trust": [trust_to_json(t) for t in trust_rows],
    }
    if network is not None:
        report["network"] = {
            "converged": network.converged,
            "rounds_used": network.rounds_used,
        }
    return report


def write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2)
        handle.write("\n")


def read_report(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"report is not valid JSON: {exc}") from exc
    _require(isinstance(data, dict) and "instances" in data, "not an evaluation report")
    return data
