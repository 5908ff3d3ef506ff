"""Ecosystem setup and on-disk state for the scenario engine and CLI."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..agents import Agent, agent_rng
from ..audit import AuditLog, load_jsonl, verify_chain
from ..clock import DEFAULT_START, SimClock, parse_iso
from ..connections import Envelope, MessageBus
from ..crypto import GroupParams, profile
from ..errors import ChainBroken, ConfigInvalid
from ..registry import Registry
from .config import DEFAULT_CONFIG, EcosystemConfig

STATE_VERSION = 1


@dataclass
class Ecosystem:
    config: EcosystemConfig
    params: GroupParams
    seed: int
    clock: SimClock
    audit: AuditLog
    registry: Registry
    bus: MessageBus
    agents: dict[str, Agent] = field(default_factory=dict)

    @property
    def holder(self) -> Agent:
        return self.agents[self.config.holder]

    def agent(self, name: str) -> Agent:
        try:
            return self.agents[name]
        except KeyError:
            raise ConfigInvalid(f"entity {name!r} is not configured") from None

    def did_of(self, name: str) -> str:
        did = self.agent(name).public_did
        if did is None:
            raise ConfigInvalid(f"{name!r} has no public DID")
        return did

    def name_of(self, did: str) -> str:
        for name, agent in self.agents.items():
            if agent.public_did == did:
                return name
        return did

    @property
    def profile_name(self) -> str:
        return "TOY" if self.params.q.bit_length() < 64 else "PRODUCTION"

    def save(self, directory: str | Path) -> None:
        out = Path(directory)
        (out / "agents").mkdir(parents=True, exist_ok=True)
        meta = {
            "version": STATE_VERSION,
            "profile": self.profile_name,
            "seed": self.seed,
            "clock": self.clock.iso(),
            "config": self.config.to_json(),
            "agents": list(self.agents),
        }
        (out / "ecosystem.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
        (out / "registry.json").write_text(self.registry.export_json())
        (out / "audit.jsonl").write_text(self.audit.to_jsonl())
        (out / "messages.jsonl").write_text(self.bus.messages_jsonl())
        for i, agent in enumerate(self.agents.values()):
            path = out / "agents" / f"{i:02d}.json"
            path.write_text(json.dumps(agent.to_state(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "Ecosystem":
        src = Path(directory)
        meta = json.loads((src / "ecosystem.json").read_text())
        params = profile(meta["profile"])
        clock = SimClock(parse_iso(meta["clock"]))
        events = load_jsonl((src / "audit.jsonl").read_text())
        status = verify_chain(events)
        if not status:
            raise ChainBroken(status.first_bad_index)
        audit = AuditLog(clock, events)
        registry = Registry.import_json(params, (src / "registry.json").read_text())
        registry.audit = audit
        bus = MessageBus(params, clock)
        messages = src / "messages.jsonl"
        if messages.exists():
            for line in messages.read_text().splitlines():
                row = json.loads(line)
                bus.log.append((row["sent_at"], row["inbox"], Envelope.from_json(params, row)))
        eco = cls(
            EcosystemConfig.from_json(meta["config"]), params, meta["seed"], clock, audit, registry, bus
        )
        for i, name in enumerate(meta["agents"]):
            state = json.loads((src / "agents" / f"{i:02d}.json").read_text())
            eco.agents[name] = Agent.from_state(state, params, registry, bus, audit, clock)
        return eco


def setup_ecosystem(
    config: EcosystemConfig = DEFAULT_CONFIG,
    seed: int = 0,
    params: GroupParams | str = "PRODUCTION",
    start=DEFAULT_START,
) -> Ecosystem:
    """Create every trust anchor, publish its DID and schemas, add the holder."""
    if isinstance(params, str):
        params = profile(params)
    config.validate()
    clock = SimClock(start)
    audit = AuditLog(clock)
    registry = Registry(params, audit)
    bus = MessageBus(params, clock)
    eco = Ecosystem(config, params, seed, clock, audit, registry, bus)
    for entity in config.entities:
        agent = Agent(entity.name, entity.roles, params, registry, bus, audit, clock, agent_rng(seed, entity.name))
        agent.register_public_did()
        eco.agents[entity.name] = agent
    for entity in config.entities:
        for schema in entity.schemas:
            eco.agents[entity.name].publish_schema(schema)
    eco.agents[config.holder] = Agent(
        config.holder, ("Holder",), params, registry, bus, audit, clock, agent_rng(seed, config.holder)
    )
    return eco
