"""Ecosystem configuration: trust anchors, their roles and the schemas they issue."""

from __future__ import annotations

from dataclasses import dataclass

from ..agents import ROLES
from ..errors import ConfigInvalid, ValidationError
from ..registry import CredentialSchema

MEDICAL_SCHOOL = "Medical School"
GMC = "General Medical Council"
RCPE = "Royal College of Edinburgh"
EDINBURGH = "Edinburgh Hospital"
GLASGOW = "Glasgow Hospital"
HES = "Health Education Scotland"


@dataclass(frozen=True)
class EntityConfig:
    name: str
    roles: tuple[str, ...]
    schemas: tuple[CredentialSchema, ...] = ()

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "roles": list(self.roles),
            "schemas": [
                {"schema_id": s.schema_id, "attributes": list(s.attribute_names)} for s in self.schemas
            ],
        }


@dataclass(frozen=True)
class EcosystemConfig:
    entities: tuple[EntityConfig, ...]
    holder: str = "Doctor"

    def entity(self, name: str) -> EntityConfig:
        for e in self.entities:
            if e.name == name:
                return e
        raise KeyError(name)

    def schema_issuer(self, schema_id: str) -> str:
        for e in self.entities:
            if any(s.schema_id == schema_id for s in e.schemas):
                return e.name
        raise KeyError(schema_id)

    def validate(self) -> "EcosystemConfig":
        names = [e.name for e in self.entities]
        if not names:
            raise ConfigInvalid("no entities configured")
        if len(set(names)) != len(names):
            raise ConfigInvalid("duplicate entity name")
        if self.holder in names:
            raise ConfigInvalid(f"holder {self.holder!r} collides with an entity name")
        issuers: dict[str, str] = {}
        for e in self.entities:
            bad = set(e.roles) - set(ROLES)
            if bad:
                raise ConfigInvalid(f"{e.name}: unknown roles {sorted(bad)}")
            if e.schemas and "Issuer" not in e.roles:
                raise ConfigInvalid(f"{e.name} lists schemas but is not an Issuer")
            for s in e.schemas:
                if s.schema_id in issuers:
                    raise ConfigInvalid(
                        f"schema {s.schema_id} issued by both {issuers[s.schema_id]} and {e.name}"
                    )
                issuers[s.schema_id] = e.name
        return self

    def to_json(self) -> dict:
        return {"entities": [e.to_json() for e in self.entities], "holder": self.holder}

    @classmethod
    def from_json(cls, data: dict) -> "EcosystemConfig":
        try:
            entities = tuple(
                EntityConfig(
                    name=e["name"],
                    roles=tuple(e.get("roles", ())),
                    schemas=tuple(
                        CredentialSchema(s["schema_id"], tuple(s["attributes"]))
                        for s in e.get("schemas", ())
                    ),
                )
                for e in data["entities"]
            )
        except (KeyError, TypeError, ValidationError) as exc:
            raise ConfigInvalid(f"malformed ecosystem config: {exc}") from None
        return cls(entities, data.get("holder", "Doctor")).validate()


def _schema(schema_id: str, *attrs: str) -> CredentialSchema:
    return CredentialSchema(schema_id, attrs)


DEFAULT_CONFIG = EcosystemConfig(
    entities=(
        EntityConfig(
            MEDICAL_SCHOOL,
            ("Issuer",),
            (_schema("medical_degree:1", "full_name", "date_of_birth", "degree", "university", "graduation_date"),),
        ),
        EntityConfig(
            GMC,
            ("Issuer", "Verifier"),
            (
                _schema("gmc_license:1", "full_name", "gmc_number", "license_status"),
                _schema("good_standing:1", "full_name", "gmc_number", "destination", "issued_on"),
            ),
        ),
        EntityConfig(
            RCPE,
            ("Issuer", "Verifier"),
            (
                _schema("rcpe_accreditation:1", "full_name", "gmc_number", "programme", "accredited_on"),
                _schema("qualified_physician:1", "full_name", "gmc_number", "specialty", "qualified_on"),
            ),
        ),
        EntityConfig(
            EDINBURGH,
            ("Issuer", "Verifier"),
            (
                _schema("identity_verification:1", "full_name", "date_of_birth", "check_level", "verified_on"),
                _schema("employment:1", "full_name", "employer", "post", "start_date"),
            ),
        ),
        EntityConfig(
            GLASGOW,
            ("Issuer", "Verifier"),
            (_schema("placement:1", "full_name", "hospital", "post", "start_date"),),
        ),
        EntityConfig(
            HES,
            ("Issuer", "Verifier"),
            (_schema("training_record:1", "full_name", "gmc_number", "course", "completed_on"),),
        ),
    ),
    holder="Doctor",
).validate()
