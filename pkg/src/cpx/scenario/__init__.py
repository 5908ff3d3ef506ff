from .config import DEFAULT_CONFIG, EcosystemConfig, EntityConfig
from .ecosystem import Ecosystem, setup_ecosystem

__all__ = ["DEFAULT_CONFIG", "Ecosystem", "EcosystemConfig", "EntityConfig", "setup_ecosystem"]
