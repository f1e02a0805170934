"""Studies that exercise the particle system against the FKPP limit."""
from .config import ConfigError, RunConfig, from_mapping, parse_config, preset
from .studies import STUDIES, StudyResult

__all__ = ["ConfigError", "RunConfig", "from_mapping", "parse_config", "preset", "STUDIES", "StudyResult"]
