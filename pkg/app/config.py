import json
import logging
from typing import Any, Dict, Optional

from pydantic import ValidationError

from .errors import ConfigParseError, ConfigValidationError
from .models.run import Experiment, RunConfig

logger = logging.getLogger(__name__)


def _key_path(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def validate_config(data: Any) -> RunConfig:
    """
    Validate a decoded config document.

    Raises:
        ConfigValidationError: bad or unknown values; `key_path` names the first offending key.
    """
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        errors = e.errors()
        first = errors[0]
        message = first["msg"]
        if len(errors) > 1:
            message += f" (and {len(errors) - 1} more)"
        raise ConfigValidationError(_key_path(first["loc"]), message) from e
    if config.experiment is Experiment.SWEEP and config.sweep is None:
        raise ConfigValidationError("sweep", "a sweep section is required for the sweep experiment")
    if config.experiment is not Experiment.SWEEP and config.sweep is not None:
        logger.warning(f"Ignoring the sweep section for experiment {config.experiment.value}")
    return config


def parse_config(text: str, experiment: Optional[str] = None) -> RunConfig:
    """
    Parse a JSON run configuration, optionally overriding its experiment.

    Raises:
        ConfigParseError: the text is not a JSON object.
        ConfigValidationError: see `validate_config`.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigParseError("config must be a JSON object")
    if experiment is not None:
        data["experiment"] = experiment
    return validate_config(data)


def config_echo(config: RunConfig) -> Dict[str, Any]:
    """The resolved config, defaults included, as written next to every result."""
    return config.model_dump(mode="json", by_alias=True)
