"""
Carregamento dos arquivos de cenário (config/*.json)

Os arquivos são validados pelo schema ScenarioConfig; qualquer erro de
leitura ou de validação vira ConfigurationError com o caminho do campo.
"""

import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import List, Union

from pydantic import ValidationError

from schemas import ScenarioConfig
from utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


def _field_path(loc) -> str:
    return ".".join(str(part) for part in loc)


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """
    Lê e valida um arquivo de cenário

    Args:
        path: Caminho do JSON

    Returns:
        ScenarioConfig validado

    Raises:
        ConfigurationError: Arquivo ausente, JSON inválido ou campo fora do schema
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"Arquivo de cenário não encontrado: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Erro ao decodificar JSON em {path}: {e}")

    try:
        config = ScenarioConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigurationError(
            f"Cenário inválido em {path}: {first['msg']}", field_path=_field_path(first["loc"])
        )
    logger.debug("Cenário '%s' (%s) carregado de %s", config.name, config.kind, path)
    return config


def available_scenarios() -> List[str]:
    """Nomes dos cenários embarcados em config/"""
    return sorted(p.stem for p in CONFIG_DIR.glob("*.json"))


# Um cenário embarcado é lido uma única vez por processo
@lru_cache(maxsize=None)
def get_default_scenario(kind: str) -> ScenarioConfig:
    """
    Retorna o cenário embarcado `config/<kind>.json`

    Raises:
        ConfigurationError: Se o cenário não existir
    """
    path = CONFIG_DIR / f"{kind}.json"
    if not path.exists():
        raise ConfigurationError(
            f"Cenário '{kind}' não encontrado. Disponíveis: {', '.join(available_scenarios())}"
        )
    return load_scenario(path)
