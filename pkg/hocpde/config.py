from pydantic_settings import BaseSettings
from pathlib import Path
from typing import Any, Dict, Iterable, Optional
import logging

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    log_level: str = "INFO"
    output_dir: Path = Path("results")
    timestamp: bool = True

    solver_tolerance: float = 1e-10
    solver_max_outer: int = 100
    solver_relaxation: float = 1.0
    solver_inner: str = "krylov"

    class Config:
        env_file = ".env"
        env_prefix = "HOCPDE_"
        extra = "ignore"


settings = Settings()


def _coerce(raw: str) -> Any:
    """Turn a config value into a list when it carries commas; leave scalars as text for pydantic."""
    value = raw.strip()
    if "," in value:
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _assign(tree: Dict[str, Any], dotted_key: str, value: Any) -> None:
    parts = dotted_key.split(".")
    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            # `mapping = log-polar` followed by `mapping.scale = 1` keeps the scalar under `kind`
            child = {"kind": child}
            node[part] = child
        node = child
    leaf = parts[-1]
    if isinstance(node.get(leaf), dict):
        node[leaf]["kind"] = value
    else:
        node[leaf] = value


def parse_assignments(lines: Iterable[str], source: str = "<overrides>") -> Dict[str, Any]:
    """Parse flat `key = value` lines with dotted sections into a nested dict."""
    tree: Dict[str, Any] = {}
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = text.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigurationError(f"{source}:{lineno}: empty key")
        _assign(tree, key, _coerce(raw))
    return tree


def merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        elif isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], "kind": value}
        else:
            merged[key] = value
    return merged


def load_config_file(path: Optional[Path], overrides: Iterable[str] = ()) -> Dict[str, Any]:
    """Read a run config file (if any) and apply `key=value` overrides on top of it."""
    tree: Dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except FileNotFoundError as e:
            raise ConfigurationError(f"Config file not found: {path}") from e
        tree = parse_assignments(text.splitlines(), source=str(path))
        logger.info(f"Loaded run config from {path}")
    if overrides:
        tree = merge(tree, parse_assignments(overrides))
    return tree
