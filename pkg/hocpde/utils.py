# hocpde/utils.py
import io
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Tuple

import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


def records_frame(records: Iterable[Any]) -> pd.DataFrame:
    """DataFrame from pydantic records or plain dicts."""
    rows = [r.model_dump() if isinstance(r, BaseModel) else dict(r) for r in records]
    return pd.DataFrame(rows)


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def emit_csv(frame: pd.DataFrame, metadata: Mapping[str, Any] = (), timestamp: bool = True) -> str:
    """CSV text with `# key: value` header lines and 12 significant digits."""
    lines = []
    if timestamp:
        lines.append(f"# generated: {datetime.now(timezone.utc).isoformat(timespec='seconds')}")
    for key, value in dict(metadata).items():
        lines.append(f"# {key}: {_format_value(value)}")
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return "\n".join(lines + [body]) if lines else body


def parse_csv(text: str) -> Tuple[pd.DataFrame, Dict[str, str]]:
    metadata: Dict[str, str] = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, _, value = line[1:].partition(":")
        metadata[key.strip()] = value.strip()
    frame = pd.read_csv(io.StringIO(text), comment="#")
    return frame, metadata


def write_csv(path: Path, frame: pd.DataFrame, metadata: Mapping[str, Any] = (), timestamp: bool = True) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(emit_csv(frame, metadata, timestamp))
    except OSError as e:
        logger.error(f"Could not write {path}: {e}")
        raise OSError(f"could not write {path}: {e.strerror or e}") from e
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def read_csv(path: Path) -> Tuple[pd.DataFrame, Dict[str, str]]:
    return parse_csv(Path(path).read_text())
