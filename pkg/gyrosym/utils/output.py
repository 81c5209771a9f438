"""CSV tables and YAML/text reports."""
import os
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd
import yaml

from gyrosym import config

PathLike = Union[str, Path]


def save_table(df: pd.DataFrame, filepath: PathLike) -> str:
    """
    Save a table to CSV with bit-stable number formatting.

    17 significant digits, '.' decimal separator and LF line endings, no index.

    Returns:
        Path of the written file
    """
    filepath = str(filepath)
    directory = os.path.dirname(filepath)
    if directory:
        os.makedirs(directory, exist_ok=True)
    df.to_csv(filepath, index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator="\n")
    return filepath


def potential_table(result) -> pd.DataFrame:
    """Tabulate F and f of a decomposition at the mesh nodes."""
    theta, phi = np.meshgrid(result.grid["theta"], result.grid["phi"], indexing="ij")
    return pd.DataFrame({
        "theta": theta.ravel(),
        "phi": phi.ravel(),
        "a1": (np.sin(theta) * np.cos(phi)).ravel(),
        "a2": (np.sin(theta) * np.sin(phi)).ravel(),
        "a3": np.cos(theta).ravel(),
        "F": np.asarray(result.grid["F"]).ravel(),
        "f": np.asarray(result.grid["f"]).ravel(),
    })


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    return value


def report_yaml(report: Dict[str, Any]) -> str:
    """Machine-readable report."""
    return yaml.safe_dump(_plain(report), sort_keys=False, default_flow_style=False)


def save_report(report: Dict[str, Any], filepath: PathLike) -> str:
    filepath = str(filepath)
    directory = os.path.dirname(filepath)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(filepath, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(report_yaml(report))
    return filepath


def format_report(title: str, report: Dict[str, Any]) -> str:
    """Human-readable report: a banner followed by indented key/value lines."""
    lines = ["=" * 70, title, "=" * 70]

    def walk(data, indent):
        for key, value in data.items():
            if isinstance(value, dict):
                lines.append(f"{' ' * indent}{key}:")
                walk(value, indent + 2)
            elif isinstance(value, float):
                lines.append(f"{' ' * indent}{key}: {value:.6e}")
            else:
                lines.append(f"{' ' * indent}{key}: {value}")

    walk(_plain(report), 2)
    return "\n".join(lines)
