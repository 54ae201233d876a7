"""Output plumbing: CSV tables, run manifests, SVG figures.

CSV cells use round-trip ``repr`` formatting so a re-run can be compared
byte for byte; nothing here depends on locale or wall-clock time except
the manifest's recorded duration.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from spinbayes.errors import ConfigError

__all__ = ["RunManifest", "format_cell", "write_csv", "save_figure"]


def format_cell(value: Any) -> str:
    """Exact decimal text for one CSV cell."""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int,)):
        return str(value)
    return repr(float(value))


def write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row width does not match header")
        lines.append(",".join(format_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def save_figure(fig, path: Path) -> None:
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one invocation's outputs."""

    subcommand: str
    config: dict[str, Any]
    seed: int
    version: str
    outputs: tuple[str, ...]
    duration_s: float

    def write(self, path: Path) -> None:
        payload = dataclasses.asdict(self)
        payload["outputs"] = list(self.outputs)
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from exc
        try:
            return cls(
                subcommand=payload["subcommand"],
                config=payload["config"],
                seed=payload["seed"],
                version=payload["version"],
                outputs=tuple(payload["outputs"]),
                duration_s=payload["duration_s"],
            )
        except KeyError as exc:
            raise ConfigError(f"manifest {path} is missing {exc}") from exc
