"""JSON-lines results archives.

Layout: one ``meta`` line (resolved config, tool version, timestamp), one
``round`` line per round, and a closing ``end`` line that says whether the
run finished. Floats go through ``repr`` so they read back bit-exact.
Wall-clock times are not archived; they would break byte-identical reruns.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone

from . import __version__
from .aggregation import AlphaRecord
from .config import config_fingerprint, config_from_dict, config_to_dict
from .exceptions import ConfigurationError
from .orchestrator import ExperimentConfig, RoundRecord


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the header for reproducible archives
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return now.isoformat(timespec="seconds")


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def round_to_dict(record: RoundRecord) -> dict:
    return {
        "record": "round",
        "round": record.round,
        "aggregated": record.aggregated,
        "mean_accuracy": record.mean_accuracy,
        "edge_accuracies": list(record.edge_accuracies),
        "alphas": [
            {"edge_id": a.edge_id, "acc_edge": a.acc_edge, "acc_cloud": a.acc_cloud,
             "alpha": a.alpha, "forced": a.forced}
            for a in record.alphas
        ],
    }


def round_from_dict(doc: dict) -> RoundRecord:
    alphas = tuple(
        AlphaRecord(a["edge_id"], a["acc_edge"], a["acc_cloud"], a["alpha"], doc["round"], a["forced"])
        for a in doc["alphas"]
    )
    return RoundRecord(doc["round"], tuple(doc["edge_accuracies"]), alphas, doc["aggregated"])


class ArchiveWriter:
    """Append-as-you-go writer; use as a context manager."""

    def __init__(self, path, config: ExperimentConfig):
        self.path = path
        self.config = config
        self.rounds = 0
        self._fh = None

    def __enter__(self):
        parent = os.path.dirname(os.fspath(self.path))
        if parent:
            os.makedirs(parent, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self._write({
            "record": "meta",
            "tool": "phefl",
            "tool_version": __version__,
            "created": _timestamp(),
            "config_fingerprint": config_fingerprint(self.config),
            "config": config_to_dict(self.config),
        })
        return self

    def _write(self, obj):
        self._fh.write(_dumps(obj) + "\n")
        self._fh.flush()

    def append(self, record: RoundRecord):
        self._write(round_to_dict(record))
        self.rounds += 1

    def __exit__(self, exc_type, exc, tb):
        end = {"record": "end", "complete": exc_type is None, "rounds": self.rounds}
        if exc_type is not None:
            end["error"] = f"{exc_type.__name__}: {exc}"
        self._write(end)
        self._fh.close()
        return False


@dataclass
class Archive:
    meta: dict
    config: ExperimentConfig
    log: list
    complete: bool

    @property
    def label(self) -> str:
        c = self.config
        name = c.strategy.value
        if c.forced_alpha is not None:
            name += f"(alpha={c.forced_alpha:g})"
        return name

    @property
    def series(self) -> list[float]:
        return [r.mean_accuracy for r in self.log]


def read_archive(path) -> Archive:
    meta, log, complete = None, [], False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            doc = json.loads(line)
            kind = doc.get("record")
            if kind == "meta":
                meta = doc
            elif kind == "round":
                log.append(round_from_dict(doc))
            elif kind == "end":
                complete = bool(doc.get("complete"))
            else:
                raise ConfigurationError(f"{path}:{lineno}: unknown record type {kind!r}")
    if meta is None:
        raise ConfigurationError(f"{path}: missing meta record")
    return Archive(meta, config_from_dict(meta["config"]), log, complete)
