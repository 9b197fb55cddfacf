"""Engine configuration: one declarative JSON file, every key flag-overridable."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

from .augment import FakeChunkTable
from .backend import BackendClient, HttpTransport, InProcessMockTransport, SubprocessTransport
from .errors import ConfigError
from .labels import LabelSet, load_label_set
from .pipeline import MergePolicy, MergeStrategy
from .rules import DEFAULT_EN_RULES, CompiledRule, compile_rules, load_rule_file

ENV_CONFIG = "DEID_CONFIG"


@dataclass
class EngineConfig:
    language: str = "en"
    label_set: str = "en"
    rule_files: tuple[str, ...] = ()
    backend_transport: str = "none"  # none | mock | http | subprocess
    backend_endpoint: str = ""  # URL (http) or command line (subprocess)
    backend_timeout: float = 30.0
    backend_retries: int = 2
    merge_policy: str = "rule_priority"
    mode: str = "mask"  # mask | obfuscate
    mask_format: str = "[{label}]"
    seed: int | None = None
    fake_chunk_table: str | None = None
    date_order: str = "mdy"
    age_over_89_policy: str = "none"
    write_surrogate_map: bool = False
    jobs: int = 1
    fail_fast: bool = False

    def validate(self) -> None:
        if self.mode not in ("mask", "obfuscate"):
            raise ConfigError(f"mode must be mask or obfuscate, not {self.mode!r}")
        if self.mode == "obfuscate" and self.seed is None:
            raise ConfigError("obfuscate mode requires a seed")
        if self.backend_transport not in ("none", "mock", "http", "subprocess"):
            raise ConfigError(f"unknown backend transport {self.backend_transport!r}")
        if self.backend_transport in ("http", "subprocess") and not self.backend_endpoint:
            raise ConfigError(f"{self.backend_transport} transport requires an endpoint")
        if self.merge_policy not in [s.value for s in MergeStrategy]:
            raise ConfigError(f"unknown merge policy {self.merge_policy!r}")
        if self.date_order not in ("mdy", "dmy"):
            raise ConfigError(f"date_order must be mdy or dmy, not {self.date_order!r}")
        for path in self.rule_files:
            if not os.path.exists(path):
                raise ConfigError(f"rule file does not exist: {path}")
        if self.fake_chunk_table and not os.path.exists(self.fake_chunk_table):
            raise ConfigError(f"fake chunk table does not exist: {self.fake_chunk_table}")

    # Materialized views of the declarative fields.

    def load_labels(self) -> LabelSet:
        return load_label_set(self.label_set)

    def load_rules(self, labels: LabelSet) -> tuple[CompiledRule, ...]:
        if self.rule_files:
            rules = [rule for path in self.rule_files for rule in load_rule_file(path)]
        elif self.language == "en" and self.label_set == "en":
            rules = list(DEFAULT_EN_RULES)
        else:
            rules = []
        return compile_rules(rules, labels)

    def load_table(self) -> FakeChunkTable | None:
        return FakeChunkTable.from_file(self.fake_chunk_table) if self.fake_chunk_table else None

    def build_backend(self, labels: LabelSet) -> BackendClient | None:
        if self.backend_transport == "none":
            return None
        if self.backend_transport == "mock":
            transport = InProcessMockTransport(labels)
        elif self.backend_transport == "http":
            transport = HttpTransport(self.backend_endpoint, self.backend_timeout)
        else:
            transport = SubprocessTransport(
                self.backend_endpoint.split(), self.backend_timeout
            )
        return BackendClient(transport, labels, retries=self.backend_retries)

    def merge(self) -> MergePolicy:
        return MergePolicy(MergeStrategy(self.merge_policy))


_FLAT_KEYS = {f.name for f in dataclasses.fields(EngineConfig)}

# Nested config-file spellings accepted alongside the flat field names.
_NESTED = {
    "backend": {
        "transport": "backend_transport",
        "endpoint": "backend_endpoint",
        "timeout": "backend_timeout",
        "retries": "backend_retries",
    },
}


def _flatten(payload: dict) -> dict:
    flat: dict = {}
    for key, value in payload.items():
        if key in _NESTED and isinstance(value, dict):
            for inner_key, inner_value in value.items():
                target = _NESTED[key].get(inner_key)
                if target is None:
                    raise ConfigError(f"unknown config key {key}.{inner_key}")
                flat[target] = inner_value
        elif key in _FLAT_KEYS:
            flat[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return flat


def load_config(path: str | None = None, overrides: dict | None = None) -> EngineConfig:
    """Load config from ``path`` (or $DEID_CONFIG), then apply flag overrides.

    Flags win over the file; the file wins over defaults.
    """
    payload: dict = {}
    path = path or os.environ.get(ENV_CONFIG)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError("config file must hold a JSON object")
    merged = _flatten(payload)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    if "rule_files" in merged:
        merged["rule_files"] = tuple(merged["rule_files"])
    config = EngineConfig(**merged)
    config.validate()
    return config
