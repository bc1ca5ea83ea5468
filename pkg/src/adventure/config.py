"""Service configuration: one JSON file validated at startup.

Invalid values abort with a message naming the offending field. The path comes
from --config or the ADVENTURE_CONFIG environment variable.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .assessment import RunnerConfig, RunnerSpec
from .elo import EloParams

ENV_CONFIG = "ADVENTURE_CONFIG"
ENV_LLM_TOKEN = "ADVENTURE_LLM_TOKEN"


class ConfigError(Exception):
    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"config field {field_name!r}: {message}")


@dataclass
class LlmConfig:
    kind: str = "mock_reference"  # mock_scripted | mock_reference | http
    url: Optional[str] = None
    script: list[str] = field(default_factory=list)
    max_tokens: int = 1024
    temperature: float = 0.0
    retries: int = 2
    timeout_s: float = 60.0


@dataclass
class EmbedderConfig:
    kind: str = "hash64"  # hash64 | http
    dim: int = 64
    url: Optional[str] = None


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    data_dir: Path = Path("./data")
    kg_path: Optional[Path] = None
    static_dir: Optional[Path] = None  # built web assets, served at / when set
    elo: EloParams = field(default_factory=EloParams)
    runners: RunnerConfig = field(default_factory=RunnerConfig.with_defaults)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    memory_window: int = 6
    retrieval_k: int = 5
    admin_token: str = "admin-token"

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ServiceConfig":
        cfg = cls()
        if "host" in doc:
            cfg.host = _expect_str(doc, "host")
        if "port" in doc:
            cfg.port = _expect_int(doc, "port", lo=1, hi=65535)
        if "data_dir" in doc:
            cfg.data_dir = Path(_expect_str(doc, "data_dir"))
        if "kg_path" in doc:
            cfg.kg_path = Path(_expect_str(doc, "kg_path"))
        if "static_dir" in doc:
            cfg.static_dir = Path(_expect_str(doc, "static_dir"))
        if "memory_window" in doc:
            cfg.memory_window = _expect_int(doc, "memory_window", lo=0)
        if "retrieval_k" in doc:
            cfg.retrieval_k = _expect_int(doc, "retrieval_k", lo=1)
        if "admin_token" in doc:
            cfg.admin_token = _expect_str(doc, "admin_token")

        elo_doc = doc.get("elo", {})
        if not isinstance(elo_doc, dict):
            raise ConfigError("elo", "must be an object")
        try:
            cfg.elo = EloParams(
                a=float(elo_doc.get("a", 0.8)),
                b=float(elo_doc.get("b", 0.05)),
                theta_master=float(elo_doc.get("theta_master", 1.5)),
                band_lo=float(elo_doc.get("band_lo", -0.5)),
                band_hi=float(elo_doc.get("band_hi", 0.5)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("elo", str(exc)) from exc

        runners_doc = doc.get("runners", {})
        if not isinstance(runners_doc, dict):
            raise ConfigError("runners", "must be an object")
        extra = {}
        for language, spec in runners_doc.items():
            key = f"runners.{language}"
            if not isinstance(spec, dict):
                raise ConfigError(key, "must be an object")
            cmd = spec.get("cmd")
            if not isinstance(cmd, list) or not cmd or not all(isinstance(c, str) for c in cmd):
                raise ConfigError(f"{key}.cmd", "must be a non-empty list of strings")
            timeout_ms = spec.get("timeout_ms", 5000)
            if not isinstance(timeout_ms, (int, float)) or timeout_ms <= 0:
                raise ConfigError(f"{key}.timeout_ms", "must be a positive number")
            max_bytes = spec.get("max_output_bytes", 64 * 1024)
            if not isinstance(max_bytes, int) or max_bytes <= 0:
                raise ConfigError(f"{key}.max_output_bytes", "must be a positive integer")
            extra[language] = RunnerSpec(
                cmd=tuple(cmd), timeout_s=timeout_ms / 1000.0, max_output_bytes=max_bytes
            )
        cfg.runners = RunnerConfig.with_defaults(extra)

        emb_doc = doc.get("embedder", {})
        if not isinstance(emb_doc, dict):
            raise ConfigError("embedder", "must be an object")
        kind = emb_doc.get("kind", "hash64")
        if kind not in ("hash64", "http"):
            raise ConfigError("embedder.kind", "must be hash64 or http")
        cfg.embedder = EmbedderConfig(
            kind=kind,
            dim=int(emb_doc.get("dim", 64)),
            url=emb_doc.get("url"),
        )
        if kind == "http" and not cfg.embedder.url:
            raise ConfigError("embedder.url", "required for kind http")

        llm_doc = doc.get("llm", {})
        if not isinstance(llm_doc, dict):
            raise ConfigError("llm", "must be an object")
        llm_kind = llm_doc.get("kind", "mock_reference")
        if llm_kind not in ("mock_scripted", "mock_reference", "http"):
            raise ConfigError("llm.kind", "must be mock_scripted, mock_reference or http")
        script = llm_doc.get("script", [])
        if not isinstance(script, list) or not all(isinstance(s, str) for s in script):
            raise ConfigError("llm.script", "must be a list of strings")
        cfg.llm = LlmConfig(
            kind=llm_kind,
            url=llm_doc.get("url"),
            script=script,
            max_tokens=int(llm_doc.get("max_tokens", 1024)),
            temperature=float(llm_doc.get("temperature", 0.0)),
            retries=int(llm_doc.get("retries", 2)),
            timeout_s=float(llm_doc.get("timeout_s", 60.0)),
        )
        if llm_kind == "http" and not cfg.llm.url:
            raise ConfigError("llm.url", "required for kind http")
        return cfg


def _expect_str(doc: dict, key: str) -> str:
    value = doc[key]
    if not isinstance(value, str) or not value:
        raise ConfigError(key, "must be a non-empty string")
    return value


def _expect_int(doc: dict, key: str, lo: Optional[int] = None, hi: Optional[int] = None) -> int:
    value = doc[key]
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(key, "must be an integer")
    if lo is not None and value < lo:
        raise ConfigError(key, f"must be >= {lo}")
    if hi is not None and value > hi:
        raise ConfigError(key, f"must be <= {hi}")
    return value


def resolve_config(path: Optional[str] = None) -> ServiceConfig:
    """--config flag, then ADVENTURE_CONFIG, then built-in defaults."""
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    if path is None:
        return ServiceConfig()
    return ServiceConfig.from_file(path)


def default_kg_path() -> Path:
    return Path(sys.modules["adventure"].__file__).parent / "data" / "sample_graph.json"
