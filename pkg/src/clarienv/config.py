"""Flat key-value configuration for the CLI.

A config file holds `key = value` lines with dotted namespaces (reward.beta,
simulator.tau_rep, provider.chat.user.kind, ...). Command-line `--set`
overrides win over file values; built-in defaults fill the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UsageError
from .providers import ProviderConfig
from .reward import RewardConfig
from .simulator import SimulatorConfig

DEFAULTS: dict[str, str] = {
    "reward.beta": "2.0",
    "reward.gamma": "2.0",
    "reward.stage": "I",
    "reward.format_mode": "heuristic",
    "simulator.tau_rep": "0.92",
    "simulator.tau_rel": "0.8",
    "simulator.max_turns": "9",
    "metrics.threshold": "0.8",
    "enumerate.mode": "structural",
    "enumerate.cap": "45",
    "rollout.n": "8",
    "seed": "0",
}

PROVIDER_ROLES = ("embedding", "construct", "judge", "user", "policy", "summary")


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(path: str | None, overrides: list[str] | None = None) -> dict[str, str]:
    values = dict(DEFAULTS)
    if path:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        values[key.strip()] = value.strip()
    return values


def _float(values: dict[str, str], key: str) -> float:
    try:
        return float(values[key])
    except (KeyError, ValueError):
        raise UsageError(f"missing or invalid config key {key!r}")


def _int(values: dict[str, str], key: str) -> int:
    try:
        return int(values[key])
    except (KeyError, ValueError):
        raise UsageError(f"missing or invalid config key {key!r}")


def reward_config(values: dict[str, str], stage: str | None = None) -> RewardConfig:
    return RewardConfig(
        beta=_float(values, "reward.beta"),
        gamma=_float(values, "reward.gamma"),
        stage=stage or values.get("reward.stage", "I"),
        format_mode=values.get("reward.format_mode", "heuristic"),
    )


def simulator_config(values: dict[str, str], stage: str = "II") -> SimulatorConfig:
    return SimulatorConfig(
        tau_rep=_float(values, "simulator.tau_rep"),
        tau_rel=_float(values, "simulator.tau_rel"),
        max_turns=_int(values, "simulator.max_turns"),
        reward=reward_config(values, stage=stage),
        insignificance_judging=values.get(
            "simulator.insignificance_judging", "false"
        ).lower() in ("1", "true", "yes"),
    )


def provider_config(values: dict[str, str], role: str) -> ProviderConfig:
    if role not in PROVIDER_ROLES:
        raise UsageError(f"unknown provider role {role!r}")
    prefix = f"provider.{role}."
    return ProviderConfig(
        kind=values.get(prefix + "kind", "deterministic-test"),
        endpoint=values.get(prefix + "endpoint", ""),
        model=values.get(prefix + "model", ""),
        auth_env_var=values.get(prefix + "auth_env", ""),
        timeout_ms=int(values.get(prefix + "timeout_ms", "30000")),
        retry_budget=int(values.get(prefix + "retry_budget", "2")),
    )
