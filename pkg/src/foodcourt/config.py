"""Run configuration: one structured file controls the whole simulation.

Paths inside a config resolve against the config file's directory; the roster
and scripted-policy fields default to the bundled assets. The config hash that
stamps run-log headers covers the resolved settings plus the content of the
roster and policy files, so two runs share a hash only if every input matched.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import Decimal
from importlib import resources
from pathlib import Path

import yaml

from .domain import Dish, Chef, RestaurantState, money
from .errors import ConfigError
from .util import canonical_json, sha256_hex

CONFIG_SCHEMA_VERSION = 1
MODES = ("single", "group")
GATEWAY_CHOICES = ("scripted", "live", "record", "replay")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("foodcourt") / "data" / name))


@dataclass(frozen=True)
class GatewaySettings:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4-0613"
    api_key_env: str = "FOODCOURT_API_KEY"
    temperature: float = 0.7
    max_tokens: int = 1024
    parallelism: int = 4
    rpm: int | None = None
    request_cap: int = 5000
    retry_attempts: int = 5
    retry_base: float = 1.0
    retry_cap: float = 60.0
    transport: str = "http"  # "http" | "scripted" (record mode test rigs)


@dataclass(frozen=True)
class RestaurantSetup:
    rid: str
    name: str
    funds: Decimal
    rent: Decimal
    advertisement: str = ""
    chefs: tuple[tuple[str, Decimal], ...] = ()
    menu: tuple[dict, ...] = ()

    def initial_state(self) -> RestaurantState:
        return RestaurantState(
            rid=self.rid,
            name=self.name,
            funds=self.funds,
            rent=self.rent,
            chefs=tuple(Chef(n, s) for n, s in self.chefs),
            menu=tuple(Dish(d["name"], d["price"], d["cost_price"],
                            d.get("description", "")) for d in self.menu),
            advertisement=self.advertisement,
        )


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 15
    mode: str = "group"
    seed: int = 0
    gateway_mode: str = "scripted"
    comment_rate: float = 0.7
    budget_ratio: Decimal = Decimal("0.004")
    daybook_window: int = 3
    memory_window: int = 5
    comment_window: int = 20
    turn_retries: int = 3
    customer_retries: int = 3
    wta_threshold: float = 0.8
    wta_from_day: int = 6
    workers: int = 1
    roster_path: Path = field(default_factory=lambda: bundled_path("roster.yaml"))
    policy_path: Path = field(default_factory=lambda: bundled_path("scripted_policy.yaml"))
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    restaurants: tuple[RestaurantSetup, ...] = ()

    def with_overrides(self, **kw) -> "SimConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _resolve(base: Path, value: str | None, default: Path) -> Path:
    if not value:
        return default
    p = Path(value)
    return p if p.is_absolute() else (base / p).resolve()


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError([f"config.unreadable: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(["config.not-a-mapping: config root must be a mapping"])
    if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ConfigError([
            f"config.schema-version: unsupported value {doc.get('schema_version')!r}"])
    base = path.parent

    gw = doc.get("gateway") or {}
    gateway = GatewaySettings(
        base_url=str(gw.get("base_url", GatewaySettings.base_url)),
        model=str(gw.get("model", GatewaySettings.model)),
        api_key_env=str(gw.get("api_key_env", GatewaySettings.api_key_env)),
        temperature=float(gw.get("temperature", GatewaySettings.temperature)),
        max_tokens=int(gw.get("max_tokens", GatewaySettings.max_tokens)),
        parallelism=int(gw.get("parallelism", GatewaySettings.parallelism)),
        rpm=gw.get("rpm"),
        request_cap=int(gw.get("request_cap", GatewaySettings.request_cap)),
        retry_attempts=int(gw.get("retry_attempts", GatewaySettings.retry_attempts)),
        retry_base=float(gw.get("retry_base", GatewaySettings.retry_base)),
        retry_cap=float(gw.get("retry_cap", GatewaySettings.retry_cap)),
        transport=str(gw.get("transport", GatewaySettings.transport)),
    )

    restaurants = []
    for rec in doc.get("restaurants") or []:
        restaurants.append(RestaurantSetup(
            rid=str(rec.get("id", "")),
            name=str(rec.get("name", "")),
            funds=money(rec.get("funds", 0)),
            rent=money(rec.get("rent", 0)),
            advertisement=str(rec.get("advertisement", "")),
            chefs=tuple((str(c["name"]), money(c["salary"]))
                        for c in rec.get("chefs") or []),
            menu=tuple(dict(d) for d in rec.get("menu") or []),
        ))

    return SimConfig(
        horizon=int(doc.get("horizon", 15)),
        mode=str(doc.get("mode", "group")),
        seed=int(doc.get("seed", 0)),
        gateway_mode=str(doc.get("gateway_mode", "scripted")),
        comment_rate=float(doc.get("comment_rate", 0.7)),
        budget_ratio=Decimal(str(doc.get("budget_ratio", "0.004"))),
        daybook_window=int(doc.get("daybook_window", 3)),
        memory_window=int(doc.get("memory_window", 5)),
        comment_window=int(doc.get("comment_window", 20)),
        turn_retries=int(doc.get("turn_retries", 3)),
        customer_retries=int(doc.get("customer_retries", 3)),
        wta_threshold=float(doc.get("wta_threshold", 0.8)),
        wta_from_day=int(doc.get("wta_from_day", 6)),
        workers=int(doc.get("workers", 1)),
        roster_path=_resolve(base, doc.get("roster"), bundled_path("roster.yaml")),
        policy_path=_resolve(base, doc.get("policy"),
                             bundled_path("scripted_policy.yaml")),
        gateway=gateway,
        restaurants=tuple(restaurants),
    )


def validate_config(cfg: SimConfig) -> list[str]:
    """Structural findings, each with a stable code prefix. Empty means clean."""
    findings: list[str] = []
    if cfg.horizon < 1:
        findings.append("config.horizon: horizon must be >= 1")
    if cfg.mode not in MODES:
        findings.append(f"config.mode: unknown mode {cfg.mode!r}")
    if cfg.gateway_mode not in GATEWAY_CHOICES:
        findings.append(f"config.gateway-mode: unknown value {cfg.gateway_mode!r}")
    if not 0.0 <= cfg.comment_rate <= 1.0:
        findings.append("config.comment-rate: must be within [0, 1]")
    if cfg.budget_ratio <= 0:
        findings.append("config.budget-ratio: must be > 0")
    if not 0.0 < cfg.wta_threshold < 1.0:
        findings.append("config.wta-threshold: must be within (0, 1)")
    if cfg.wta_from_day < 1:
        findings.append("config.wta-from-day: must be >= 1")
    if len(cfg.restaurants) != 2:
        findings.append(
            f"config.restaurants: exactly 2 restaurants required, got {len(cfg.restaurants)}")
    seen = set()
    for setup in cfg.restaurants:
        if not setup.rid:
            findings.append("config.restaurant-id: empty restaurant id")
        if setup.rid in seen:
            findings.append(f"config.restaurant-id: duplicate id {setup.rid!r}")
        seen.add(setup.rid)
        if not setup.menu:
            findings.append(f"config.menu: restaurant {setup.rid!r} has no starting menu")
        try:
            setup.initial_state()
        except Exception as exc:
            findings.append(f"config.restaurant: {setup.rid!r}: {exc}")
    if not cfg.roster_path.exists():
        findings.append(f"config.roster: file not found: {cfg.roster_path}")
    if cfg.gateway_mode == "scripted" or cfg.gateway.transport == "scripted":
        if not cfg.policy_path.exists():
            findings.append(f"config.policy: file not found: {cfg.policy_path}")
    if cfg.gateway.parallelism < 1:
        findings.append("config.gateway.parallelism: must be >= 1")
    if cfg.gateway.request_cap < 1:
        findings.append("config.gateway.request-cap: must be >= 1")
    if cfg.gateway.transport not in ("http", "scripted"):
        findings.append(
            f"config.gateway.transport: unknown value {cfg.gateway.transport!r}")
    return findings


def config_digest(cfg: SimConfig) -> dict:
    """Canonical dict for hashing; file paths are replaced by content hashes."""
    def file_hash(p: Path) -> str:
        return sha256_hex(p.read_bytes()) if p.exists() else "missing"

    # gateway_mode is execution plumbing, not world identity: a recording and
    # its replay must hash alike.
    return {
        "horizon": cfg.horizon,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "comment_rate": cfg.comment_rate,
        "budget_ratio": str(cfg.budget_ratio),
        "daybook_window": cfg.daybook_window,
        "memory_window": cfg.memory_window,
        "comment_window": cfg.comment_window,
        "turn_retries": cfg.turn_retries,
        "customer_retries": cfg.customer_retries,
        "wta_threshold": cfg.wta_threshold,
        "wta_from_day": cfg.wta_from_day,
        "roster_sha256": file_hash(cfg.roster_path),
        "policy_sha256": file_hash(cfg.policy_path),
        "gateway": {
            "model": cfg.gateway.model,
            "temperature": cfg.gateway.temperature,
            "max_tokens": cfg.gateway.max_tokens,
            "transport": cfg.gateway.transport,
        },
        "restaurants": [
            {
                "id": s.rid, "name": s.name, "funds": str(s.funds),
                "rent": str(s.rent), "advertisement": s.advertisement,
                "chefs": [[n, str(sal)] for n, sal in s.chefs],
                "menu": [
                    {"name": d["name"], "price": str(money(d["price"])),
                     "cost_price": str(money(d["cost_price"])),
                     "description": d.get("description", "")}
                    for d in s.menu],
            }
            for s in cfg.restaurants
        ],
    }


def config_hash(cfg: SimConfig) -> str:
    return sha256_hex(canonical_json(config_digest(cfg)))


def config_to_dict(cfg: SimConfig) -> dict:
    """Full lossless serialization (checkpoints embed this)."""
    return {
        "horizon": cfg.horizon, "mode": cfg.mode, "seed": cfg.seed,
        "gateway_mode": cfg.gateway_mode, "comment_rate": cfg.comment_rate,
        "budget_ratio": str(cfg.budget_ratio),
        "daybook_window": cfg.daybook_window, "memory_window": cfg.memory_window,
        "comment_window": cfg.comment_window, "turn_retries": cfg.turn_retries,
        "customer_retries": cfg.customer_retries,
        "wta_threshold": cfg.wta_threshold, "wta_from_day": cfg.wta_from_day,
        "workers": cfg.workers,
        "roster_path": str(cfg.roster_path), "policy_path": str(cfg.policy_path),
        "gateway": {
            "base_url": cfg.gateway.base_url, "model": cfg.gateway.model,
            "api_key_env": cfg.gateway.api_key_env,
            "temperature": cfg.gateway.temperature,
            "max_tokens": cfg.gateway.max_tokens,
            "parallelism": cfg.gateway.parallelism, "rpm": cfg.gateway.rpm,
            "request_cap": cfg.gateway.request_cap,
            "retry_attempts": cfg.gateway.retry_attempts,
            "retry_base": cfg.gateway.retry_base,
            "retry_cap": cfg.gateway.retry_cap,
            "transport": cfg.gateway.transport,
        },
        "restaurants": [
            {"id": s.rid, "name": s.name, "funds": str(s.funds),
             "rent": str(s.rent), "advertisement": s.advertisement,
             "chefs": [[n, str(sal)] for n, sal in s.chefs],
             "menu": [dict(d) for d in s.menu]}
            for s in cfg.restaurants
        ],
    }


def config_from_dict(data: dict) -> SimConfig:
    gw = data.get("gateway") or {}
    return SimConfig(
        horizon=int(data["horizon"]), mode=data["mode"], seed=int(data["seed"]),
        gateway_mode=data.get("gateway_mode", "scripted"),
        comment_rate=float(data["comment_rate"]),
        budget_ratio=Decimal(data["budget_ratio"]),
        daybook_window=int(data["daybook_window"]),
        memory_window=int(data["memory_window"]),
        comment_window=int(data["comment_window"]),
        turn_retries=int(data.get("turn_retries", 3)),
        customer_retries=int(data.get("customer_retries", 3)),
        wta_threshold=float(data["wta_threshold"]),
        wta_from_day=int(data["wta_from_day"]),
        workers=int(data.get("workers", 1)),
        roster_path=Path(data["roster_path"]),
        policy_path=Path(data["policy_path"]),
        gateway=GatewaySettings(
            base_url=gw.get("base_url", GatewaySettings.base_url),
            model=gw.get("model", GatewaySettings.model),
            api_key_env=gw.get("api_key_env", GatewaySettings.api_key_env),
            temperature=float(gw.get("temperature", 0.7)),
            max_tokens=int(gw.get("max_tokens", 1024)),
            parallelism=int(gw.get("parallelism", 4)),
            rpm=gw.get("rpm"),
            request_cap=int(gw.get("request_cap", 5000)),
            retry_attempts=int(gw.get("retry_attempts", 5)),
            retry_base=float(gw.get("retry_base", 1.0)),
            retry_cap=float(gw.get("retry_cap", 60.0)),
            transport=gw.get("transport", "http"),
        ),
        restaurants=tuple(
            RestaurantSetup(
                rid=r["id"], name=r["name"], funds=money(r["funds"]),
                rent=money(r["rent"]), advertisement=r.get("advertisement", ""),
                chefs=tuple((n, money(s)) for n, s in r.get("chefs") or []),
                menu=tuple(dict(d) for d in r.get("menu") or []),
            )
            for r in data.get("restaurants") or []
        ),
    )
