"""Scenario configuration: parsing, validation, defaults.

A scenario is a JSON document (snake_case keys). Rates may be given as
integers, decimal strings, or floats; they are parsed into exact
fractions via their decimal representation so 0.05 means exactly 1/20.

Validation is strict: unknown keys are rejected, probabilities must lie
in [0, 1], the jury size must be odd, the run must be longer than the
trade windows, and the utility parameters must keep honest play the
unique equilibrium -- a config that silently breaks that is refused
with the exact failed inequality unless ``allow_unbalanced_params`` is
set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dataclass_fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Union

from .errors import InvalidConfig
from .incentives import UtilityParams, analyze_equilibrium


def to_fraction(value: Union[int, float, str, Fraction]) -> Fraction:
    """Exact fraction from a JSON scalar, via the decimal spelling for floats."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidConfig(f"expected a number, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidConfig(f"cannot parse rate {value!r}") from exc
    raise InvalidConfig(f"cannot parse rate {value!r}")


def _check_probability(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"{name} must be a number, got {value!r}") from exc
    if not 0.0 <= value <= 1.0:
        raise InvalidConfig(f"{name} must be in [0, 1], got {value}")
    return value


def _from_dict(cls, raw: dict, context: str):
    if not isinstance(raw, dict):
        raise InvalidConfig(f"{context} must be an object, got {type(raw).__name__}")
    known = {f.name for f in dataclass_fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise InvalidConfig(f"unknown keys in {context}: {sorted(unknown)}")
    return cls(**raw)


@dataclass
class AgentGroup:
    role: str
    count: int
    strategy_mix: float = 0.0
    initial_lzs: int = 10_000
    stake: int = 0

    def __post_init__(self) -> None:
        if self.role not in ("buyer", "seller"):
            raise InvalidConfig(f"agent role must be buyer or seller, got {self.role!r}")
        if self.count <= 0:
            raise InvalidConfig("agent count must be positive")
        self.strategy_mix = _check_probability("strategy_mix", self.strategy_mix)
        if self.initial_lzs < 0 or self.stake < 0:
            raise InvalidConfig("initial_lzs and stake must be non-negative")


@dataclass
class JurorConfig:
    count: int = 15
    stake: int = 1_000_000
    coherence: float = 0.9

    def __post_init__(self) -> None:
        if self.count < 0 or self.stake < 0:
            raise InvalidConfig("juror count and stake must be non-negative")
        self.coherence = _check_probability("coherence", self.coherence)


@dataclass
class WindowConfig:
    shipping: int = 3
    receipt: int = 3
    challenge: int = 5
    appeal: int = 2

    def __post_init__(self) -> None:
        for name in ("shipping", "receipt", "challenge", "appeal"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"window {name} must be non-negative")


@dataclass
class FeeConfig:
    protocol_fee_rate: Fraction = Fraction(1, 100)
    juror_penalty_fraction: Fraction = Fraction(1, 10)

    def __post_init__(self) -> None:
        self.protocol_fee_rate = to_fraction(self.protocol_fee_rate)
        self.juror_penalty_fraction = to_fraction(self.juror_penalty_fraction)
        if not 0 <= self.protocol_fee_rate < 1:
            raise InvalidConfig("protocol_fee_rate must be in [0, 1)")
        if not 0 <= self.juror_penalty_fraction <= 1:
            raise InvalidConfig("juror_penalty_fraction must be in [0, 1]")


@dataclass
class BehaviorConfig:
    """Fraud menus: dishonest sellers either submit counterfeits for
    certification, never ship, or ship a fake substitute; dishonest
    buyers raise false disputes."""

    fake_submission_share: float = 0.25
    never_ship_share: float = 0.5
    fake_detected_at_receipt: float = 1.0
    buy_propensity: float = 1.0
    appeal_probability: float = 0.0
    pairs_per_seller: int = 0  # 0 = unlimited

    def __post_init__(self) -> None:
        for name in (
            "fake_submission_share",
            "never_ship_share",
            "fake_detected_at_receipt",
            "buy_propensity",
            "appeal_probability",
        ):
            setattr(self, name, _check_probability(name, getattr(self, name)))
        if self.pairs_per_seller < 0:
            raise InvalidConfig("pairs_per_seller must be non-negative")


def _utility_from_dict(raw: dict) -> UtilityParams:
    if not isinstance(raw, dict):
        raise InvalidConfig("utility must be an object")
    known = {
        "trade_value", "stake_amount", "stake_return_rate",
        "reputation_weight", "reputation_points", "alpha_prime", "iota_prime",
    }
    unknown = set(raw) - known
    if unknown:
        raise InvalidConfig(f"unknown keys in utility: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key in ("trade_value", "stake_amount", "stake_return_rate", "reputation_weight"):
        if key in raw:
            kwargs[key] = to_fraction(raw[key])
    for key in ("reputation_points", "alpha_prime", "iota_prime"):
        if key in raw:
            kwargs[key] = int(raw[key])
    try:
        return UtilityParams(**kwargs)
    except (ValueError,) as exc:
        raise InvalidConfig(str(exc)) from exc


@dataclass
class ScenarioConfig:
    seed: int = 0
    ticks: int = 50
    agents: list[AgentGroup] = field(default_factory=list)
    jurors: JurorConfig = field(default_factory=JurorConfig)
    utility: UtilityParams = field(default_factory=UtilityParams)
    windows: WindowConfig = field(default_factory=WindowConfig)
    jury_size: int = 5
    fees: FeeConfig = field(default_factory=FeeConfig)
    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    verifier_accuracy: float = 1.0
    pool_initial: int = 0
    juror_min_stake: int = 10
    max_dispute_rounds: int = 3
    allow_unbalanced_params: bool = False

    def __post_init__(self) -> None:
        self.verifier_accuracy = _check_probability("verifier_accuracy", self.verifier_accuracy)

    # -- derived -------------------------------------------------------

    @property
    def listing_price(self) -> int:
        return int(self.utility.trade_value)

    @property
    def min_seller_stake(self) -> int:
        return int(self.utility.stake_amount)

    def validate(self) -> None:
        if self.ticks <= 0:
            raise InvalidConfig("ticks must be positive")
        if self.jury_size <= 0 or self.jury_size % 2 == 0:
            raise InvalidConfig(f"jury_size must be a positive odd number, got {self.jury_size}")
        if self.pool_initial < 0:
            raise InvalidConfig("pool_initial must be non-negative")
        if self.max_dispute_rounds < 1:
            raise InvalidConfig("max_dispute_rounds must be at least 1")
        longest_window = max(
            self.windows.shipping, self.windows.receipt, self.windows.challenge, self.windows.appeal
        )
        if self.ticks <= longest_window:
            raise InvalidConfig(
                f"ticks ({self.ticks}) must exceed the longest window ({longest_window})"
            )
        if self.utility.trade_value != int(self.utility.trade_value):
            raise InvalidConfig("trade_value must be a whole number of LZS minor units")
        if self.utility.stake_amount != int(self.utility.stake_amount):
            raise InvalidConfig("stake_amount must be a whole number of LZS minor units")
        sellers = [g for g in self.agents if g.role == "seller"]
        for group in sellers:
            if group.stake < self.min_seller_stake:
                raise InvalidConfig(
                    f"seller group stake {group.stake} is below the required "
                    f"minimum {self.min_seller_stake}"
                )
        if self.behavior.appeal_probability > 0:
            final_jury = self.jury_size
            for _ in range(1, self.max_dispute_rounds):
                final_jury = 2 * final_jury + 1
            if self.jurors.count < final_jury:
                raise InvalidConfig(
                    f"appeals enabled: juror count {self.jurors.count} cannot seat "
                    f"a final-round jury of {final_jury}"
                )
        if not self.allow_unbalanced_params:
            report = analyze_equilibrium(self.utility)
            if report.failures:
                raise InvalidConfig(
                    "utility parameters break the honesty equilibrium: "
                    + "; ".join(report.failures)
                )

    # -- codecs ----------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise InvalidConfig("scenario config must be a JSON object")
        known = {f.name for f in dataclass_fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfig(f"unknown keys in scenario config: {sorted(unknown)}")
        data = dict(raw)
        try:
            if "agents" in data:
                data["agents"] = [
                    _from_dict(AgentGroup, group, "agents[]") for group in data["agents"]
                ]
            if "jurors" in data:
                data["jurors"] = _from_dict(JurorConfig, data["jurors"], "jurors")
            if "windows" in data:
                data["windows"] = _from_dict(WindowConfig, data["windows"], "windows")
            if "fees" in data:
                data["fees"] = _from_dict(FeeConfig, data["fees"], "fees")
            if "behavior" in data:
                data["behavior"] = _from_dict(BehaviorConfig, data["behavior"], "behavior")
            if "utility" in data:
                data["utility"] = _utility_from_dict(data["utility"])
            config = cls(**data)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from exc
        config.validate()
        return config

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScenarioConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ticks": self.ticks,
            "agents": [
                {
                    "role": g.role,
                    "count": g.count,
                    "strategy_mix": g.strategy_mix,
                    "initial_lzs": g.initial_lzs,
                    "stake": g.stake,
                }
                for g in self.agents
            ],
            "jurors": {
                "count": self.jurors.count,
                "stake": self.jurors.stake,
                "coherence": self.jurors.coherence,
            },
            "utility": {
                "trade_value": str(self.utility.trade_value),
                "stake_amount": str(self.utility.stake_amount),
                "stake_return_rate": str(self.utility.stake_return_rate),
                "reputation_weight": str(self.utility.reputation_weight),
                "reputation_points": self.utility.reputation_points,
                "alpha_prime": self.utility.alpha_prime,
                "iota_prime": self.utility.iota_prime,
            },
            "windows": {
                "shipping": self.windows.shipping,
                "receipt": self.windows.receipt,
                "challenge": self.windows.challenge,
                "appeal": self.windows.appeal,
            },
            "jury_size": self.jury_size,
            "fees": {
                "protocol_fee_rate": str(self.fees.protocol_fee_rate),
                "juror_penalty_fraction": str(self.fees.juror_penalty_fraction),
            },
            "behavior": {
                "fake_submission_share": self.behavior.fake_submission_share,
                "never_ship_share": self.behavior.never_ship_share,
                "fake_detected_at_receipt": self.behavior.fake_detected_at_receipt,
                "buy_propensity": self.behavior.buy_propensity,
                "appeal_probability": self.behavior.appeal_probability,
                "pairs_per_seller": self.behavior.pairs_per_seller,
            },
            "verifier_accuracy": self.verifier_accuracy,
            "pool_initial": self.pool_initial,
            "juror_min_stake": self.juror_min_stake,
            "max_dispute_rounds": self.max_dispute_rounds,
            "allow_unbalanced_params": self.allow_unbalanced_params,
        }
