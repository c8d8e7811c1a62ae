"""Run parameters, key=value config files and run manifests."""

import dataclasses
from dataclasses import dataclass, fields

from .errors import ConfigurationError

TOLERANCES = ("wide", "strict")
NOISE_RULES = ("per-budget", "pooled")


@dataclass
class RunConfig:
    N: int = 500000
    a: int = 4
    V: int = 5000
    L: int = 500
    epsilon: float = 0.5
    epsilon_s: float = 0.5
    eta: float = 0.05
    theta: float = 0.95
    m_q: int = 10
    m_t: int = 10
    tail: float = 0.05
    tolerance: str = "wide"
    noise_rule: str = "per-budget"
    mix: str = "LVN"
    group: str = "p256"
    window: int = 0
    seed: int = 0
    trials: int = 30
    workers: int = 1

    @property
    def domain_size(self):
        return self.a * self.N

    @property
    def m(self):
        return self.m_q + self.m_t

    @property
    def half_window(self):
        """Decode window; 0 means 4 * N."""
        return self.window or 4 * self.N

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigurationError(msg)

        need(self.N >= 1, "N must be positive")
        need(self.a >= 2, "domain cap a must be at least 2")
        need(0 <= self.V <= self.N, "need 0 <= V <= N")
        need(1 <= self.L <= self.N, "need 1 <= L <= N")
        need(self.epsilon > 0 and self.epsilon_s > 0, "privacy budgets must be positive")
        need(0 < self.eta < 1, "eta must lie in (0, 1)")
        need(0 < self.theta < 1, "theta must lie in (0, 1)")
        need(self.m_q >= 1 and 0 <= self.m_t <= self.m_q, "need m_q >= 1 and 0 <= m_t <= m_q")
        need(0 < self.tail <= 1, "tail must lie in (0, 1]")
        need(self.tolerance in TOLERANCES, f"tolerance must be one of {TOLERANCES}")
        need(self.noise_rule in NOISE_RULES, f"noise rule must be one of {NOISE_RULES}")
        need(bool(self.mix) and set(self.mix) <= set("LVN"), "mix must be a string over L, V, N")
        need(self.group in ("p256", "sim"), "group must be p256 or sim")
        need(self.window >= 0, "window must be non-negative")
        need(self.trials >= 1 and self.workers >= 1, "trials and workers must be positive")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self, extra=None):
        lines = [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]
        for key, value in (extra or {}).items():
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def _coerce(field, raw):
    kind = field.type if isinstance(field.type, type) else {"int": int, "float": float, "str": str}[field.type]
    try:
        return kind(raw)
    except ValueError:
        raise ConfigurationError(f"{field.name}: cannot read {raw!r} as {kind.__name__}") from None


def parse_text(text):
    """key=value lines; '#' starts a comment.  Unknown keys are kept apart."""
    known = {f.name: f for f in fields(RunConfig)}
    values, extra = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in known:
            values[key] = _coerce(known[key], value)
        else:
            extra[key] = value
    return values, extra


def load_config(path=None, overrides=None, validate=True):
    """Defaults, then the file, then explicit overrides."""
    values = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            file_values, extra = parse_text(fh.read())
        values.update(file_values)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    config = RunConfig(**values)
    return config.validate() if validate else config
