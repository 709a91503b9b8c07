"""Scenario configuration and its flat ``key = value`` file format.

Grammar: one ``key = value`` pair per line, ``#`` or ``;`` starts a
comment line, blank lines are ignored, keys are case-insensitive. Booleans
accept true/false/yes/no/1/0. ``lambda`` is spelled as in the model.
"""

import configparser
import dataclasses
from dataclasses import dataclass, fields

SCHEMES = ("LRI", "SALOHA", "MMPC")
TRAFFIC_MODELS = ("spatial", "saturated")
BUFFER_POLICIES = ("DropNew", "DropOldRestart")

# Keys every config file must state explicitly.
REQUIRED = ("n_devices", "k_slots", "beta", "alpha", "lambda", "mu", "side", "radius", "scheme")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class SimConfig:
    n_devices: int = 20
    k_slots: int = 4
    beta: int = 5
    alpha: float = 0.01
    lam: float = 0.05
    mu: float = 0.0
    side: float = 10.0
    radius: float = 1.25
    scheme: str = "LRI"
    buffer_policy: str = "DropOldRestart"
    traffic: str = "spatial"
    frames: int = 10_000              # learning-phase frames (continuous mode)
    episodes: int = 5_000             # learning-phase episodes (mu = 0)
    measure_frames: int = 10_000
    measure_episodes: int = 2_000
    replications: int = 100
    base_seed: int = 0
    learning_frozen_after_purity: bool = True
    purity_epsilon: float = 0.01
    purity_check_every: int = 100
    learn_during_measurement: bool = False
    warmup_active_frames: int = 10_000
    gain_window: int = 500
    track_gain: bool = False
    snapshot_every: int = 0

    @property
    def episodic(self):
        return self.traffic == "spatial" and self.mu == 0

    def validate(self):
        problems = []
        for name in ("n_devices", "k_slots", "beta", "frames", "episodes", "replications",
                     "measure_frames", "measure_episodes", "purity_check_every",
                     "warmup_active_frames", "gain_window"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        # attempt counters and slots are stored as int8
        if self.beta > 127 or self.k_slots > 127:
            problems.append("beta and k_slots must be <= 127")
        if not 0 < self.alpha < 1:
            problems.append("alpha must lie in (0, 1)")
        if not 0 < self.purity_epsilon < 0.5:
            problems.append("purity_epsilon must lie in (0, 0.5)")
        if self.lam < 0:
            problems.append("lambda must be >= 0")
        if self.mu < 0:
            problems.append("mu must be >= 0")
        if self.side <= 0:
            problems.append("side must be > 0")
        if self.radius <= 0:
            problems.append("radius must be > 0")
        if self.snapshot_every < 0:
            problems.append("snapshot_every must be >= 0")
        if self.scheme not in SCHEMES:
            problems.append(f"scheme must be one of {', '.join(SCHEMES)}")
        if self.traffic not in TRAFFIC_MODELS:
            problems.append(f"traffic must be one of {', '.join(TRAFFIC_MODELS)}")
        if self.buffer_policy not in BUFFER_POLICIES:
            problems.append(f"buffer_policy must be one of {', '.join(BUFFER_POLICIES)}")
        if self.scheme == "MMPC" and self.beta != 1:
            problems.append(f"MMPC-style scheme requires beta = 1 (got beta = {self.beta})")
        if problems:
            raise ConfigError(problems)
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes).validate()

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out


_FIELDS = {f.name: f for f in fields(SimConfig)}


def _field_name(key):
    key = key.strip().lower()
    return "lam" if key == "lambda" else key


def _coerce(name, raw):
    kind = _FIELDS[name].type
    raw = str(raw).strip()
    if kind == "bool" or kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if kind == "int" or kind is int:
        return int(raw)
    if kind == "float" or kind is float:
        return float(raw)
    if name == "scheme":
        return raw.upper().replace("-", "")
    return raw


def parse_items(items):
    """Convert ``(key, text)`` pairs to typed field values, collecting errors."""
    values, problems = {}, []
    for key, raw in items:
        name = _field_name(key)
        if name not in _FIELDS:
            problems.append(f"unknown key {key!r}")
            continue
        try:
            values[name] = _coerce(name, raw)
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    return values, problems


def parse_overrides(pairs):
    items = []
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError([f"override {pair!r} is not key=value"])
        key, _, value = pair.partition("=")
        items.append((key, value))
    values, problems = parse_items(items)
    if problems:
        raise ConfigError(problems)
    return values


def loads_config(text, require=REQUIRED):
    parser = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                       interpolation=None)
    try:
        parser.read_string("[sim]\n" + text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"]) from None
    items = list(parser.items("sim"))
    values, problems = parse_items(items)
    present = {_field_name(k) for k, _ in items}
    for key in require:
        if _field_name(key) not in present:
            problems.append(f"missing required field {key!r}")
    try:
        config = SimConfig(**values).validate()
    except ConfigError as exc:
        raise ConfigError(problems + exc.problems) from None
    if problems:
        raise ConfigError(problems)
    return config


def load_config(path):
    with open(path) as fh:
        return loads_config(fh.read())


def dumps_config(config):
    return "".join(f"{k} = {v}\n" for k, v in config.to_dict().items())
