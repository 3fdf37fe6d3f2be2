"""Plain ``key=value`` run configuration."""
from dataclasses import dataclass, field, fields

from nrt.model import Hypers


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    hypers: Hypers = field(default_factory=Hypers)
    seed: int = 0
    max_epochs: int = 50
    patience: int = 5
    schema: str = "generic"
    min_tf: int = 5
    model: str = "nrt"
    mf_k: int = 10
    mf_lambda: float = 1e-4
    input: str = ""
    corpus: str = ""
    out: str = ""

    RUN_KEYS = ("seed", "max_epochs", "patience", "schema", "min_tf", "model", "mf_k",
                "mf_lambda", "input", "corpus", "out")

    def set(self, key, value):
        hyper_types = {f.name: f.type for f in fields(Hypers)}
        if key in hyper_types:
            try:
                setattr(self.hypers, key, hyper_types[key](value))
            except ValueError:
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        elif key in self.RUN_KEYS:
            current = getattr(self, key)
            try:
                setattr(self, key, type(current)(value))
            except ValueError:
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        else:
            raise ConfigError(f"unknown config key {key!r}")

    def validate(self):
        try:
            self.hypers.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.model not in ("nrt", "mf"):
            raise ConfigError(f"model must be nrt or mf, got {self.model!r}")
        if self.min_tf < 1 or self.patience < 1 or self.max_epochs < 0 or self.mf_k < 1:
            raise ConfigError("min_tf, patience and mf_k must be >= 1; max_epochs >= 0")
        return self

    def items(self):
        out = [(k, getattr(self, k)) for k in self.RUN_KEYS]
        out += list(self.hypers.to_dict().items())
        return out

    def dumps(self):
        return "".join(f"{k}={v}\n" for k, v in self.items())


def parse_config(text, base=None):
    cfg = base or RunConfig()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg.set(key, value)
    return cfg.validate()


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)
