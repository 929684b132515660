"""Run configuration: defaults, key=value config files, flag overrides.

Config files are plain "key = value" lines; '#' starts a comment. Flags given
on the command line win over the file, which wins over the defaults. Every
run logs its resolved config so it can be reproduced.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

SEED_ENV_VAR = "MEMEX_SEED"


@dataclass
class RunConfig:
    seed: int = 0
    # synthetic generation
    users: int = 4
    albums: int = 4
    photos: int = 8
    qas: int = 6
    feature_dim: int = 16
    # retrieval / model
    top_k: int = 2
    vocab_cap: int = 7236
    embed_dim: int = 10
    rank_hidden: int = 5
    fc_hidden: int = 32
    sigmoid_head: bool = True
    # training
    epochs: int = 45
    batch_size: int = 32
    lr_adagrad: float = 0.1
    lr_sgd: float = 0.05
    clip_norm: float = 5.0
    split_train: float = 0.8
    split_val: float = 0.1
    split_test: float = 0.1
    pretrain_epochs: int = 10
    # skip-gram
    sg_dim: int = 32
    sg_window: int = 4
    sg_negatives: int = 5
    sg_epochs: int = 3
    # execution
    threads: int = 1

    @property
    def split_ratios(self) -> tuple[float, float, float]:
        return (self.split_train, self.split_val, self.split_test)

    def as_dict(self) -> dict:
        return asdict(self)


def default_seed() -> int:
    env = os.environ.get(SEED_ENV_VAR)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got '{env}'") from exc


def _parse_value(field_type, raw: str):
    raw = raw.strip()
    if field_type is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: '{raw}'")
    if field_type is int:
        return int(raw)
    if field_type is float:
        return float(raw)
    return raw


def load_config_file(path, base: RunConfig | None = None) -> RunConfig:
    config = base or RunConfig()
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {"int": int, "float": float, "bool": bool, "str": str}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown config key '{key}'")
        field_type = known[key]
        if isinstance(field_type, str):
            field_type = types.get(field_type, str)
        setattr(config, key, _parse_value(field_type, raw))
    return config
