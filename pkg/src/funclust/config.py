"""Flat dotted-key config files: ``key = value`` lines, ``#`` comments.

Values are coerced to int, float, or bool where unambiguous; anything
containing a comma stays a string for the consumer to split (see
``parse_int_list``/``parse_str_list``).  Serialization sorts keys so a config
dict always renders to identical bytes.
"""

from __future__ import annotations

__all__ = [
    "parse_config_text",
    "load_config",
    "dumps_config",
    "parse_int_list",
    "parse_float_list",
    "parse_str_list",
    "DEFAULT_STUDY",
    "PRESETS",
    "study_config",
]


def _coerce(raw: str):
    if "," in raw:
        return raw
    low = raw.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_text(text: str) -> dict:
    cfg = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        cfg[key] = _coerce(value.strip())
    return cfg


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_config(cfg: dict) -> str:
    return "".join(f"{k} = {_render(cfg[k])}\n" for k in sorted(cfg))


def parse_str_list(value) -> list[str]:
    if isinstance(value, str):
        return [tok.strip() for tok in value.split(",") if tok.strip()]
    return [str(value)]


def parse_int_list(value) -> list[int]:
    if isinstance(value, (int, float)):
        return [int(value)]
    return [int(tok) for tok in parse_str_list(value)]


def parse_float_list(value) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(tok) for tok in parse_str_list(value)]


# The default study: 80 curves in two balanced clusters observed on grids of
# 8..64 points, five noise designs, five fitted method variants, 50
# replicates, 3000 kept draws after 2000 burn-in.
DEFAULT_STUDY = {
    "seed": 20260815,
    "study.n": 80,
    "study.k_true": 2,
    "study.m": "8,16,32,64",
    "study.designs": "iid,exp0.1,exp1.0,fbm0.25,fbm0.5",
    "study.methods": "dp_iid,py_iid,dp_gp,py_gp,band",
    "study.replicates": 50,
    "study.noise_scale": 0.05,
    "study.mean_scale": 1.0,
    "study.mean_length": 0.15,
    "prior.alpha": 1.0,
    "prior.delta": 0.1,
    "sampler.iterations": 5000,
    "sampler.burn_in": 2000,
    "sampler.rw_step": 0.3,
    "sampler.nu_init": 1.5,
    "sampler.mean_length_init": 0.15,
    "error_model.bandwidth_multiplier": 3.0,
    "theory.m": "8,16,32,64",
    "theory.replicates": 200,
}

# Named study variants.
PRESETS = {
    "supp-noise": {"study.noise_scale": 0.1},
    "supp-py": {"prior.alpha": 1.5, "prior.delta": 0.2},
}


def study_config(path=None, preset: str | None = None,
                 seed: int | None = None) -> dict:
    """Default study config, optionally overridden by a preset and/or file."""
    cfg = dict(DEFAULT_STUDY)
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; have {sorted(PRESETS)}")
        cfg.update(PRESETS[preset])
    if path is not None:
        cfg.update(load_config(path))
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg
