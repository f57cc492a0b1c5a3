#!/usr/bin/env python3
"""
Configuration management for hbl experiment runs.

Handles the space to study, the dyadic and scale parameters, the suites
to run and the sampling seed.
"""
import copy
import json
import os
from pathlib import Path

CONFIG_FILE = Path(__file__).parent / "config.json"
SEED_ENV_VAR = "HBL_SEED"

SUITES = ("geometry", "dyadic", "maximal", "hardy_bmo", "operators")
GENERATORS = ("tree", "path", "grid", "hyperbolic")

DEFAULT_CONFIG = {
    "space": {"generator": "tree", "params": {"q": 3, "depth": 5}},  # or {"path": "space.json"}
    "delta": 0.5,                     # dyadic ratio, in (0, 1)
    "tie_break": "id",                # "id" or "random" (seeded)
    "seed": 0,                        # HBL_SEED env var overrides
    "samples": 200,                   # sampled sets / atoms / sign vectors
    "functions": 6,                   # size of the random test-function corpus

    "scales": {
        "b": 6.0,                     # large scale
        "c": 4.5,                     # small scale, R0/(1-beta) < c < b
        "b0": None,                   # None = next distance >= 1.1 R0/(1-beta)
        "q": 2.0,                     # BMO exponent for scale equivalence
        "r": "inf",                   # atom exponent (only inf is implemented)
    },
    "amp": {"R0": 1.0, "beta": 0.75},

    "geometry": {
        "taus": [2.0, 4.0],
        "bs": [1.0, 2.0, 4.0],
        "kappas": [1.0, 2.0, 3.0],
    },
    "maximal": {"eta_prime": 0.5, "ps": [1.5, 2.0, 4.0]},
    "operators": {
        "b": 2.0,
        "multipliers": [
            {"kind": "heat", "t": 0.5},
            {"kind": "resolvent", "s": 1.0},
            {"kind": "band_limited", "cutoff": 1.0, "width": 0.5},
        ],
    },

    "suites": list(SUITES),
    "out": "results",
}


def _merge(defaults: dict, overrides: dict) -> dict:
    """Merge overrides over defaults, nested sections one level deep."""
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key != "space":
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def load_config(path: str | Path | None = None) -> dict:
    """
    Load configuration from a JSON file merged over the defaults.

    Without a path, config.json next to this module is used and created
    with defaults if it doesn't exist.
    """
    target = Path(path) if path is not None else CONFIG_FILE
    if target.exists():
        with open(target, 'r', encoding='utf-8') as f:
            config = json.load(f)
        return _merge(DEFAULT_CONFIG, config)
    if path is not None:
        raise FileNotFoundError(f"Config file not found: {target}")
    save_config(DEFAULT_CONFIG)
    return copy.deepcopy(DEFAULT_CONFIG)


def save_config(config: dict, path: str | Path | None = None) -> None:
    """Save configuration as JSON."""
    with open(Path(path) if path is not None else CONFIG_FILE, 'w', encoding='utf-8') as f:
        json.dump(config, f, indent=2)


def get_seed(config: dict | None = None) -> int:
    """
    Seed for every sampled procedure.

    Priority:
    1. HBL_SEED env var if set
    2. config["seed"]
    """
    env = os.environ.get(SEED_ENV_VAR)
    if env:
        return int(env)
    if config is None:
        config = load_config()
    return int(config.get("seed", 0))


def _positive(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0


def validate_config(config: dict | None = None) -> tuple[bool, str]:
    """
    Validate configuration is complete and usable.
    Returns (is_valid, error_message); the message names the field.
    """
    if config is None:
        config = load_config()

    suites = config.get("suites", [])
    unknown = [s for s in suites if s not in SUITES]
    if unknown:
        return False, f"suites: unknown suite {unknown[0]}. Must be one of {', '.join(SUITES)}"

    space = config.get("space")
    if not isinstance(space, dict) or not ("generator" in space or "path" in space):
        return False, "space: needs either 'generator' or 'path'"
    if "generator" in space and space["generator"] not in GENERATORS:
        return False, f"space.generator: unknown generator {space['generator']}. Must be one of {', '.join(GENERATORS)}"

    delta = config.get("delta")
    if not (_positive(delta) and delta < 1):
        return False, f"delta: must lie in (0, 1), got {delta}"
    if config.get("tie_break") not in ("id", "random"):
        return False, f"tie_break: must be 'id' or 'random', got {config.get('tie_break')}"

    seed = config.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool):
        return False, f"seed: must be an integer, got {seed!r}"
    env = os.environ.get(SEED_ENV_VAR)
    if env:
        try:
            int(env)
        except ValueError:
            return False, f"{SEED_ENV_VAR}: must be an integer, got {env!r}"
    for key in ("samples", "functions"):
        value = config.get(key)
        if not (isinstance(value, int) and not isinstance(value, bool) and value >= 1):
            return False, f"{key}: must be a positive integer, got {value!r}"

    scales = config.get("scales", {})
    b, c = scales.get("b"), scales.get("c")
    if not _positive(b):
        return False, f"scales.b: must be positive, got {b}"
    if not _positive(c):
        return False, f"scales.c: must be positive, got {c}"
    if scales.get("b0") is not None and not _positive(scales["b0"]):
        return False, f"scales.b0: must be positive or null, got {scales['b0']}"
    q = scales.get("q", 1.0)
    if not (_positive(q) and q >= 1):
        return False, f"scales.q: must be >= 1, got {q}"
    if scales.get("r", "inf") not in ("inf", float("inf")):
        return False, f"scales.r: only 'inf' atoms are implemented, got {scales.get('r')}"

    amp = config.get("amp", {})
    beta, r0 = amp.get("beta"), amp.get("R0")
    if not (_positive(beta) and 0.5 < beta < 1):
        return False, f"amp.beta: must lie in (1/2, 1), got {beta}"
    if not (isinstance(r0, (int, float)) and r0 >= 0):
        return False, f"amp.R0: must be >= 0, got {r0}"

    if "hardy_bmo" in suites:
        if not c < b:
            return False, f"scales.c: c ({c}) must be below b ({b})"
        lower = r0 / (1 - beta)
        if not lower < c:
            return False, f"scales.c: c ({c}) must exceed R0/(1-beta) = {lower:.6g}"

    if "operators" in suites:
        ops = config.get("operators", {})
        if not _positive(ops.get("b")):
            return False, f"operators.b: must be positive, got {ops.get('b')}"
        for i, entry in enumerate(ops.get("multipliers", [])):
            if entry.get("kind") not in ("heat", "resolvent", "polynomial", "band_limited"):
                return False, f"operators.multipliers[{i}].kind: unknown multiplier {entry.get('kind')}"

    return True, ""


if __name__ == "__main__":
    # Show current config when run directly
    config = load_config()
    print("Current configuration:")
    print(json.dumps(config, indent=2))

    is_valid, error = validate_config(config)
    if is_valid:
        print("\nConfiguration is valid.")
        print(f"Seed: {get_seed(config)}")
    else:
        print(f"\nConfiguration error: {error}")
