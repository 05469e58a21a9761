"""Command line entry point: ``kaclab <scenario> [options]``.

Exit codes: 0 when every scenario assertion holds, 1 when one fails, 2 for
configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import sys

from .scenarios import SCENARIOS, ConfigError, ScenarioConfig, run_scenario

# config-file keys and their types; the same names as the long flags
_KEYS = {
    "N": str, "samples": int, "seed": int, "eta": float, "eps_rule": str,
    "beta_rule": str, "alpha_rule": str, "m": float, "csv": str, "svg": str,
}


def read_config(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _KEYS and key != "scenario":
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kaclab", description=__doc__.splitlines()[0])
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--N", help="comma separated, strictly increasing, e.g. 50,100,200")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--eps-rule", dest="eps_rule", help="'invlog' (1/ln(N+e)) or a number")
    p.add_argument("--beta-rule", dest="beta_rule", help="'sqrt', 'log' or a number")
    p.add_argument("--alpha-rule", dest="alpha_rule", help="'adaptive' or a number in (0,1)")
    p.add_argument("--m", type=float, help="fixed polynomial power")
    p.add_argument("--csv")
    p.add_argument("--svg")
    p.add_argument("--config", help="flat key = value file; flags override it")
    return p


def config_from_args(args) -> ScenarioConfig:
    values = {}
    if args.config:
        for k, v in read_config(args.config).items():
            if k != "scenario":
                values[k] = _KEYS[k](v)
    for k in _KEYS:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    n = values.pop("N", None)
    if n is not None:
        try:
            values["N_list"] = tuple(int(x) for x in str(n).split(",") if x.strip())
        except ValueError as exc:
            raise ConfigError(f"bad N list {n!r}") from exc
    return ScenarioConfig(args.scenario, **values)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        result = run_scenario(cfg)
    except Exception as exc:
        print(f"kaclab: error: {exc}", file=sys.stderr)
        return 2
    for name, ok in result.assertions:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{cfg.scenario}: {result.verdict}  ({result.wall_time:.1f} s)")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
