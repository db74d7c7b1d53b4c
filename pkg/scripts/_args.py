"""Build an argparse parser from a dataclass so every config field is a --flag."""

import argparse
import dataclasses


def parse_into(cls, description: str, argv=None):
    ap = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        flag = "--" + f.name.replace("_", "-")
        if f.type in (bool, "bool"):
            ap.add_argument(flag, action=argparse.BooleanOptionalAction, default=f.default)
        elif f.type in ("tuple[float, float, float]",):
            ap.add_argument(flag, type=float, nargs=3, default=f.default)
        else:
            kind = {"int": int, "float": float, "str": str}.get(f.type if isinstance(f.type, str) else f.type.__name__, str)
            ap.add_argument(flag, type=kind, default=f.default)
    ns = ap.parse_args(argv)
    return cls(**{f.name: (tuple(v) if isinstance(v, list) else v)
                  for f, v in ((f, getattr(ns, f.name)) for f in dataclasses.fields(cls))})
