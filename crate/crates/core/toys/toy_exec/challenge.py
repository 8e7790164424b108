#!/usr/bin/env python3
"""A tiny jail: one line of code runs with almost no builtins."""
import os
import sys

BANNED = ["import", "open", "__", "eval", "exec", "getattr", "globals", "flag"]


def load_flag():
    here = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(here, "flag.txt")) as handle:
        return handle.read().strip()


def is_safe(code):
    lowered = code.lower()
    for word in BANNED:
        if word in lowered:
            return False
    return True


def main():
    secret = load_flag()
    print("Welcome to the jail. Enter one line of code:")
    code = sys.stdin.readline()
    if not is_safe(code):
        print("Blocked.")
        return 1
    # Only a handful of builtins survive.
    allowed = {"print": print, "len": len, "range": range}
    exec(code, {"__builtins__": allowed, "secret": secret})
    return 0


if __name__ == "__main__":
    sys.exit(main())
