"""Terminal colouring for verdicts and status lines.

Colour is dropped when NO_COLOR is set or stdout is not a terminal, so
redirected summaries stay plain text.
"""
import os
import sys


class Colors:
    RESET = '\033[0m'
    BOLD = '\033[1m'

    RED = '\033[91m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    CYAN = '\033[96m'
    GRAY = '\033[90m'


def enabled() -> bool:
    if os.environ.get("NO_COLOR"):
        return False
    isatty = getattr(sys.stdout, "isatty", None)
    return bool(isatty and isatty())


def _paint(msg: str, *codes: str) -> str:
    if not enabled():
        return msg
    return f"{''.join(codes)}{msg}{Colors.RESET}"


def warn(msg: str) -> str:
    return _paint(msg, Colors.YELLOW)


def error(msg: str) -> str:
    return _paint(msg, Colors.RED)


def info(msg: str) -> str:
    return _paint(msg, Colors.CYAN)


def success(msg: str) -> str:
    return _paint(msg, Colors.GREEN)


def dim(msg: str) -> str:
    return _paint(msg, Colors.GRAY)


def bold(msg: str) -> str:
    return _paint(msg, Colors.BOLD)


def header(msg: str) -> str:
    """Bold cyan, used for the run banner."""
    return _paint(msg, Colors.BOLD, Colors.CYAN)


_VERDICT_STYLE = {
    "pass": success,
    "fail": error,
    "degenerate": warn,
}


def verdict(v: str) -> str:
    """Colour a verdict string; unknown values are dimmed."""
    return _VERDICT_STYLE.get(v, dim)(v)
