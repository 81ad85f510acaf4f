"""
Utility functions and constants
"""

import logging
import os
import shutil
import sys
from typing import Optional, TextIO


class Colors:
    """ANSI color codes for terminal output"""
    G = '\033[92m'     # Green
    C = '\033[96m'     # Cyan
    Y = '\033[93m'     # Yellow
    R = '\033[91m'     # Red
    B = '\033[1m'      # Bold
    D = '\033[2m'      # Dim
    X = '\033[0m'      # Reset
    M = '\033[38;5;46m' # Matrix green
    U = '\033[4m'      # Underline

    @classmethod
    def disable(cls) -> None:
        for name in ('G', 'C', 'Y', 'R', 'B', 'D', 'X', 'M', 'U'):
            setattr(cls, name, '')


def use_color(stream: TextIO) -> bool:
    """Colors only on a TTY and only when NO_COLOR is unset"""
    if os.environ.get('NO_COLOR'):
        return False
    return hasattr(stream, 'isatty') and stream.isatty()


def get_terminal_width() -> int:
    """Get terminal width for proper table formatting"""
    return shutil.get_terminal_size(fallback=(120, 24)).columns


def truncate_text(text: str, max_len: int) -> str:
    """Truncate text to fit within max length"""
    if len(text) <= max_len:
        return text
    return text[:max_len-2] + '..'


def format_count(count: float) -> str:
    """1234 -> 1K, 2500000 -> 2.5M"""
    if count >= 1_000_000_000:
        return f"{count/1_000_000_000:.1f}B"
    if count >= 1_000_000:
        return f"{count/1_000_000:.1f}M"
    if count >= 1_000:
        return f"{count/1_000:.0f}K"
    return str(int(count))


class ColorFormatter(logging.Formatter):
    """Renders the level as a bracketed tag: [INFO], [WARN], [ERROR]"""

    TAGS = {
        logging.DEBUG: ('DEBUG', 'D'),
        logging.INFO: ('INFO', 'C'),
        logging.WARNING: ('WARN', 'Y'),
        logging.ERROR: ('ERROR', 'R'),
        logging.CRITICAL: ('ERROR', 'R'),
    }

    def __init__(self, color: bool = True):
        super().__init__('%(message)s')
        self.color = color

    def format(self, record: logging.LogRecord) -> str:
        tag, color = self.TAGS.get(record.levelno, (record.levelname, 'X'))
        message = super().format(record)
        if self.color:
            return f"{getattr(Colors, color)}[{tag}]{Colors.X} {message}"
        return f"[{tag}] {message}"


def setup_logging(verbosity: int = 0, stream: Optional[TextIO] = None) -> logging.Logger:
    """-1 quiet (WARNING), 0 INFO, 1+ DEBUG; one handler on the package logger"""
    stream = stream or sys.stderr
    level = logging.WARNING if verbosity < 0 else logging.DEBUG if verbosity > 0 else logging.INFO
    logger = logging.getLogger('rnd_desk')
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(stream)
    handler.setFormatter(ColorFormatter(color=use_color(stream)))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
    return logger
