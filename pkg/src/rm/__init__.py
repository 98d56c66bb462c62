from __future__ import annotations


class RmError(Exception):
    """Base class for reward-machine definition and stepping errors."""
