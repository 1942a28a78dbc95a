"""hrgc: layered regenerating codes over GF(q^2) with exact repair,
error detection/recovery, and a deterministic adversarial cluster simulator."""

from .field import Field, field_new
from .matrices import CodeProfile, profile_new

__all__ = ["Field", "field_new", "CodeProfile", "profile_new"]
__version__ = "0.1.0"
