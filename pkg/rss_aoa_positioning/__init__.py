"""Hybrid RSS/AoA 3D positioning: closed-form WLS/LS estimators and an MLP on linearized features."""

from __future__ import annotations

from .const import VERSION

__version__ = VERSION
