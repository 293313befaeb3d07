"""Twisted Selberg zeta functions of ping-pong Fuchsian groups by Euler
products and by Fredholm determinants of twisted transfer operators."""
from __future__ import annotations

__version__ = "0.1.0"
