"""Equilibrium AMM liquidity provision with risk offsetting on a centralized exchange."""

__version__ = "0.1.0"
