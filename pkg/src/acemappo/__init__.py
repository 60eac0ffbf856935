"""Two-team air-combat simulator and a MAPPO trainer extended with evolutionary
soft updates, prioritized trajectory replay and an opponent curriculum."""

__version__ = "0.1.0"
