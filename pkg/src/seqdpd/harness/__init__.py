"""Config-driven experiment runner (sweeps, CSV and figure output, CLI)."""
