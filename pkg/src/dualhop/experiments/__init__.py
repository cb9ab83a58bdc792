"""Configuration-driven reproduction of every figure's data."""
