"""STAR-RIS assisted NOMA downlink simulator with hand-written multi-agent PPO."""

__version__ = "0.1.0"
