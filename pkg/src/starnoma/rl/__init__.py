"""Reinforcement-learning environment, networks and training loops."""
