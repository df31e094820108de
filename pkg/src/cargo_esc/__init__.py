"""Fully-actuated cargo multirotor simulation with online CoM estimation."""

__version__ = "0.1.0"
