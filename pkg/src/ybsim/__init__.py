"""Simulation and analysis toolkit for a cavity-coupled single 171Yb:YVO spin qubit."""

__version__ = "0.1.0"
