"""Sum-rate maximization for interference networks assisted by distributed IRSs."""

__version__ = "0.1.0"
