"""Monte Carlo and closed-form theory for a single ancilla qubit coupled to a Haar-random circuit."""

__version__ = "0.1.0"
