"""martkit: martingale tail bounds and their empirical verification.

The toolkit evaluates a family of closed-form concentration bounds for
martingales whose increments satisfy a conditional Bernstein condition
(scale epsilon) and whose quadratic characteristic is close to 1 (deviation
delta^2), simulates martingale families that provably satisfy those
conditions, and checks every bound by plain and conjugate-measure
importance-sampled Monte Carlo, including two statistical applications
(least-squares regression deviations and self-normalized sums).
"""

__version__ = "0.1.0"
