import numpy as np

from farmsim.exceptions import InvalidScenario


def birth_death_steady_state(arrival_rate: float, service_rate: float, buffer: int) -> np.ndarray:
    """
    Stationary law of a birth-death chain on {0..B} with constant birth rate lambda and death rate mu:
    pi(n) = r^n / sum_{m=0}^{B} r^m, r = lambda / mu.
    """
    if not service_rate > 0:
        raise InvalidScenario(f"Service rate must be positive, got {service_rate}")
    if arrival_rate < 0:
        raise InvalidScenario(f"Arrival rate must be non-negative, got {arrival_rate}")
    if buffer < 1:
        raise InvalidScenario(f"Buffer must be >= 1, got {buffer}")
    pi = np.zeros(buffer + 1)
    if arrival_rate == 0:
        pi[0] = 1.0
        return pi
    # log-space weights stay finite for large and small r
    log_weights = np.arange(buffer + 1) * np.log(arrival_rate / service_rate)
    weights = np.exp(log_weights - log_weights.max())
    return weights / weights.sum()
