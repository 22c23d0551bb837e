import math

from penaltylearn.errors import DomainError


def bic_predict(n: int) -> float:
    """Unsupervised penalty log(lambda) = log(log(N))

    Raises:
        DomainError: if N <= 1
    """
    if n <= 1:
        raise DomainError(f"BIC prediction needs at least 2 points (got {n})")
    return math.log(math.log(n))
