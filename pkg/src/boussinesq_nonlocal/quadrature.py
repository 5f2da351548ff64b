import numpy as np


def simpson_weights(n: int, a: float = 0.0, b: float = 1.0) -> np.ndarray:
    """Composite Simpson weights on ``n`` uniform nodes over ``[a, b]``.

    Falls back to the trapezoid rule when ``n`` is even (odd interval count).
    """
    if n < 2:
        raise ValueError("need at least two quadrature nodes")
    h = (b - a) / (n - 1)
    if n % 2 == 0 or n == 2:
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        return w
    w = np.empty(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def simpson(values: np.ndarray, a: float, b: float, axis: int = 0) -> np.ndarray:
    w = simpson_weights(values.shape[axis], a, b)
    return np.tensordot(w, values, axes=([0], [axis]))


def cumulative_simpson_even(values: np.ndarray, h: float) -> np.ndarray:
    """Composite Simpson integrals from the first node to every even-indexed node (axis 0)."""
    pairs = (values[0:-2:2] + 4.0 * values[1:-1:2] + values[2::2]) * (h / 3.0)
    out = np.zeros((pairs.shape[0] + 1,) + values.shape[1:], dtype=np.result_type(values, float))
    np.cumsum(pairs, axis=0, out=out[1:])
    return out


def richardson_slope(errors, refinement: float = 2.0) -> np.ndarray:
    """Observed orders ``log(e_k / e_{k+1}) / log(refinement)`` for successive halvings."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(refinement)
