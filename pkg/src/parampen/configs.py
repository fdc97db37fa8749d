"""Text configuration strings used by the command line.

Penalty strings have the form ``family[:item,item,...]`` where each item is
either a bare word or ``key=value``:

``singular[:GROWTH][,omega=GROWTH][,phi0=C][,omega0=C][,w=C][,norm=N]``
    singular term; GROWTH is ``linear`` (default), ``saturating`` or
    ``clipped``; ``phi0``/``omega0`` scale linear growth functions; ``w=C``
    is the uniform shift direction with norm ``|C|``.
``smooth:exp`` / ``smooth:logsumexp`` [``,p0=P``]
    smoothing approximation made parametric with omega(p) = p; ``p0`` is the
    largest initial parameter tried by the inner solver (default 1).
``l1``, ``linf``, ``distance``, ``quadratic``
    classical terms over the one-point parameter space.
``lianzhang-term[:a=A,w=W]``
    the parametric term Delta / (2 (p + 1) (1 - a Delta)) + p.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .penalty import ParametricPenalty, classical_penalty
from .problem import Norm, Problem
from .singular import SingularConfig, growth_from_name, lianzhang_penalty, singular_penalty
from .smoothing import SMOOTHING_FAMILIES, make_parametric


def _items(text: str):
    family, _, rest = text.strip().partition(":")
    words, keys = [], {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if "=" in item:
            k, v = (s.strip() for s in item.split("=", 1))
            if k in keys:
                raise ConfigurationError(f"duplicate option {k!r} in {text!r}")
            keys[k] = v
        else:
            words.append(item)
    return family.strip(), words, keys


def _float(keys, name, default, text):
    if name not in keys:
        return default
    try:
        return float(keys.pop(name))
    except ValueError:
        raise ConfigurationError(f"option {name!r} in {text!r} must be a number") from None


def uniform_shift(size: int, length: float) -> Optional[np.ndarray]:
    """Shift direction with equal components and Euclidean norm ``|length|``."""
    if length == 0:
        return None
    return np.full(size, length / math.sqrt(size))


def singular_config_from(words, keys, text, problem: Optional[Problem] = None) -> SingularConfig:
    if len(words) > 1:
        raise ConfigurationError(f"too many growth names in {text!r}")
    phi_name = words[0] if words else keys.pop("growth", "linear")
    omega_name = keys.pop("omega", "linear")
    phi0 = _float(keys, "phi0", 1.0, text)
    omega0 = _float(keys, "omega0", 1.0, text)
    w = _float(keys, "w", 0.0, text)
    norm = keys.pop("norm", None)
    if keys:
        raise ConfigurationError(f"unknown options {sorted(keys)} in {text!r}")
    if phi0 <= 0 or omega0 <= 0:
        raise ConfigurationError("phi0 and omega0 must be positive")
    size = problem.constraints.size if problem is not None else 1
    return SingularConfig(
        growth_from_name(phi_name, phi0),
        growth_from_name(omega_name, omega0),
        w=uniform_shift(size, w),
        norm=Norm.parse(norm) if norm else None,
    )


def parse_singular_config(text: str, problem: Optional[Problem] = None) -> SingularConfig:
    """``phi0=1,omega0=1,w=0[,growth=saturating]`` (the ``singular:`` prefix is optional)."""
    body = text if text.startswith("singular") else "singular:" + text
    _, words, keys = _items(body)
    return singular_config_from(words, keys, text, problem)


def parse_penalty(text: str, problem: Problem) -> tuple[ParametricPenalty, dict]:
    """Build the penalty described by ``text``; returns (penalty, options)."""
    family, words, keys = _items(text)
    options = {"penalty": text}
    if family == "singular":
        cfg = singular_config_from(words, keys, text, problem)
        options["config"] = cfg.describe()
        return singular_penalty(problem, cfg, name=text), options
    if family == "smooth":
        if len(words) != 1 or words[0] not in SMOOTHING_FAMILIES:
            raise ConfigurationError(f"smooth penalty needs one of {sorted(SMOOTHING_FAMILIES)}: {text!r}")
        p0 = _float(keys, "p0", 1.0, text)
        if keys:
            raise ConfigurationError(f"unknown options {sorted(keys)} in {text!r}")
        if p0 <= 0:
            raise ConfigurationError("p0 must be positive")
        options["p0"] = p0
        approx = SMOOTHING_FAMILIES[words[0]](problem)
        return make_parametric(approx), options
    if family in ("l1", "linf", "distance", "quadratic"):
        if words or keys:
            raise ConfigurationError(f"{family} takes no options")
        return classical_penalty(problem, family), options
    if family == "lianzhang-term":
        a = _float(keys, "a", 1.0, text)
        w = _float(keys, "w", 1.0, text)
        if words or keys:
            raise ConfigurationError(f"unknown options in {text!r}")
        return lianzhang_penalty(problem, a=a, w=w), options
    raise ConfigurationError(f"unknown penalty family {family!r}")


def parse_ladder(text: str) -> tuple:
    """``start:ratio:count`` -> geometric ladder tuple."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigurationError(f"ladder must be start:ratio:count, got {text!r}")
    try:
        start, ratio, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigurationError(f"ladder must be start:ratio:count, got {text!r}") from None
    if start <= 0 or ratio <= 1 or count < 1:
        raise ConfigurationError("ladder needs start > 0, ratio > 1, count >= 1")
    return (start, ratio, count)


def parse_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(s) for s in text.split(",") if s.strip()])
    except ValueError:
        raise ConfigurationError(f"expected comma-separated numbers, got {text!r}") from None
