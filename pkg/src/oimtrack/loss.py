"""Two-level instance-matching loss with a dynamic task weight.

The first level separates persons from background: a tempered softmax over
all stored memory rows is collapsed, by total probability, into
``p(person) = sum of identity-row probabilities`` and
``p(background) = sum of queue-row probabilities``, and supervised with a
binary cross entropy.  The second level classifies identity with a softmax
restricted to the identity rows, supervised with a negative log-likelihood.
The combined objective is

    total = detection_loss + lam * identity_loss,   lam = 2 * p(person)^2,

so the identity task gains weight exactly as detection confidence grows.

All math is 64-bit.  Probabilities are clamped to
[PROB_EPS, 1 - PROB_EPS] before logs, and the analytic gradient treats a
clamped probability as constant, so it agrees with finite differences of
the same clamped objective.  ``lam`` is held constant during
differentiation (stop-gradient) and the memory rows never receive
gradients; they evolve only through the memory module's momentum updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .memory import ProjectionMemory

PROB_EPS = 1e-12


def class_probabilities(scores, temperature: float) -> np.ndarray:
    """Tempered softmax ``exp(s_i / tau) / sum_j exp(s_j / tau)``.

    Uses max-subtraction so that extreme score/temperature combinations
    (e.g. scores near +-1 with tau = 1/30) cannot overflow.
    """
    scores = np.asarray(scores, dtype=float)
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    z = scores / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def person_probability(probs, n_identities: int) -> float:
    """Total probability of the identity rows: ``sum(p_1..p_N)``."""
    probs = np.asarray(probs, dtype=float)
    if not (0 < n_identities <= probs.shape[0]):
        raise ValueError(
            f"n_identities must be in 1..{probs.shape[0]}, got {n_identities}"
        )
    return float(probs[:n_identities].sum())


def background_probability(probs, n_identities: int) -> float:
    """Total probability of the background rows: ``sum(p_{N+1}..p_{N+B})``."""
    probs = np.asarray(probs, dtype=float)
    if not (0 < n_identities <= probs.shape[0]):
        raise ValueError(
            f"n_identities must be in 1..{probs.shape[0]}, got {n_identities}"
        )
    return float(probs[n_identities:].sum())


def detection_loss(person_prob: float, y: int) -> float:
    """Binary cross entropy on the person/background split.

    ``-y*ln(p_person) - (1-y)*ln(1 - p_person)`` with the probability
    clamped away from 0 and 1 first.
    """
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    p = min(max(float(person_prob), PROB_EPS), 1.0 - PROB_EPS)
    return -np.log(p) if y == 1 else -np.log(1.0 - p)


def identity_probability(scores, temperature: float, k: int, n_identities: int) -> float:
    """Softmax over the first ``n_identities`` scores only, at identity ``k``.

    Background rows are excluded from the denominator; ``k`` is 1-based.
    """
    scores = np.asarray(scores, dtype=float)
    if not (1 <= k <= n_identities):
        raise ValueError(f"identity index must be in 1..{n_identities}, got {k}")
    q = class_probabilities(scores[:n_identities], temperature)
    return float(q[k - 1])


def oim_loss(scores, temperature: float, k: int, n_identities: int) -> float:
    """Identity negative log-likelihood: ``-ln identity_probability``."""
    q = identity_probability(scores, temperature, k, n_identities)
    q = min(max(q, PROB_EPS), 1.0 - PROB_EPS)
    return float(-np.log(q))


@dataclass(frozen=True)
class LossBreakdown:
    """One sample's loss terms.

    ``oim_loss`` is None for backgrounds and for persons without an
    identity label; ``total == detection_loss + lam * oim_loss`` with the
    identity term absent in those cases, and ``lam == 2 * person_prob**2``.
    """

    detection_loss: float
    oim_loss: float | None
    lam: float
    total: float
    person_prob: float


def _validate_labels(y: int, k: int | None) -> None:
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    if y == 0 and k is not None:
        raise ValueError("background samples cannot carry an identity index")


def _detection_score_gradient(p: np.ndarray, n_identities: int, y: int,
                              temperature: float) -> np.ndarray:
    """Score gradient of the detection BCE; zero where the clamp is active."""
    if y == 1:
        group = float(p[:n_identities].sum())
        indicator = np.zeros_like(p)
        indicator[:n_identities] = 1.0
    else:
        group = float(p[n_identities:].sum())
        indicator = np.zeros_like(p)
        indicator[n_identities:] = 1.0
    if not (PROB_EPS < group < 1.0 - PROB_EPS):
        return np.zeros_like(p)
    return -p * (indicator - group) / (temperature * group)


def ihoim_loss(mem: ProjectionMemory, x, y: int, k: int | None = None) -> LossBreakdown:
    """Full hierarchical loss for one proposal embedding.

    ``y`` is the person/background label; ``k`` (1-based) is the identity of
    a labeled person and must be None for backgrounds.  Persons without an
    identity label (``y=1, k=None``) contribute the detection term only.
    """
    _validate_labels(y, k)
    s = mem.project(x)
    p = class_probabilities(s, mem.temperature)
    p_person = person_probability(p, mem.n_identities)
    # The background log uses the directly summed background mass rather
    # than 1 - p_person, which loses precision when p_person is near 1.
    if y == 1:
        l_det = -np.log(min(max(p_person, PROB_EPS), 1.0 - PROB_EPS))
    else:
        p_bg = background_probability(p, mem.n_identities)
        l_det = -np.log(min(max(p_bg, PROB_EPS), 1.0 - PROB_EPS))
    lam = 2.0 * p_person * p_person
    if y == 1 and k is not None:
        l_oim = oim_loss(s, mem.temperature, k, mem.n_identities)
        total = l_det + lam * l_oim
    else:
        l_oim = None
        total = l_det
    return LossBreakdown(
        detection_loss=float(l_det),
        oim_loss=l_oim,
        lam=float(lam),
        total=float(total),
        person_prob=p_person,
    )


def ihoim_gradient(mem: ProjectionMemory, x, y: int, k: int | None = None) -> np.ndarray:
    """Analytic gradient of the combined loss with respect to ``x``.

    The dynamic weight ``lam`` is frozen at its forward-pass value, and
    terms whose probability was clamped contribute zero (the clamped
    objective is locally constant there), so this matches central finite
    differences of :func:`ihoim_loss` with the same frozen ``lam``.
    """
    _validate_labels(y, k)
    s = mem.project(x)
    tau = mem.temperature
    n = mem.n_identities
    p = class_probabilities(s, tau)
    p_person = person_probability(p, n)
    lam = 2.0 * p_person * p_person

    # dL/ds for the detection term: d(-ln p_group)/ds_j =
    # -p_j (1_group(j) - p_group) / (tau p_group) for the labeled group,
    # using each group's directly summed mass for conditioning.
    g_s = _detection_score_gradient(p, n, y, tau)

    # dL/ds for the identity term, restricted to the first N scores.
    if y == 1 and k is not None:
        if not (1 <= k <= n):
            raise ValueError(f"identity index must be in 1..{n}, got {k}")
        q = class_probabilities(s[:n], tau)
        if PROB_EPS < q[k - 1] < 1.0 - PROB_EPS:
            g_oim = q / tau
            g_oim[k - 1] -= 1.0 / tau
            g_s[:n] += lam * g_oim

    return mem.w.T @ g_s
