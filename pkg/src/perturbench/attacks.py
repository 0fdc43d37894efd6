"""White-box gradient attacks and campaign bookkeeping.

Both attacks ascend the cross-entropy loss of the true label under an L-inf
budget epsilon in normalized pixel units:

- fgsm: one signed step, x_adv = clip_[0,1](x + eps * sign(dJ/dx)).
- bim: iterated signed steps of size step_size, each re-evaluating the
  gradient at the current iterate and clipping to the eps-ball around the
  original image intersected with [0,1].

sign(0) is 0, so zero-gradient pixels are never touched. A campaign attacks
every record whose original prediction is correct with confidence above the
gate tau; success additionally requires the adversarial prediction to be
wrong with confidence above tau.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError
from .models import forward_infer, input_gradient

ALGORITHMS = ("fgsm", "bim")
DEFAULT_CONFIDENCE_GATE = 0.7


@dataclass(frozen=True)
class AttackConfig:
    algorithm: str
    epsilon: float
    step_size: float = None  # bim only; defaults to epsilon / 4
    iterations: int = 10  # bim only
    confidence_threshold: float = DEFAULT_CONFIDENCE_GATE

    def resolved_step(self):
        return self.epsilon / 4 if self.step_size is None else self.step_size

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"attack.algorithm: {self.algorithm!r} is not one of {', '.join(ALGORITHMS)}"
            )
        if not 0 <= self.epsilon <= 1:
            raise ConfigurationError(
                f"attack.epsilon: must lie in [0, 1], got {self.epsilon}"
            )
        if not 0 <= self.confidence_threshold <= 1:
            raise ConfigurationError(
                f"attack.confidence_threshold: must lie in [0, 1], got {self.confidence_threshold}"
            )
        if self.algorithm == "bim":
            if self.iterations < 1:
                raise ConfigurationError(
                    f"attack.iterations: must be >= 1, got {self.iterations}"
                )
            step = self.resolved_step()
            if not step > 0:
                raise ConfigurationError(f"attack.step_size: must be > 0, got {step}")
            # at epsilon 0 the clip ball is a point, any step size collapses
            if self.epsilon > 0 and step > self.epsilon:
                raise ConfigurationError(
                    f"attack.step_size: {step} exceeds the budget epsilon {self.epsilon}"
                )


@dataclass
class AttackRecord:
    index: int
    label: int
    original_class: int
    original_confidence: float
    adversarial_class: int = None
    adversarial_confidence: float = None
    perturbation: np.ndarray = None
    linf: float = 0.0
    l2: float = 0.0
    success: bool = False
    skipped: bool = False


@dataclass
class CampaignResult:
    config: AttackConfig
    records: list
    attacked: int
    misclassified: int
    fooling_rate: float
    degenerate: bool
    pair_counts: dict  # (source class, target class) -> successful attacks
    num_classes: int

    def target_counts(self):
        """Successful adversarial examples per (wrong) predicted class."""
        counts = np.zeros(self.num_classes, dtype=np.int64)
        for (_, target), n in self.pair_counts.items():
            counts[target] += n
        return counts


def fooling_rate(misclassified, attacked):
    """misclassified / attacked; 0.0 for the degenerate empty campaign."""
    if misclassified < 0 or attacked < 0:
        raise InputError("fooling_rate: counts must be non-negative")
    if misclassified > attacked:
        raise InputError(
            f"fooling_rate: misclassified ({misclassified}) exceeds attacked ({attacked})"
        )
    if attacked == 0:
        return 0.0
    return misclassified / attacked


def attack_success(original, adversarial, label, threshold=DEFAULT_CONFIDENCE_GATE):
    """The confidence-gated success predicate.

    original/adversarial are (class, confidence) pairs. True iff the clean
    prediction was right and confident (> threshold) and the adversarial
    prediction is wrong and equally confident.
    """
    orig_class, orig_conf = original
    adv_class, adv_conf = adversarial
    return (
        orig_class == label
        and orig_conf > threshold
        and adv_class != label
        and adv_conf > threshold
    )


def _clip01(x):
    return np.clip(x, 0.0, 1.0)


def fgsm(model, x, label, epsilon):
    """One signed gradient-ascent step of size epsilon, clipped to [0,1]."""
    x = np.asarray(x, dtype=np.float64)
    if epsilon == 0:
        return x.copy()
    grad = input_gradient(model, x, label)
    return _clip01(x + epsilon * np.sign(grad))


def bim(model, x, label, epsilon, step_size, iterations):
    """Iterated signed steps, each clipped to the epsilon ball and [0,1]."""
    x = np.asarray(x, dtype=np.float64)
    lo = np.maximum(x - epsilon, 0.0)
    hi = np.minimum(x + epsilon, 1.0)
    current = x.copy()
    for _ in range(iterations):
        grad = input_gradient(model, current, label)
        current = np.clip(current + step_size * np.sign(grad), lo, hi)
    return current


def perturb(model, x, label, config):
    if config.algorithm == "fgsm":
        return fgsm(model, x, label, config.epsilon)
    return bim(model, x, label, config.epsilon, config.resolved_step(), config.iterations)


def run_campaign(model, dataset, config):
    """Attack every gate-passing record of the dataset; never mutates the model.

    Records whose original prediction is already wrong, or right but with
    confidence <= tau, are skipped (attacking a misclassified image is
    meaningless under the success definition).
    """
    config.validate()
    if len(dataset) == 0:
        raise InputError("run_campaign: dataset is empty")
    tau = config.confidence_threshold
    records = []
    pair_counts = {}
    attacked = 0
    successes = 0
    for i in range(len(dataset)):
        x = dataset.images[i]
        y = int(dataset.labels[i])
        orig_class, orig_conf, _ = forward_infer(model, x)
        rec = AttackRecord(i, y, orig_class, orig_conf)
        if orig_class != y or orig_conf <= tau:
            rec.skipped = True
            records.append(rec)
            continue
        attacked += 1
        x_adv = perturb(model, x, y, config)
        adv_class, adv_conf, _ = forward_infer(model, x_adv)
        rho = x_adv - x
        rec.adversarial_class = adv_class
        rec.adversarial_confidence = adv_conf
        rec.perturbation = rho
        rec.linf = float(np.abs(rho).max())
        rec.l2 = float(np.sqrt((rho * rho).sum()))
        rec.success = attack_success((orig_class, orig_conf), (adv_class, adv_conf), y, tau)
        if rec.success:
            successes += 1
            key = (y, adv_class)
            pair_counts[key] = pair_counts.get(key, 0) + 1
        records.append(rec)
    return CampaignResult(
        config=config,
        records=records,
        attacked=attacked,
        misclassified=successes,
        fooling_rate=fooling_rate(successes, attacked),
        degenerate=attacked == 0,
        pair_counts=pair_counts,
        num_classes=dataset.num_classes,
    )
