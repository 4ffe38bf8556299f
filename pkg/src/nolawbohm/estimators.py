"""scikit-learn style wrappers around ensemble runs and lower probabilities.

``fit`` takes a wave function (the "data" that fixes the dynamics and the
equilibrium measure); hyperparameters live in ``__init__`` so ``get_params``
and ``set_params`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .ensemble import crossings, estimate_event_prob, run_ensemble
from .foliation import FlatFoliation
from .nolaw import default_family, is_typical, p_star, simulate_family


class BohmianEnsemble(BaseEstimator):
    """Equilibrium ensemble transported along one foliation.

    ``fit(wf)`` samples on leaf(s_start) and integrates to leaf(s_stop).
    ``transform(s)`` returns the configurations (M, N) where the world lines
    cross leaf(s) of ``leaves`` (default: the same foliation).
    """

    def __init__(self, foliation=None, n_samples=1000, s_start=0.0, s_stop=2.0, step=1e-2, record_every=5, seed=0,
                 threads=None):
        self.foliation = foliation
        self.n_samples = n_samples
        self.s_start = s_start
        self.s_stop = s_stop
        self.step = step
        self.record_every = record_every
        self.seed = seed
        self.threads = threads

    def fit(self, wf, y=None):
        fol = FlatFoliation(0.0) if self.foliation is None else self.foliation
        self.foliation_ = fol
        self.run_ = run_ensemble(
            wf, fol, self.n_samples, self.seed, self.s_start, self.s_stop, self.step, self.record_every,
            threads=self.threads,
        )
        self.n_particles_ = wf.n_particles
        return self

    def transform(self, s, leaves=None):
        check_is_fitted(self, "run_")
        fol = self.foliation_ if leaves is None else leaves
        return crossings(self.run_, fol, s)[..., 1]

    def predict_proba(self, events):
        """Estimated probability of each event on the fitted run."""
        check_is_fitted(self, "run_")
        return np.array([estimate_event_prob(e, self.run_).value for e in events])


class LowerProbability(BaseEstimator):
    """P* over a foliation family; ``predict(events)`` gives one value per event."""

    def __init__(self, family=None, n_samples=1000, seed=0, step=5e-2, record_every=2, epsilon=0.02, threads=None):
        self.family = family
        self.n_samples = n_samples
        self.seed = seed
        self.step = step
        self.record_every = record_every
        self.epsilon = epsilon
        self.threads = threads

    def fit(self, wf, y=None):
        fam = default_family() if self.family is None else self.family
        self.family_ = fam
        self.runs_ = simulate_family(wf, fam, self.n_samples, self.seed, self.step, self.record_every, self.threads)
        return self

    def estimate(self, event):
        check_is_fitted(self, "runs_")
        return p_star(event, runs=self.runs_)

    def predict(self, events):
        return np.array([self.estimate(e).value for e in events])

    def typical(self, event):
        return is_typical(self.estimate(event), self.epsilon)


__all__ = ["BohmianEnsemble", "LowerProbability"]
