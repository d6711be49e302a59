"""(mu/mu_w, lambda) CMA-ES for fitness maximization.

Follows the standard formulation (weighted recombination, cumulative
step-size adaptation, rank-one plus rank-mu covariance update).  With
``diagonal=True`` only the diagonal of C is adapted (separable CMA-ES,
learning rates scaled by (n + 2) / 3), which keeps memory and time linear
in the dimension for large networks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..sim.rng import seeded_rng


@dataclass(frozen=True)
class CmaesConfig:
    population: int = 16
    generations: int = 60
    survival: float = 0.5
    sigma0: float = 0.5
    seed: int = 0
    diagonal: bool = False

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be >= 4")
        if not 0 < self.survival <= 1:
            raise ValueError("survival must be in (0, 1]")
        if self.generations < 1 or not self.sigma0 > 0:
            raise ValueError("generations >= 1 and sigma0 > 0 required")

    @property
    def mu(self) -> int:
        return max(1, int(round(self.survival * self.population)))


class CmaEs:
    def __init__(self, x0, cfg: CmaesConfig, rng=None):
        self.cfg = cfg
        self.mean = np.array(x0, dtype=float)
        n = self.n = self.mean.size
        self.sigma = cfg.sigma0
        self.rng = rng if rng is not None else seeded_rng(cfg.seed, "cma-es")
        lam, mu = cfg.population, cfg.mu
        w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights**2)
        me = self.mueff
        self.cs = (me + 2) / (n + me + 5)
        self.ds = 1 + 2 * max(0.0, math.sqrt((me - 1) / (n + 1)) - 1) + self.cs
        self.cc = (4 + me / n) / (n + 4 + 2 * me / n)
        self.c1 = 2 / ((n + 1.3) ** 2 + me)
        self.cmu = min(1 - self.c1, 2 * (me - 2 + 1 / me) / ((n + 2) ** 2 + me))
        if cfg.diagonal:
            scale = (n + 2) / 3
            self.c1 = min(1.0, self.c1 * scale)
            self.cmu = min(1 - self.c1, self.cmu * scale)
        self.chin = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
        self.ps = np.zeros(n)
        self.pc = np.zeros(n)
        if cfg.diagonal:
            self.diagC = np.ones(n)
        else:
            self.C = np.eye(n)
            self.B = np.eye(n)
            self.D = np.ones(n)
            self.invsqrtC = np.eye(n)
            self._eigen_gen = 0
        self.gen = 0
        self._z = None
        self._y = None

    def ask(self) -> np.ndarray:
        lam = self.cfg.population
        z = self.rng.standard_normal((lam, self.n))
        if self.cfg.diagonal:
            y = z * np.sqrt(self.diagC)
        else:
            y = (z * self.D) @ self.B.T
        self._z, self._y = z, y
        return self.mean + self.sigma * y

    def tell(self, fitness) -> np.ndarray:
        """Update from the fitness of the last ``ask`` batch; returns the ranking."""
        f = np.asarray(fitness, dtype=float)
        f = np.where(np.isfinite(f), f, -np.inf)
        # stable sort on -f keeps ties in candidate order
        order = np.argsort(-f, kind="stable")
        mu, n = self.cfg.mu, self.n
        ysel = self._y[order[:mu]]
        yw = self.weights @ ysel
        self.mean = self.mean + self.sigma * yw
        if self.cfg.diagonal:
            csn = yw / np.sqrt(self.diagC)
        else:
            csn = self.invsqrtC @ yw
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * csn
        self.gen += 1
        norm_ps = np.linalg.norm(self.ps)
        hsig = norm_ps / math.sqrt(1 - (1 - self.cs) ** (2 * self.gen)) / self.chin < 1.4 + 2 / (n + 1)
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * yw
        dh = (1 - hsig) * self.cc * (2 - self.cc)
        if self.cfg.diagonal:
            self.diagC = ((1 - self.c1 - self.cmu) * self.diagC
                          + self.c1 * (self.pc**2 + dh * self.diagC)
                          + self.cmu * (self.weights @ (ysel**2)))
        else:
            self.C = ((1 - self.c1 - self.cmu) * self.C
                      + self.c1 * (np.outer(self.pc, self.pc) + dh * self.C)
                      + self.cmu * (ysel.T * self.weights) @ ysel)
            # lazy eigendecomposition, as in the reference implementation
            if self.gen - self._eigen_gen > (self.c1 + self.cmu) ** -1 / n / 10:
                self._eigen_gen = self.gen
                self.C = np.triu(self.C) + np.triu(self.C, 1).T
                d2, self.B = np.linalg.eigh(self.C)
                self.D = np.sqrt(np.maximum(d2, 1e-300))
                self.invsqrtC = (self.B / self.D) @ self.B.T
        self.sigma *= math.exp((self.cs / self.ds) * (norm_ps / self.chin - 1))
        return order


@dataclass
class TrainResult:
    weights: np.ndarray
    best_fitness: float
    history: list = field(default_factory=list)  # (generation, best, median, worst)
    mean_history: list = field(default_factory=list)

    def history_csv(self) -> str:
        rows = ["generation,best,median,worst"]
        rows += [f"{g},{b!r},{m!r},{w!r}" for g, b, m, w in self.history]
        return "\n".join(rows) + "\n"


def _fitness_of(env, spec, w) -> float:
    try:
        f = float(env.evaluate(spec, w))
    except (FloatingPointError, OverflowError, ValueError, ArithmeticError):
        return -math.inf
    return f if math.isfinite(f) else -math.inf


def cma_es_train(env, spec, cfg: CmaesConfig, x0=None, progress=None, keep_means: bool = False) -> TrainResult:
    """Maximize ``env.evaluate(spec, w)`` over the flat weights of ``spec``.

    Candidates are evaluated in index order, so results do not depend on
    how evaluation might be parallelized.  The returned weights are the best
    candidate seen over the whole run.
    """
    from .mlp import param_count

    n = param_count(spec)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    es = CmaEs(x0, cfg)
    best_w, best_f = x0.copy(), -math.inf
    res = TrainResult(best_w, best_f)
    for g in range(cfg.generations):
        X = es.ask()
        f = np.array([_fitness_of(env, spec, x) for x in X])
        order = es.tell(f)
        srt = f[order]
        res.history.append((g, float(srt[0]), float(np.median(srt)), float(srt[-1])))
        if keep_means:
            res.mean_history.append(es.mean.copy())
        if srt[0] > best_f:
            best_f = float(srt[0])
            best_w = X[order[0]].copy()
        if progress is not None:
            progress(g, res.history[-1], es)
    res.weights = best_w
    res.best_fitness = best_f
    return res
