"""Training drivers for the pendulum and rover policies."""

from __future__ import annotations

import json
from pathlib import Path

from .cmaes import CmaesConfig, cma_es_train
from .envs import pendulum_env, rover_env
from .mlp import PENDULUM_SPEC, ROVER_SPEC
from .weights import save_weights

DESK_PENDULUM = CmaesConfig(population=16, generations=60, survival=0.5, sigma0=0.1, seed=7)
FULL_PENDULUM = CmaesConfig(population=50, generations=250, survival=0.5, sigma0=0.1, seed=7)
DESK_ROVER = CmaesConfig(population=32, generations=300, survival=0.5, sigma0=0.5, seed=11, diagonal=True)


def _log(verbose):
    if not verbose:
        return None

    def cb(g, row, es):
        print(f"gen {g:4d} best {row[1]:10.2f} median {row[2]:10.2f} worst {row[3]:10.2f} sigma {es.sigma:.4f}", flush=True)

    return cb


def handover_set(cert_path=None, enter_threshold: float = 0.1):
    """P of the hand-over set {x : x^T P_cert x < enter_threshold}, scaled to level 1."""
    from ..pendulum.roa import EllipsoidCert
    from ..pendulum.runtime import DEFAULT_CERT

    return EllipsoidCert.load(cert_path or DEFAULT_CERT).P / enter_threshold


def train_pendulum(cfg: CmaesConfig = DESK_PENDULUM, env_seed: int = 0, episodes: int = 8, verbose=False,
                   init_P="handover"):
    """``init_P="handover"`` starts episodes inside the shipped hand-over set; None uses the box."""
    if isinstance(init_P, str):
        init_P = handover_set()
    env = pendulum_env(env_seed, episodes=episodes, init_P=init_P)
    return cma_es_train(env, PENDULUM_SPEC, cfg, progress=_log(verbose))


def train_rover(cfg: CmaesConfig = DESK_ROVER, env_seed: int = 0, n_courses: int = 8, verbose=False, zones=True):
    from ..rover.safety import SafetyZones

    env = rover_env(env_seed, n_courses=n_courses, zones=SafetyZones() if zones else None)
    return cma_es_train(env, ROVER_SPEC, cfg, progress=_log(verbose))


def write_outputs(out_dir, name: str, spec, result, cfg: CmaesConfig, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"seed": cfg.seed, "population": cfg.population, "generations": cfg.generations,
            "survival": cfg.survival, "sigma0": cfg.sigma0, "diagonal": cfg.diagonal,
            "best_fitness": result.best_fitness}
    meta.update(extra or {})
    wpath = out / f"{name}.weights"
    save_weights(wpath, spec, result.weights, meta)
    (out / f"{name}_history.csv").write_text(result.history_csv())
    (out / f"{name}_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return wpath
