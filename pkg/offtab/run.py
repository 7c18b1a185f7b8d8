""" Module for running Monte Carlo sweeps and fitting convergence rates """
import sys
import math
import copy
import hashlib
import logging
from dataclasses import dataclass, field, asdict, fields
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd
import statsmodels.api as sm

from .errors import OfftabError, ValidationError
from .anchor import sample_anchors
from .instances import generate_instance, generate_anchor_instance
from .io import read_document, load_mdp, load_policy, load_anchor_instance, rows_to_csv
from .mdp_core import Policy
from .plugin import fit_plugin, unvisited_pairs
from .trajectory import RngStream, roll_episodes
from .uniform_ope import GLOBAL_MODES, DEFAULT_CAP
from .metric_types import metric_names, get_metric, cached_rollout, log

DEFAULT_METRICS = ['local_ope', 'suboptimality', 'l1_row']
DATA_STREAM = 0


@dataclass
class SweepConfig:
    """ Configuration of a Monte Carlo sweep.

        Attributes:
            mdp (dict): a generator spec (family, S, A, H, seed) or {'file': path}.
            behavior (str): 'instance' (the generator's behavior policy), 'uniform',
                or a policy file path.
            n_grid (list): strictly increasing episode counts.
            replicates (int): R, replicates per grid point.
            metrics (list): registered metric names.
            eps_opt (float): local-class radius; sqrt(H/S)/2 when None.
            local_samples (int): M for the local class.
            global_samples (int): M for the sampled global class.
            global_mode (str): 'auto', 'exhaustive' or 'sampled'.
            enumeration_cap (int): the largest global class enumerated.
            task_count (int): K for the task-agnostic metric.
            reward_count (int): batch size for the reward-free metric.
            anchor (dict): generator spec (S, A, H, K, seed, near_tie) or {'file': path}.
            base_seed (int): the sweep's root seed.
            threads (int): worker processes.
            cache (bool): whether to cache rolled datasets with compress-pickle.
    """
    mdp: dict = field(default_factory=lambda: {'family': 'near_tie', 'S': 4, 'A': 2,
                                               'H': 5, 'seed': 0})
    behavior: str = 'instance'
    n_grid: list = field(default_factory=lambda: [256, 1024, 4096, 16384])
    replicates: int = 100
    metrics: list = field(default_factory=lambda: list(DEFAULT_METRICS))
    eps_opt: float = None
    local_samples: int = 200
    global_samples: int = 200
    global_mode: str = 'auto'
    enumeration_cap: int = DEFAULT_CAP
    task_count: int = 50
    reward_count: int = 200
    anchor: dict = field(default_factory=lambda: {'S': 20, 'A': 3, 'H': 5, 'K': 6, 'seed': 0,
                                                  'near_tie': True})
    base_seed: int = 0
    threads: int = 1
    cache: bool = False

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ValidationError('config', "expected a mapping of config keys")
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ValidationError(key, f"unknown config key; choose from {sorted(known)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def to_dict(self):
        return asdict(self)

    def validate(self):
        """ Check the config, raising ValidationError at the first bad key. """
        grid = self.n_grid
        if not isinstance(grid, list) or not grid:
            raise ValidationError('n_grid', "must be a non-empty list")
        for i, n in enumerate(grid):
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise ValidationError(f"n_grid[{i}]", f"must be a positive integer, got {n!r}")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError('n_grid', "must be strictly increasing")
        for key in ('replicates', 'local_samples', 'global_samples', 'task_count',
                    'reward_count', 'threads', 'enumeration_cap'):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValidationError(key, f"must be a positive integer, got {value!r}")
        if not self.metrics:
            raise ValidationError('metrics', "at least one metric is required")
        for i, name in enumerate(self.metrics):
            if name not in metric_names():
                raise ValidationError(f"metrics[{i}]", f"unknown metric `{name}`; choose from "
                                      f"{metric_names()}")
        if self.global_mode not in GLOBAL_MODES:
            raise ValidationError('global_mode', f"choose from {GLOBAL_MODES}")
        if self.eps_opt is not None and (not math.isfinite(self.eps_opt) or self.eps_opt < 0):
            raise ValidationError('eps_opt', f"must be finite and >= 0, got {self.eps_opt!r}")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ValidationError('base_seed', f"must be a non-negative integer, "
                                  f"got {self.base_seed!r}")


def load_config(path):
    """ Read a SweepConfig from a JSON or YAML file. """
    return SweepConfig.from_dict(read_document(path))


def build_instance(cfg):
    """ The truth and behavior policy of a sweep. """
    if 'file' in cfg.mdp:
        truth = load_mdp(cfg.mdp['file'])
        mu = Policy.uniform(truth.H, truth.S, truth.A)
    else:
        truth, mu = generate_instance(cfg.mdp)
    if cfg.behavior == 'uniform':
        mu = Policy.uniform(truth.H, truth.S, truth.A)
    elif cfg.behavior != 'instance':
        mu = load_policy(cfg.behavior, truth)
    return truth, mu


def build_anchor(cfg):
    if 'file' in cfg.anchor:
        return load_anchor_instance(cfg.anchor['file'])
    return generate_anchor_instance(**cfg.anchor)


def _name_key(name):
    """ A stable integer key for a metric name. """
    return int(hashlib.sha256(name.encode()).hexdigest()[:8], 16)


def replicate_rows(cfg, truth, mu, anchor_mdp, n_index, replicate):
    """ Rows of every configured metric for one (n, replicate) cell.

    The cell's stream is (base_seed, n_index, replicate); the dataset and each
    metric draw from their own streams derived from it.

    Returns:
        A list of dicts with the fields metric, n, replicate, value and flag.
    """
    n = cfg.n_grid[n_index]
    cell = RngStream(cfg.base_seed).derive(n_index, replicate)
    data_rng = cell.derive(DATA_STREAM)
    eps_opt = cfg.eps_opt if cfg.eps_opt is not None else math.sqrt(truth.H / truth.S) / 2
    context = {'truth': truth, 'mu': mu, 'n': n, 'data_rng': data_rng,
               'anchor_mdp': anchor_mdp, 'eps_opt': eps_opt,
               'local_samples': cfg.local_samples, 'global_samples': cfg.global_samples,
               'global_mode': cfg.global_mode, 'enumeration_cap': cfg.enumeration_cap,
               'task_count': cfg.task_count, 'reward_count': cfg.reward_count}

    needs_data = any(sample_anchors not in get_metric(name)['dependencies']
                     for name in cfg.metrics)
    extra_flags = []
    if needs_data:
        if cfg.cache:
            data = cached_rollout(roll_episodes, truth, mu, n, data_rng)
        else:
            data = roll_episodes(truth, mu, n, data_rng)
        model = fit_plugin(data, truth)
        context.update(data=data, model=model)
        missing = unvisited_pairs(model)
        if missing > 0:
            extra_flags.append(f"unvisited={missing}")

    rows = []
    for name in cfg.metrics:
        metric = get_metric(name)
        uses_anchor = sample_anchors in metric['dependencies']
        try:
            produced = metric['callable'](**context, rng=cell.derive(_name_key(name)))
        except OfftabError as err:
            log.warning("Metric %s failed at n=%d, replicate %d: %s", name, n, replicate,
                        err.message)
            produced = [{'metric': name, 'value': float('nan'),
                         'flag': f"error:{type(err).__name__}"}]
        for row in produced:
            flags = [row['flag']] if row['flag'] else []
            if not uses_anchor:
                flags.extend(extra_flags)
            rows.append({'metric': row['metric'], 'n': n, 'replicate': replicate,
                         'value': row['value'], 'flag': ';'.join(flags)})
    return rows


def _replicate_task(args):
    return args[-2:], replicate_rows(*args)


def run_sweep(cfg, print_logs=False):
    """ Run every (n, replicate) cell of a sweep.

        Args:
            cfg (SweepConfig): the sweep configuration.
            print_logs (boolean, default: False): whether to keep INFO logging;
                otherwise a progress bar is printed.
        Returns:
            A list of row dicts ordered by (n, replicate, metric); a pure function
            of 'cfg' whatever the thread count.
    """
    if not print_logs:
        log.setLevel(logging.WARNING)
    cfg.validate()
    truth, mu = build_instance(cfg)
    anchor_mdp = None
    if any(sample_anchors in get_metric(name)['dependencies'] for name in cfg.metrics):
        anchor_mdp = build_anchor(cfg)
        if all(sample_anchors in get_metric(name)['dependencies'] for name in cfg.metrics):
            truth = anchor_mdp.mdp

    cells = [(cfg, truth, mu, anchor_mdp, n_index, replicate)
             for n_index in range(len(cfg.n_grid)) for replicate in range(cfg.replicates)]
    results = {}
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            for done, (key, rows) in enumerate(pool.map(_replicate_task, cells)):
                results[key] = rows
                _progress(done + 1, len(cells), print_logs)
    else:
        for done, cell in enumerate(cells):
            key, rows = _replicate_task(cell)
            results[key] = rows
            _progress(done + 1, len(cells), print_logs)
    if not print_logs:
        sys.stderr.write('\n')
    return [row for key in sorted(results) for row in results[key]]


def _progress(done, total, print_logs):
    if print_logs:
        return
    sys.stderr.write('\r')
    j = done / total
    sys.stderr.write("[%-20s] %d%%" % ('=' * int(20 * j), 100 * j))
    sys.stderr.flush()


def run_h_sweep(cfg, h_grid, print_logs=False):
    """ Repeat a generated-instance sweep for each horizon in 'h_grid'.

        Metric names are suffixed with "@H=<h>". The output is for inspection of
        the horizon dependence only.
    """
    if 'file' in cfg.mdp:
        raise ValidationError('mdp', "an H-sweep needs a generated instance")
    rows = []
    for h in h_grid:
        cfg_h = copy.deepcopy(cfg)
        cfg_h.mdp['H'] = int(h)
        for row in run_sweep(cfg_h, print_logs):
            rows.append({**row, 'metric': f"{row['metric']}@H={int(h)}"})
    return rows


def save_rows(rows, path):
    """ Write sweep rows as CSV. """
    log.info("Saving output locally to %s...", path)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(rows_to_csv(rows))


@dataclass(frozen=True)
class RateFit:
    """ OLS fit of log(mean metric) against log(n). """
    slope: float
    intercept: float
    r_squared: float
    points: list

    def to_dict(self):
        return {'slope': self.slope, 'intercept': self.intercept,
                'r_squared': self.r_squared, 'points': [list(p) for p in self.points]}


def fit_rate(rows, metric, min_points=3, min_replicates=10):
    """ Fit the log-log slope of the per-n mean of 'metric'.

    Args:
        rows: sweep rows, as a list of dicts or a DataFrame.
        metric (str): the metric to fit.
        min_points (int): the least number of distinct n values.
        min_replicates (int): the least number of finite replicates per n.

    Returns:
        A RateFit.

    Raises:
        ValidationError: too few points or replicates, or a per-n mean <= 0.
    """
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame.from_records(rows)
    if frame.empty or 'metric' not in frame:
        raise ValidationError('rows', "no sweep rows to fit")
    frame = frame[frame['metric'] == metric]
    frame = frame[np.isfinite(frame['value'].astype(float))]
    grouped = frame.groupby('n')['value'].agg(['mean', 'count']).sort_index()
    if len(grouped) < min_points:
        raise ValidationError('rows', f"metric `{metric}` has {len(grouped)} distinct n values; "
                              f"at least {min_points} are needed")
    thin = grouped[grouped['count'] < min_replicates]
    if len(thin) > 0:
        raise ValidationError('rows', f"n={int(thin.index[0])} has {int(thin['count'].iloc[0])} "
                              f"replicates; at least {min_replicates} are needed")
    collapsed = grouped[grouped['mean'] <= 0]
    if len(collapsed) > 0:
        raise ValidationError('rows', f"mean of `{metric}` at n={int(collapsed.index[0])} is "
                              f"{collapsed['mean'].iloc[0]!r}; the metric collapsed to exactness")
    x = np.log(grouped.index.to_numpy(dtype=float))
    y = np.log(grouped['mean'].to_numpy(dtype=float))
    result = sm.OLS(y, sm.add_constant(x)).fit()
    intercept, slope = (float(v) for v in result.params)
    r_squared = float(result.rsquared) if np.ptp(y) > 0 else 1.0
    return RateFit(slope, intercept, min(max(r_squared, 0.0), 1.0), list(zip(x.tolist(), y.tolist())))
