""" Module for reading and writing offtab files: MDP and policy specs, episode datasets,
    fitted models, anchor instances, reward sets, sweep configs and reports """
import os
import json
import yaml
import numpy as np
import pandas as pd
from .errors import ValidationError, DimensionMismatchError
from .mdp_core import TabularMDP, Policy
from .trajectory import EpisodeDataset
from .plugin import EmpiricalModel
from .anchor import AnchorLinearMDP
from .multitask import RewardSet
from .metric_types import log

FORMATS = ['json', 'yaml', 'csv']
CSV_COLUMNS = ['metric', 'n', 'replicate', 'value', 'flag']


def _read_text(path):
    if not os.path.exists(path):
        raise ValidationError(path, "file does not exist")
    with open(path, 'r', encoding='utf-8') as f:
        return f.read()


def _parse_json(text, path, line_offset=0):
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ValidationError(f"{path}: line {err.lineno + line_offset}",
                              f"invalid JSON ({err.msg}, column {err.colno})") from err


def read_document(path):
    """ Parse a JSON document, or a YAML one when the extension says so. """
    text = _read_text(path)
    if path.endswith(('.yaml', '.yml')):
        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as err:
            mark = getattr(err, 'problem_mark', None)
            where = f"line {mark.line + 1}" if mark is not None else 'yaml'
            raise ValidationError(f"{path}: {where}", f"invalid YAML ({err})") from err
    return _parse_json(text, path)


def _check_nested(value, shape, path):
    """ Walk a nested list and verify it has exactly 'shape' with numeric leaves. """
    if not shape:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(path, f"expected a number, got {type(value).__name__}")
        return
    if not isinstance(value, list):
        raise ValidationError(path, f"expected a list of {shape[0]} entries")
    if len(value) != shape[0]:
        raise DimensionMismatchError(path, f"expected {shape[0]} entries, got {len(value)}")
    for i, item in enumerate(value):
        _check_nested(item, shape[1:], f"{path}[{i}]")


def _leading_shape(value, depth, path):
    """ The shape implied by the first entry at each of 'depth' nesting levels. """
    shape = []
    for _ in range(depth):
        if not isinstance(value, list) or not value:
            raise DimensionMismatchError(path, f"expected a non-empty {depth}-level nested array")
        shape.append(len(value))
        value = value[0]
    return tuple(shape)


def _field(doc, key, shape=None):
    if not isinstance(doc, dict):
        raise ValidationError('document', "expected a JSON object")
    if key not in doc:
        raise ValidationError(key, "missing required key")
    if shape is not None:
        _check_nested(doc[key], shape, key)
    return doc[key]


def _positive_int(doc, key):
    value = _field(doc, key)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValidationError(key, f"must be a positive integer, got {value!r}")
    return value


def _write(text, path):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)


## MDPs and policies ##

def mdp_from_dict(doc):
    S, A, H = (_positive_int(doc, k) for k in ('S', 'A', 'H'))
    return TabularMDP(_field(doc, 'P', (S, A, S)), _field(doc, 'r', (S, A)),
                      _field(doc, 'd1', (S,)), H)


def mdp_to_dict(mdp):
    return {'S': mdp.S, 'A': mdp.A, 'H': mdp.H, 'P': mdp.P.tolist(),
            'r': mdp.r.tolist(), 'd1': mdp.d1.tolist()}


def load_mdp(path):
    return mdp_from_dict(read_document(path))


def dump_mdp(mdp, path):
    _write(json.dumps(mdp_to_dict(mdp), indent=2), path)


def load_policy(path, mdp=None):
    """ Read a policy file; when 'mdp' is given the shape must be (H, S, A) of it. """
    doc = read_document(path)
    probs = _field(doc, 'probs')
    if mdp is not None:
        _check_nested(probs, (mdp.H, mdp.S, mdp.A), 'probs')
    return Policy(probs)


def dump_policy(pi, path):
    _write(json.dumps({'probs': pi.probs.tolist()}, indent=2), path)


## Episode datasets ##

def dump_dataset(data, path):
    """ Header line with the meta, then one JSON array of [s, a, s'] triples per episode. """
    lines = [json.dumps(data.meta, sort_keys=True)]
    lines.extend(json.dumps(episode.tolist(), separators=(',', ':'))
                 for episode in data.transitions)
    _write('\n'.join(lines) + '\n', path)


def load_dataset(path):
    text = _read_text(path)
    lines = text.splitlines()
    if not lines:
        raise ValidationError(f"{path}: line 1", "missing header")
    meta = _parse_json(lines[0], path)
    for key in ('S', 'A', 'H'):
        _positive_int(meta, key)
    H = meta['H']
    episodes = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        episode = _parse_json(line, path, line_offset=number - 1)
        try:
            _check_nested(episode, (H, 3), 'episode')
        except ValidationError as err:
            raise ValidationError(f"{path}: line {number}", err.message) from err
        episodes.append(episode)
    if 'n' in meta and meta['n'] != len(episodes):
        raise ValidationError(f"{path}: line 1", f"header says n={meta['n']} but the file "
                              f"holds {len(episodes)} episodes")
    return EpisodeDataset(np.array(episodes, dtype=np.int64).reshape(-1, H, 3),
                          meta['S'], meta['A'], H,
                          meta.get('base_seed', 0), meta.get('stream_index', 0))


## Fitted models ##

def dump_model(model, path):
    _write(json.dumps(model.to_dict(), indent=2), path)


def load_model(path):
    doc = read_document(path)
    S, A, H = (_positive_int(doc, k) for k in ('S', 'A', 'H'))
    return EmpiricalModel(_field(doc, 'n_sa', (S, A)), _field(doc, 'n_s_sa', (S, A, S)),
                          _field(doc, 'P_hat', (S, A, S)), _field(doc, 'd1_hat', (S,)),
                          _field(doc, 'r', (S, A)), _field(doc, 'n_init', (S,)),
                          _field(doc, 'n'), H)


## Anchor instances and reward sets ##

def load_anchor_instance(path):
    doc = read_document(path)
    S, A, d = _leading_shape(_field(doc, 'phi'), 3, 'phi')
    phi = _field(doc, 'phi', (S, A, d))
    return AnchorLinearMDP(phi, _field(doc, 'psi', (d, S)), _field(doc, 'anchors'),
                           _positive_int(doc, 'H'), _field(doc, 'r', (S, A)),
                           doc.get('d1'))


def dump_anchor_instance(mdp, path):
    _write(json.dumps(mdp.to_dict(), indent=2), path)


def load_rewards(path):
    """ A JSON list of (S, A) arrays, or an object with 'rewards' and optional 'labels'. """
    doc = read_document(path)
    labels = None
    if isinstance(doc, dict):
        labels = doc.get('labels')
        doc = _field(doc, 'rewards')
    if not isinstance(doc, list) or not doc:
        raise ValidationError('rewards', "expected a non-empty list of (S, A) arrays")
    K, S, A = _leading_shape(doc, 3, 'rewards')
    _check_nested(doc, (K, S, A), 'rewards')
    return RewardSet(doc, labels)


## Reports and sweep rows ##

def output_format(requested=None, default='json'):
    """ The report format: explicit flag, else OFFTAB_OUTPUT_FORMAT, else 'default'. """
    _format = requested or os.getenv('OFFTAB_OUTPUT_FORMAT') or default
    if _format not in FORMATS:
        raise ValidationError('format', f"unknown format `{_format}`; choose from {FORMATS}")
    return _format


def render(result, _format='json'):
    """ Render a JSON-ready result as json, yaml or csv text. """
    if _format == 'csv':
        rows = result if isinstance(result, list) else [result]
        return pd.DataFrame.from_dict(rows).to_csv(index=False)
    if _format == 'yaml':
        return yaml.safe_dump(json.loads(json.dumps(result)), indent=2,
                              sort_keys=False, default_flow_style=False)
    return json.dumps(result, indent=2)


def write_report(result, path=None, _format='json'):
    text = render(result, _format)
    if path:
        log.info("Saving output to %s...", path)
        _write(text if text.endswith('\n') else text + '\n', path)
    else:
        print(text)


def rows_to_csv(rows):
    """ Sweep rows as CSV text with the fixed header and 17 significant digits. """
    frame = pd.DataFrame.from_records(rows, columns=CSV_COLUMNS)
    return frame.to_csv(index=False, float_format='%.17g', na_rep='nan')


def read_rows(path):
    """ Sweep rows from a CSV file as a DataFrame. """
    _read_text(path)
    frame = pd.read_csv(path, keep_default_na=False, na_values=['nan'],
                        dtype={'flag': str, 'metric': str})
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path}: line 1", f"missing columns {missing}")
    return frame
