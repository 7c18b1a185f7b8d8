""" Plug-in model estimation and uniform off-policy evaluation for tabular offline RL """
# Flatten offtab and offtab.metrics into one namespace, keeping only the names
# a submodule defines itself (classes, functions, UPPER_CASE constants).
from importlib import import_module
from pkgutil import walk_packages

def _own_names(mod):
    if '__all__' in mod.__dict__:
        return mod.__dict__['__all__']
    return [k for k, v in mod.__dict__.items() if not k.startswith('_') and
            (k.isupper() or getattr(v, '__module__', None) == mod.__name__)]

for _info in walk_packages(__path__, __name__ + '.'):
    if _info.name.endswith(('__main__', '.cli')):
        continue
    _mod = import_module(_info.name)
    globals().update({k: getattr(_mod, k) for k in _own_names(_mod)})
