# -*- coding: utf-8 -*-
"""
Run configuration.

A run is described by one JSON object with the blocks

    system          d_h, d_p, D, A, K, M as row-major nested lists, or the
                    name of a casebook fixture under "case"
    omega           list of [start, end] arcs in radians
    T               horizon
    discretization  N, N_c, time basis, grid and solver settings
    experiment      WKB experiment, time sweep and control method settings
    f0              class of the random initial datum
    seed            seed of every randomized quantity

Defaults are resolved on load, so RunConfig.to_dict() is the complete
configuration of a run and parses back to the same RunConfig.
"""

import json
import logging
import numbers
from collections.abc import Mapping

import numpy as np

from casebook import get_case
from dynamics import SpectralField
from errors import ConfigError
from model import TorusSubset, validate

logger = logging.getLogger(__name__)

BASIS_KINDS = ("pwc", "bump")
EXPERIMENT_KINDS = ("small-time", "rough-data")
# solve_ivp methods that accept a complex state
ODE_METHODS = ("DOP853", "RK45", "RK23", "BDF")
CONTROL_METHODS = ("hum", "pipeline", "both")
H_TOL = 1e-9


class _EntryMapping(Mapping):
    def __init__(self, entries):
        self._entries = entries

    def __getitem__(self, key):
        for e in self._entries:
            if e.name == key:
                return e
        raise KeyError('%s' % key)

    def __iter__(self):
        for e in self._entries:
            yield e.name

    def __len__(self):
        return len(self._entries)


class Entry(object):
    def __init__(self, name, data, defaulted=False):
        self.name = name
        self.data = data
        self.defaulted = defaulted

    def __repr__(self):
        return "<Entry {0}={1!r}{2}>".format(self.name, self.data, " (default)" if self.defaulted else "")

    def to_json(self):
        if isinstance(self.data, np.ndarray):
            return self.data.tolist()
        if isinstance(self.data, tuple):
            return [list(v) if isinstance(v, tuple) else v for v in self.data]
        return self.data


class Block(_EntryMapping):
    def __init__(self, name, entries):
        super(Block, self).__init__(entries)
        self.name = name

    def __repr__(self):
        return "<Block {0} entries={1}>".format(self.name, len(self))

    @property
    def data(self):
        return {e.name: e.data for e in self._entries}

    @property
    def defaulted(self):
        return all(e.defaulted for e in self._entries)

    def to_json(self):
        return {e.name: e.to_json() for e in self._entries}


# ---------------------------------------------------------------------------
# field converters; each raises ConfigError naming the field
# ---------------------------------------------------------------------------

def _is_number(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _float(name, value):
    if not _is_number(value) or not np.isfinite(value):
        raise ConfigError("{0} must be a finite number, got {1!r}".format(name, value))
    return float(value)


def _positive_float(name, value):
    value = _float(name, value)
    if value <= 0.0:
        raise ConfigError("{0} must be positive, got {1!r}".format(name, value))
    return value


def _int(name, value, minimum):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool) or value < minimum:
        raise ConfigError("{0} must be an integer >= {1}, got {2!r}".format(name, minimum, value))
    return int(value)


def _positive_int(name, value):
    return _int(name, value, 1)


def _nonnegative_int(name, value):
    return _int(name, value, 0)


def _bool(name, value):
    if not isinstance(value, bool):
        raise ConfigError("{0} must be true or false, got {1!r}".format(name, value))
    return value


def _string(name, value):
    if not isinstance(value, str):
        raise ConfigError("{0} must be a string, got {1!r}".format(name, value))
    return value


def _choice(options):
    def convert(name, value):
        if value not in options:
            raise ConfigError("{0} must be one of {1}, got {2!r}".format(name, ", ".join(options), value))
        return value
    return convert


def _optional(convert):
    def wrapped(name, value):
        return None if value is None else convert(name, value)
    return wrapped


def _float_list(name, value):
    if not isinstance(value, (list, tuple)):
        raise ConfigError("{0} must be a list of numbers".format(name))
    return tuple(_float(name, v) for v in value)


def _h_list(name, value):
    values = _float_list(name, value)
    if not values:
        raise ConfigError("{0} must not be empty".format(name))
    for h in values:
        if h <= 0.0 or h > 1.0 or abs(1.0 / h - round(1.0 / h)) > H_TOL * (1.0 / h):
            raise ConfigError("{0}: every h must be 1/k for a positive integer k, got {1!r}".format(name, h))
    return values


def _matrix(name, value, shape):
    try:
        array = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("{0} must be a nested list of numbers".format(name))
    if array.ndim == 1 and shape[1] in (None, 1):
        array = array.reshape(-1, 1)
    if array.ndim != 2 or (shape[0] is not None and array.shape[0] != shape[0]) \
            or (shape[1] is not None and array.shape[1] != shape[1]):
        raise ConfigError("{0} must have shape {1}, got {2}".format(
            name, tuple("m" if s is None else s for s in shape), array.shape))
    if not np.all(np.isfinite(array)):
        raise ConfigError("{0} has non-finite entries".format(name))
    return array


def _arcs(name, value):
    if not isinstance(value, (list, tuple)):
        raise ConfigError("{0} must be a list of [start, end] pairs".format(name))
    arcs = []
    for arc in value:
        if not isinstance(arc, (list, tuple)) or len(arc) != 2:
            raise ConfigError("{0}: {1!r} is not a [start, end] pair".format(name, arc))
        arcs.append((_float(name, arc[0]), _float(name, arc[1])))
    return tuple(arcs)


DISCRETIZATION = (
    ("N", 64, _positive_int),
    ("N_c", None, _optional(_positive_int)),
    ("basis", "pwc", _choice(BASIS_KINDS)),
    ("basis_size", 64, _positive_int),
    ("flatness", 3, _positive_int),
    ("grid", 128, _positive_int),
    ("steps", 400, _positive_int),
    ("eps", None, _optional(_positive_float)),
    ("method", "DOP853", _choice(ODE_METHODS)),
)

EXPERIMENT = (
    ("kind", "small-time", _choice(EXPERIMENT_KINDS)),
    ("h_list", (1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256), _h_list),
    ("q", 2, _nonnegative_int),
    ("n0", 1, _positive_int),
    ("mu", None, _optional(_float)),
    ("cutoff", 4, _nonnegative_int),
    ("T_grid_factors", (0.6, 0.8, 1.2, 1.5), _float_list),
    ("control", "hum", _choice(CONTROL_METHODS)),
)

F0 = (
    ("decay", 3.0, _positive_float),
    ("zero_mean_parabolic", False, _bool),
    ("zero_mean_hyperbolic", False, _bool),
)

BLOCKS = ("system", "omega", "T", "discretization", "experiment", "f0", "seed")


def _block(name, fields, raw):
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        raise ConfigError("{0} must be an object".format(name))
    known = [f[0] for f in fields]
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError("unknown keys in {0}: {1}".format(name, ", ".join(unknown)))
    entries = []
    for key, default, convert in fields:
        if key in raw:
            entries.append(Entry(key, convert("{0}.{1}".format(name, key), raw[key])))
        else:
            entries.append(Entry(key, default, defaulted=True))
    return Block(name, entries)


def _system(raw):
    """Matrices of the system block; a casebook name supplies whatever is not given."""
    if not isinstance(raw, Mapping):
        raise ConfigError("system must be an object")
    unknown = sorted(set(raw) - {"case", "d_h", "d_p", "D", "A", "K", "M"})
    if unknown:
        raise ConfigError("unknown keys in system: {0}".format(", ".join(unknown)))
    base = {}
    entries = []
    if raw.get("case") is not None:
        name = _string("system.case", raw["case"])
        try:
            spec = get_case(name).spec()
        except KeyError:
            raise ConfigError("system.case: no casebook entry named {0!r}".format(name))
        base = {"d_h": spec.d_h, "d_p": spec.d_p, "D": spec.D, "A": spec.A, "K": spec.K, "M": spec.M}
        entries.append(Entry("case", name))
    else:
        entries.append(Entry("case", None, defaulted=True))

    def pick(key, convert):
        if key in raw:
            value = convert("system." + key, raw[key])
            # a resolved config written back out repeats the case's matrices
            same = key in base and np.array_equal(np.asarray(value), np.asarray(base[key]))
            return Entry(key, value, defaulted=same)
        if key in base:
            return Entry(key, convert("system." + key, base[key]), defaulted=True)
        raise ConfigError("system.{0} is required".format(key))

    d_h = pick("d_h", _nonnegative_int)
    d_p = pick("d_p", _nonnegative_int)
    d = d_h.data + d_p.data
    entries += [d_h, d_p,
                pick("D", lambda n, v: _matrix(n, v, (d_p.data, d_p.data))),
                pick("A", lambda n, v: _matrix(n, v, (d, d))),
                pick("K", lambda n, v: _matrix(n, v, (d, d))),
                pick("M", lambda n, v: _matrix(n, v, (d, None)))]
    return Block("system", entries)


class RunConfig(_EntryMapping):
    """Read-only mapping of the resolved blocks of a run."""

    def __init__(self, entries):
        super(RunConfig, self).__init__(entries)

    def __repr__(self):
        slist = ["RunConfig"]
        slist.append("T={0:g}".format(self.T))
        slist.append("seed={0}".format(self.seed))
        return "<{0}>".format(' '.join(slist))

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, Mapping):
            raise ConfigError("the configuration must be a JSON object")
        unknown = sorted(set(doc) - set(BLOCKS))
        if unknown:
            raise ConfigError("unknown blocks: {0}".format(", ".join(unknown)))
        for key in ("system", "omega", "T"):
            if key not in doc:
                raise ConfigError("{0} is required".format(key))

        T = _positive_float("T", doc["T"])
        disc = _block("discretization", DISCRETIZATION, doc.get("discretization"))
        if disc["N_c"].data is None:
            disc["N_c"].data = disc["N"].data
        if disc["eps"].data is None:
            disc["eps"].data = 0.05 * T
        entries = [
            _system(doc["system"]),
            Entry("omega", _arcs("omega", doc["omega"])),
            Entry("T", T),
            disc,
            _block("experiment", EXPERIMENT, doc.get("experiment")),
            _block("f0", F0, doc.get("f0")),
            Entry("seed", _nonnegative_int("seed", doc["seed"])) if "seed" in doc else Entry("seed", 0, True),
        ]
        config = cls(entries)
        defaulted = ["{0}.{1}".format(b.name, e.name) for b in config._entries if isinstance(b, Block)
                     for e in b._entries if e.defaulted]
        logger.debug("configuration defaults used for: %s", ", ".join(defaulted) or "nothing")
        return config

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except ValueError as err:
            raise ConfigError("configuration is not valid JSON: {0}".format(err))
        return cls.from_dict(doc)

    @classmethod
    def load(cls, filename):
        try:
            with open(filename, 'r') as f:
                text = f.read()
        except OSError as err:
            raise ConfigError("cannot read configuration {0}: {1}".format(filename, err.strerror))
        logger.info("configuration read from %s", filename)
        return cls.from_json(text)

    def to_dict(self):
        return {e.name: e.to_json() for e in self._entries}

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_seed(self, seed):
        doc = self.to_dict()
        doc["seed"] = seed
        return RunConfig.from_dict(doc)

    @property
    def T(self):
        return self["T"].data

    @property
    def seed(self):
        return self["seed"].data

    def spec(self):
        """The validated SystemSpec; hypothesis violations propagate."""
        system = self["system"].data
        return validate(system["d_h"], system["d_p"], system["D"], system["A"], system["K"], system["M"])

    def omega(self):
        return TorusSubset(self["omega"].data)

    def initial_datum(self, spec):
        """Random real datum of the configured class, truncated to |n| <= N."""
        f0 = self["f0"].data
        zero_mean = []
        if f0["zero_mean_hyperbolic"]:
            zero_mean += list(range(spec.d_h))
        if f0["zero_mean_parabolic"]:
            zero_mean += list(range(spec.d_h, spec.d))
        return SpectralField.smooth(spec.d, self["discretization"]["N"].data, decay=f0["decay"], rng=self.seed,
                                    zero_mean=tuple(zero_mean))
