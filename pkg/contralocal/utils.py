# coding: utf-8
import random
from enum import Enum
from fractions import Fraction
from typing import Callable, NamedTuple, Optional

import torch

from getconfig import logger


class InputError(ValueError):
    """Malformed input: bad files, ids out of range, length mismatches."""


class DecodeError(ValueError):
    """A configuration that doesn't encode a cut."""


class BudgetExceeded(ValueError):
    pass


class InvariantViolation(ValueError):
    pass


class ProvenanceError(ValueError):
    pass


class UnsupportedConstruction(NotImplementedError):
    pass


def set_seed(seed):
    """Sets the seed for all used libraries that take it."""
    # Make sure you don't use 0 as a seed since some libraries will ignore it.
    if seed:
        random.seed(a=seed, version=2)
        torch.manual_seed(seed)


def parse_rational(text, where=""):
    """Reads "p/q", an integer or a decimal into an exact Fraction."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise InputError("{}not a rational number: {!r}".format(where, text))


def format_rational(value):
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return "{}/{}".format(value.numerator, value.denominator)


def to_jsonable(value):
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, (tuple, list)):
        return [to_jsonable(v) for v in value]
    return value


class PivotRule(Enum):
    BEST = "best"
    FIRST = "first"

    @classmethod
    def parse(cls, text):
        aliases = {
            "best": cls.BEST,
            "best-improvement": cls.BEST,
            "first": cls.FIRST,
            "first-improvement": cls.FIRST,
        }
        try:
            return aliases[str(text).strip().lower()]
        except KeyError:
            raise InputError("unknown pivot rule {!r}, use best or first".format(text))


class Termination(Enum):
    LOCAL_OPTIMUM = "local-optimum"
    CAP = "cap"


class Step(NamedTuple):
    mover: int
    old: object
    new: object
    before: Fraction
    after: Fraction


class MoveTrace:
    """Improving moves of one search run, in order.

    The mover sequence is always kept. Full steps are kept when keep_steps is
    set, and each step is handed to sink (as a JSON-ready dict) when given, so
    long runs can stream to disk.
    """

    def __init__(self, keep_steps=True, sink: Optional[Callable[[dict], None]] = None, names=None):
        self.keep_steps = keep_steps
        self.sink = sink
        self.names = names
        self.movers = []
        self.steps = []
        self.terminated = None

    @property
    def wants_steps(self):
        return self.keep_steps or self.sink is not None

    @property
    def iterations(self):
        return len(self.movers)

    @property
    def capped(self):
        return self.terminated is Termination.CAP

    def record(self, mover, old=None, new=None, before=None, after=None):
        self.movers.append(mover)
        if not self.wants_steps:
            return
        if before is not None and not after > before:
            raise AssertionError(
                "objective must strictly increase, got {} -> {} moving {}".format(before, after, mover)
            )
        step = Step(mover, old, new, before, after)
        if self.keep_steps:
            self.steps.append(step)
        if self.sink is not None:
            self.sink(self.step_dict(len(self.movers), step))

    def step_dict(self, index, step):
        mover = self.names[step.mover] if self.names else step.mover
        return {
            "step": index,
            "mover": mover,
            "from": to_jsonable(step.old),
            "to": to_jsonable(step.new),
            "before": to_jsonable(step.before),
            "objective": to_jsonable(step.after),
        }

    def finish(self, terminated):
        self.terminated = terminated
        if terminated is Termination.CAP:
            logger.warning("search stopped at the iteration cap after %d moves", self.iterations)
        else:
            logger.info("search reached a local optimum after %d moves", self.iterations)
        return self


def write_triplet_text(header, names, rows):
    """Header lines "key value", the point names, then "a b c w" rows."""
    lines = ["{} {}".format(key, value) for key, value in header if value is not None]
    lines.append("points " + " ".join(names))
    lines.append("triplets {}".format(len(rows)))
    for a, b, c, w in rows:
        lines.append("{} {} {} {}".format(names[a], names[b], names[c], w))
    return "\n".join(lines) + "\n"


def parse_triplet_text(text):
    """Inverse of write_triplet_text.

    Returns (header dict, names, rows) where rows are
    (line number, a, b, c, weight text) with a, b, c already resolved to ids.
    """
    header = {}
    names = None
    rows = []
    expected = None
    index = {}
    for number, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if names is None:
            if parts[0] == "points":
                names = parts[1:]
                if len(set(names)) != len(names):
                    raise InputError("line {}: duplicate point names".format(number))
                index = {name: i for i, name in enumerate(names)}
            elif len(parts) == 2:
                header[parts[0]] = parts[1]
            else:
                raise InputError("line {}: expected \"key value\" header, got {!r}".format(number, line))
            continue
        if expected is None:
            if parts[0] != "triplets" or len(parts) != 2 or not parts[1].isdigit():
                raise InputError("line {}: expected \"triplets <count>\"".format(number))
            expected = int(parts[1])
            continue
        if len(parts) != 4:
            raise InputError("line {}: expected \"a b c w\"".format(number))
        try:
            a, b, c = (index[p] for p in parts[:3])
        except KeyError as e:
            raise InputError("line {}: unknown point {}".format(number, e))
        rows.append((number, a, b, c, parts[3]))
    if names is None or expected is None:
        raise InputError("missing points or triplets section")
    if len(rows) != expected:
        raise InputError("declared {} triplets but found {}".format(expected, len(rows)))
    return header, names, rows
