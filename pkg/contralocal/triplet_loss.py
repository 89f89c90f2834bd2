"""Hinge triplet loss on the unit box, the QP encoder, projected gradient descent and KKT checks.

Points are float64 tensors of shape (n, d). Two pivots follow the n
variables: A0 fixed at the origin and B½ fixed at the all-halves vector.
"""
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import torch

from getconfig import logger, settings
from contralocal.utils import InputError, parse_triplet_text, write_triplet_text

DTYPE = torch.float64
PIVOT_ZERO = "A0"
PIVOT_HALF = "B½"


class QuadraticProgram:
    """min x'Qx + b'x over [0, 1]^n."""

    def __init__(self, Q, b):
        self.Q = torch.as_tensor(Q, dtype=DTYPE).clone()
        self.b = torch.as_tensor(b, dtype=DTYPE).clone()
        n = self.b.shape[0] if self.b.dim() == 1 else -1
        if self.Q.dim() != 2 or self.Q.shape != (n, n):
            raise InputError("Q must be {0}x{0} to match b".format(n))
        if not torch.isfinite(self.Q).all() or not torch.isfinite(self.b).all():
            raise InputError("Q and b must be finite")
        if not torch.equal(self.Q, self.Q.T):
            raise InputError("Q must be exactly symmetric")

    @property
    def n(self):
        return self.b.shape[0]

    def value(self, x):
        x = torch.as_tensor(x, dtype=DTYPE)
        return (x @ self.Q @ x + self.b @ x).item()

    def grad(self, x):
        x = torch.as_tensor(x, dtype=DTYPE)
        return 2 * self.Q @ x + self.b

    def default_step(self):
        return 1.0 / (2 * torch.linalg.norm(self.Q).item() + 1)

    def to_text(self):
        rows = [str(self.n)]
        rows += [" ".join(repr(v) for v in row.tolist()) for row in self.Q]
        rows.append(" ".join(repr(v) for v in self.b.tolist()))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [(i, l.split()) for i, l in enumerate(text.splitlines(), start=1) if l.strip()]
        if not lines:
            raise InputError("empty QP file")
        try:
            n = int(lines[0][1][0])
        except ValueError:
            raise InputError("line {}: first line must be n".format(lines[0][0]))
        if len(lines) != n + 2:
            raise InputError("a QP with n={} needs {} lines, found {}".format(n, n + 2, len(lines)))
        values = []
        for number, parts in lines[1:]:
            if len(parts) != n:
                raise InputError("line {}: expected {} entries".format(number, n))
            try:
                values.append([float(v) for v in parts])
            except ValueError:
                raise InputError("line {}: entries must be numbers".format(number))
        return cls(values[:n], values[n])

    @classmethod
    def load(cls, path):
        with open(path, "r") as file:
            return cls.from_text(file.read())


class TripletLossInstance:
    def __init__(self, n, triplets, dim=1, margin=None, names=None):
        self.n = n
        self.dim = dim
        self.margin = float(dim if margin is None else margin)
        self.names = tuple(names) if names else tuple("x{}".format(i) for i in range(n)) + (PIVOT_ZERO, PIVOT_HALF)
        self.triplets = tuple((a, b, c, float(w)) for a, b, c, w in triplets)
        if dim < 1 or self.margin <= 0:
            raise InputError("need dim >= 1 and margin > 0")
        for a, b, c, w in self.triplets:
            if not all(0 <= p < n + 2 for p in (a, b, c)) or len({a, b, c}) != 3:
                raise InputError("bad triplet ({}, {}, {})".format(a, b, c))
            if w < 0 or not math.isfinite(w):
                raise InputError("triplet weights must be finite and nonnegative")
        self.a = torch.tensor([t[0] for t in self.triplets], dtype=torch.long)
        self.b = torch.tensor([t[1] for t in self.triplets], dtype=torch.long)
        self.c = torch.tensor([t[2] for t in self.triplets], dtype=torch.long)
        self.w = torch.tensor([t[3] for t in self.triplets], dtype=DTYPE)
        # set by encode_qp or an attached weight ledger
        self.qp = None

    def pivots(self):
        return torch.stack([torch.zeros(self.dim, dtype=DTYPE), torch.full((self.dim,), 0.5, dtype=DTYPE)])

    def smoothness_bound(self):
        # each triplet's hinge part has Hessian norm sqrt(12) per coordinate
        return math.sqrt(12) * float(self.w.sum())

    def default_step(self):
        """1/(2||Q||_F+1) for an encoded QP, else 1/(smoothness bound + 1)."""
        if self.qp is not None:
            return self.qp.default_step()
        return 1.0 / (self.smoothness_bound() + 1)

    def to_text(self):
        header = [("semantics", "triplet-loss"), ("dim", self.dim), ("margin", repr(self.margin))]
        return write_triplet_text(header, self.names, [(a, b, c, repr(w)) for a, b, c, w in self.triplets])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as file:
            file.write(self.to_text())

    @classmethod
    def from_text(cls, text):
        header, names, rows = parse_triplet_text(text)
        if header.get("semantics") != "triplet-loss":
            raise InputError("not a triplet-loss instance")
        if names[-2:] != [PIVOT_ZERO, PIVOT_HALF]:
            raise InputError("the last two points must be the pivots {} {}".format(PIVOT_ZERO, PIVOT_HALF))
        try:
            triplets = [(a, b, c, float(w)) for _, a, b, c, w in rows]
        except ValueError:
            raise InputError("triplet weights must be numbers")
        return cls(len(names) - 2, triplets, int(header.get("dim", 1)), float(header.get("margin", 1)), names)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as file:
            return cls.from_text(file.read())


def as_point(t, p):
    p = torch.as_tensor(p, dtype=DTYPE)
    if p.dim() == 1 and t.dim == 1:
        p = p.reshape(-1, 1)
    if p.shape != (t.n, t.dim):
        raise InputError("point has shape {}, expected ({}, {})".format(tuple(p.shape), t.n, t.dim))
    if (p < 0).any() or (p > 1).any():
        raise InputError("point lies outside the unit box")
    return p


def _parts(t, p):
    full = torch.cat([p, t.pivots()], 0)
    ab = full[t.a] - full[t.b]
    ac = full[t.a] - full[t.c]
    hinge = (ab ** 2).sum(1) - (ac ** 2).sum(1) + t.margin
    return full, ab, ac, hinge


def hinge_arguments(t, p):
    return _parts(t, as_point(t, p))[3]


def loss(t, p):
    hinge = hinge_arguments(t, p)
    return (t.w * hinge.clamp(min=0)).sum().item()


def gradient(t, p):
    """Analytic gradient, shape (n, d); a triplet at or below the kink contributes nothing."""
    p = as_point(t, p)
    full, ab, ac, hinge = _parts(t, p)
    coef = (t.w * (hinge > 0).to(DTYPE)).unsqueeze(1)
    g = torch.zeros_like(full)
    g.index_add_(0, t.a, coef * (2 * ab - 2 * ac))
    g.index_add_(0, t.b, coef * (-2 * ab))
    g.index_add_(0, t.c, coef * (2 * ac))
    return g[: t.n]


def _residual(x, g):
    r = torch.where(x <= 0, (-g).clamp(min=0), torch.where(x >= 1, g.clamp(min=0), g.abs()))
    return r.max().item() if r.numel() else 0.0


def kkt_residual_tripletloss(t, p):
    p = as_point(t, p)
    return _residual(p, gradient(t, p))


def kkt_residual_qp(qp, x):
    x = torch.as_tensor(x, dtype=DTYPE)
    if x.shape != (qp.n,):
        raise InputError("x has shape {}, expected ({},)".format(tuple(x.shape), qp.n))
    if (x < 0).any() or (x > 1).any():
        raise InputError("x lies outside the unit box")
    return _residual(x, qp.grad(x))


# --- encoder -------------------------------------------------------------------------


@dataclass
class EncoderEntry:
    triplet: tuple
    target: float
    w: float
    w_dual: float


@dataclass
class EncoderWeights:
    qp: QuadraticProgram
    grouping: str
    entries: List[EncoderEntry] = field(default_factory=list)

    @property
    def targets(self):
        return [e.target for e in self.entries]

    def to_json(self, names):
        return json.dumps(
            {
                "grouping": self.grouping,
                "Q": self.qp.Q.tolist(),
                "b": self.qp.b.tolist(),
                "entries": [
                    {"triplet": [names[i] for i in e.triplet], "target": e.target, "w": e.w, "w_dual": e.w_dual}
                    for e in self.entries
                ],
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text, names):
        data = json.loads(text)
        index = {name: i for i, name in enumerate(names)}
        entries = [
            EncoderEntry(tuple(index[p] for p in e["triplet"]), e["target"], e["w"], e["w_dual"])
            for e in data["entries"]
        ]
        return cls(QuadraticProgram(data["Q"], data["b"]), data["grouping"], entries)


def template_targets(c):
    """Signed targets of the twelve-triplet system for a quadratic in (x, y, z).

    c = (c1..c9) are the coefficients of x², y², z², xy, xz, yz, x, y, z and the
    triplets are, in order, (x,A,y) (y,A,x) (x,A,z) (z,A,x) (y,A,z) (z,A,y)
    (x,A,B) (y,A,B) (z,A,B) (A,x,B) (A,y,B) (A,z,B).
    """
    c1, c2, c3, c4, c5, c6, c7, c8, c9 = c
    return [
        -c2,
        c2 + c4 / 2,
        -c3 - c6 / 2,
        c3 + c5 / 2 + c6 / 2,
        c6 / 2,
        0.0,
        c7,
        c8,
        c9,
        c1 + c2 + c3 + c4 / 2 + c5 / 2 + c6 / 2,
        0.0,
        0.0,
    ]


def _template_triplets(x, y, z, A, B):
    return [(x, A, y), (y, A, x), (x, A, z), (z, A, x), (y, A, z), (z, A, y),
            (x, A, B), (y, A, B), (z, A, B), (A, x, B), (A, y, B), (A, z, B)]


def encode_qp(qp, dim=1, grouping="pairwise"):
    """Triplet-loss instance whose loss is x'Qx + b'x plus a constant on the box.

    (x_i, A, x_j) carries 2 x_i x_j - x_j², (A, x_i, B) carries x_i² and
    (x_i, A, B) carries x_i, each up to constants. A negative target goes on
    the dual triplet (a, c, b), which carries the negated expression.
    """
    if grouping not in ("pairwise", "triples"):
        raise InputError("grouping must be pairwise or triples")
    n = qp.n
    A, B = n, n + 1
    Q, b = qp.Q.tolist(), qp.b.tolist()
    targets = {}

    def add(triplet, value):
        targets[triplet] = targets.get(triplet, 0.0) + value

    def cross(i, j):
        if Q[i][j] != 0:
            add((i, A, j), Q[i][j])
            add((A, j, B), Q[i][j])

    if grouping == "pairwise":
        for j in range(n):
            add((A, j, B), Q[j][j])
            for i in range(j):
                cross(i, j)
        for i in range(n):
            add((i, A, B), b[i])
    else:
        groups = [list(range(s, min(s + 3, n))) for s in range(0, n, 3)]
        for group in groups:
            ids = group + [None] * (3 - len(group))
            x, y, z = ids

            def coef(i, j):
                return 0.0 if i is None or j is None else Q[i][j]

            c = [coef(x, x), coef(y, y), coef(z, z), 2 * coef(x, y), 2 * coef(x, z), 2 * coef(y, z),
                 b[x], 0.0 if y is None else b[y], 0.0 if z is None else b[z]]
            for triplet, target in zip(_template_triplets(x, y, z, A, B), template_targets(c)):
                if None in triplet:
                    continue
                add(triplet, target)
        for gi, first in enumerate(groups):
            for second in groups[gi + 1:]:
                for i in first:
                    for j in second:
                        cross(i, j)

    weights = EncoderWeights(qp, grouping)
    triplets = []
    for (a, bb, cc), target in targets.items():
        w, w_dual = max(target, 0.0), max(-target, 0.0)
        weights.entries.append(EncoderEntry((a, bb, cc), target, w, w_dual))
        if w > 0:
            triplets.append((a, bb, cc, w))
        if w_dual > 0:
            triplets.append((a, cc, bb, w_dual))
    logger.info("encoded a %d-variable QP into %d triplets (%s)", n, len(triplets), grouping)
    t = TripletLossInstance(n, triplets, dim=dim, margin=dim)
    t.qp = qp
    return t, weights


# --- projected gradient descent ------------------------------------------------------


@dataclass
class PGDTrace:
    losses: List[float]
    iterations: int
    converged: bool
    step: float


def _pgd(loss_fn, grad_fn, p0, step, tol, maxit, backtrack):
    p = p0.clone()
    value = loss_fn(p)
    losses = [value]
    for iteration in range(maxit):
        g = grad_fn(p)
        if _residual(p, g) <= tol:
            return p, PGDTrace(losses, iteration, True, step)
        q = (p - step * g).clamp(0, 1)
        new = loss_fn(q)
        while backtrack and new > value and step > 1e-16:
            step /= 2
            q = (p - step * g).clamp(0, 1)
            new = loss_fn(q)
        p, value = q, new
        losses.append(value)
    converged = _residual(p, grad_fn(p)) <= tol
    if not converged:
        logger.warning("projected gradient descent hit maxit=%d without reaching tol=%g", maxit, tol)
    return p, PGDTrace(losses, maxit, converged, step)


def projected_gradient_descent(t, p0, step=None, tol=None, maxit=None, backtrack=False):
    p0 = as_point(t, p0)
    step = step if step is not None else t.default_step()
    if step <= 0:
        raise InputError("step must be positive")
    tol = settings.getfloat("kkt-tol") if tol is None else tol
    maxit = settings.getint("pgd-maxit") if maxit is None else maxit
    return _pgd(lambda p: loss(t, p), lambda p: gradient(t, p), p0, step, tol, maxit, backtrack)


def decode_kkt_highd(p):
    """First coordinate of every variable."""
    p = torch.as_tensor(p, dtype=DTYPE)
    return p[:, 0].clone() if p.dim() == 2 else p.clone()


# --- linear model with basis inputs ----------------------------------------------------


def _basis_check(t, inputs):
    inputs = torch.as_tensor(inputs, dtype=DTYPE)
    if t.dim != 1 or not torch.equal(inputs, torch.eye(t.n, dtype=DTYPE)):
        raise InputError("the linear model only supports the standard basis inputs on a 1-d instance")
    return inputs


def linear_model_loss(theta, inputs, t):
    inputs = _basis_check(t, inputs)
    return loss(t, inputs @ torch.as_tensor(theta, dtype=DTYPE))


def linear_model_gradient(theta, inputs, t):
    inputs = _basis_check(t, inputs)
    return inputs.T @ gradient(t, inputs @ torch.as_tensor(theta, dtype=DTYPE)).reshape(-1)


def linear_model_pgd(theta0, inputs, t, step=None, tol=None, maxit=None, backtrack=False):
    theta0 = torch.as_tensor(theta0, dtype=DTYPE)
    _basis_check(t, inputs)
    step = step if step is not None else t.default_step()
    tol = settings.getfloat("kkt-tol") if tol is None else tol
    maxit = settings.getint("pgd-maxit") if maxit is None else maxit
    return _pgd(
        lambda th: linear_model_loss(th, inputs, t),
        lambda th: linear_model_gradient(th, inputs, t),
        theta0,
        step,
        tol,
        maxit,
        backtrack,
    )
