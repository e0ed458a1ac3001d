"""Graph weights on the upper half-plane with the mirror-charge angle form.

phi(z, w) = arg((w - z) / (w - conj z)) is the harmonic angle of an edge from
z (eta side) to w (X side).  It vanishes identically when z lies on the real
axis, which is the Dirichlet condition.  A graph with k internal vertices and
2k edges has weight

    w = (2 pi)^(-2k) * integral over H^k of det J,

where J stacks the gradients of the edge angles (rows: edges by tail vertex,
in representative order; columns: Re z_1, Im z_1, ...).  With this
normalization the wedge has weight 1/2.

Sampling: vertex j is drawn from a mixture of polar Cauchy-type components
centred at the boundary observables (half-discs) and at the vertices drawn
before it (full discs; points below the axis carry integrand 0).  Each
component has density proportional to 1/r near its centre, which keeps the
variance finite at the 1/r singularities of the edge forms.
"""
from __future__ import annotations

import json
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import FORMAT_VERSION
from .graphs import GraphClass

NORMALIZATION_TAG = "angle2pi-aut-v1"
CACHE_ENV = "POISSON_SIGMA_CACHE"
SHARD_SIZE = 65536
MIN_SEPARATION = 1e-12
TWO_PI = 2.0 * math.pi


class AngleFormError(ValueError):
    pass


@dataclass(frozen=True)
class HalfPlanePoint:
    re: float
    im: float

    def __post_init__(self):
        if self.im < 0:
            raise ValueError("point below the real axis")

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)


def angle(z: complex, w: complex) -> float:
    """phi(z, w) in (-pi, pi]."""
    return float(np.angle((w - z) / (w - np.conj(z))))


def _grads(z, w):
    """Gradients of phi(z, w): (d/dRe z, d/dIm z, d/dRe w, d/dIm w); vectorized."""
    a = 1.0 / (w - z)
    b = 1.0 / (w - np.conj(z))
    return (-a.imag + b.imag, -a.real - b.real, a.imag - b.imag, a.real - b.real)


def angle_form(z: HalfPlanePoint | complex, w: HalfPlanePoint | complex):
    """Differential of phi(z, w)/2pi: ((d/dRe z, d/dIm z), (d/dRe w, d/dIm w))."""
    zc = z.z if isinstance(z, HalfPlanePoint) else complex(z)
    wc = w.z if isinstance(w, HalfPlanePoint) else complex(w)
    if zc.imag < 0 or wc.imag < 0:
        raise AngleFormError("points must lie in the closed upper half-plane")
    if abs(zc - wc) < MIN_SEPARATION:
        raise AngleFormError("coincident points")
    if zc.imag == 0 and wc.imag == 0:
        raise AngleFormError("both points on the real axis")
    g = [v / TWO_PI for v in _grads(zc, wc)]
    return (g[0], g[1]), (g[2], g[3])


@dataclass(frozen=True)
class WeightResult:
    graph_hash: str
    estimate: float
    std_error: float
    samples: int
    seed: int
    normalization: str = NORMALIZATION_TAG
    positions: tuple = (0.0, 1.0)
    converged: bool = True
    reason: str = ""
    rejected_fraction: float = 0.0

    def to_json(self) -> dict:
        d = asdict(self)
        d["positions"] = list(self.positions)
        d["version"] = FORMAT_VERSION
        return d

    @classmethod
    def from_json(cls, doc) -> "WeightResult":
        fields = dict(doc)
        fields.pop("version", None)
        fields["positions"] = tuple(float(p) for p in fields.get("positions", (0.0, 1.0)))
        return cls(**fields)


# sampling

class _Layout:
    def __init__(self, gc: GraphClass, positions):
        g = gc.representative
        self.internal = g.internal()
        obs = g.observables()
        if len(positions) != len(obs):
            raise ValueError(f"need {len(obs)} boundary positions, got {len(positions)}")
        xs = [float(p) for p in positions]
        if len(set(xs)) != len(xs):
            raise ValueError("boundary observables must sit at distinct points")
        self.anchor = {v: x for v, x in zip(obs, xs)}
        self.slot = {v: j for j, v in enumerate(self.internal)}
        self.edges = sorted(g.edges, key=lambda e: (self.slot.get(e[0], -1), e))
        self.k = len(self.internal)
        span = (max(xs) - min(xs)) if len(xs) > 1 else 1.0
        self.scale = span if span > 0 else 1.0
        self.centre = sum(xs) / len(xs) if xs else 0.0


def _sample_radius(rng, n, s):
    # half-Cauchy with scale s
    return s * np.tan(0.5 * math.pi * rng.random(n))


def _radius_density(r, s):
    return 2.0 / (math.pi * s * (1.0 + (r / s) ** 2))


def _sample_vertex(rng, n, lay: _Layout, prev: list):
    """Draw n positions from the mixture for the next vertex; returns (z, density)."""
    anchors = list(lay.anchor.values()) + [lay.centre]
    scales = [lay.scale] * len(lay.anchor) + [2.0 * lay.scale]
    nb = len(anchors)
    ncomp = nb + len(prev)
    comp = rng.integers(0, ncomp, n)
    r = _sample_radius(rng, n, 1.0)
    u = rng.random(n)
    z = np.empty(n, dtype=complex)
    for c in range(ncomp):
        m = comp == c
        if not m.any():
            continue
        if c < nb:
            z[m] = anchors[c] + scales[c] * r[m] * np.exp(1j * math.pi * u[m])
        else:
            z[m] = prev[c - nb][m] + 0.5 * lay.scale * r[m] * np.exp(2j * math.pi * u[m])
    dens = np.zeros(n)
    for c in range(ncomp):
        if c < nb:
            rr = np.abs(z - anchors[c])
            s = scales[c]
            dens += np.where(z.imag > 0, _radius_density(rr, s) / (np.maximum(rr, 1e-300) * math.pi), 0.0)
        else:
            rr = np.abs(z - prev[c - nb])
            s = 0.5 * lay.scale
            dens += _radius_density(rr, s) / (np.maximum(rr, 1e-300) * TWO_PI)
    return z, dens / ncomp


def _degenerate(Z, lay: _Layout):
    bad = np.zeros(Z.shape[0], dtype=bool)
    pts = [Z[:, j] for j in range(lay.k)] + [np.full(Z.shape[0], complex(x, 0.0)) for x in lay.anchor.values()]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            bad |= np.abs(pts[i] - pts[j]) < MIN_SEPARATION
    return bad


def _draw(rng, n, lay: _Layout):
    Z = np.empty((n, lay.k), dtype=complex)
    q = np.ones(n)
    for j in range(lay.k):
        z, dens = _sample_vertex(rng, n, lay, [Z[:, i] for i in range(j)])
        Z[:, j] = z
        q *= dens
    return Z, q


def integrand(Z: np.ndarray, lay: _Layout) -> np.ndarray:
    """det J / (2 pi)^(2k) for a batch of configurations (rows of Z)."""
    n, k = Z.shape
    J = np.zeros((n, 2 * k, 2 * k))
    for row, (t, h) in enumerate(lay.edges):
        zt = Z[:, lay.slot[t]]
        if h in lay.slot:
            zh = Z[:, lay.slot[h]]
        else:
            zh = np.full(n, complex(lay.anchor[h], 0.0))
        gza, gzb, gwc, gwe = _grads(zt, zh)
        ct = 2 * lay.slot[t]
        J[:, row, ct] += gza
        J[:, row, ct + 1] += gzb
        if h in lay.slot:
            ch = 2 * lay.slot[h]
            J[:, row, ch] += gwc
            J[:, row, ch + 1] += gwe
    return np.linalg.det(J) / TWO_PI ** (2 * k)


def _shard(args):
    lay, n, seq = args
    rng = np.random.default_rng(seq)
    Z, q = _draw(rng, n, lay)
    bad = _degenerate(Z, lay)
    rejected = int(bad.sum())
    while bad.any():
        Z2, q2 = _draw(rng, int(bad.sum()), lay)
        Z[bad], q[bad] = Z2, q2
        bad = _degenerate(Z, lay)
        rejected += int(bad.sum())
    inside = (Z.imag > 0).all(axis=1)
    vals = np.zeros(n)
    if inside.any():
        vals[inside] = integrand(Z[inside], lay) / q[inside]
    mean = float(vals.mean())
    m2 = float(((vals - mean) ** 2).sum())
    return n, mean, m2, rejected


def _merge(a, b):
    """Chan et al. pairwise merge of (count, mean, M2)."""
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * nb / n, sa + sb + delta * delta * na * nb / n


def graph_weight_mc(gc: GraphClass, positions=(0.0, 1.0), samples: int = 100_000, seed: int = 0,
                    threads: int = 1) -> WeightResult:
    """Monte-Carlo weight; bit-identical for equal (graph, positions, samples, seed) at any thread count."""
    g = gc.representative
    positions = tuple(float(p) for p in positions)
    lay = _Layout(gc, positions)
    base = dict(graph_hash=gc.hash, samples=samples, seed=seed, positions=positions)
    if len(g.edges) != 2 * lay.k:
        return WeightResult(estimate=0.0, std_error=0.0, reason="degree-mismatch", **base)
    for v in lay.internal:
        if g.out_degree(v) != 2:
            return WeightResult(estimate=0.0, std_error=0.0, reason="not-admissible", **base)
    if lay.k == 0:
        return WeightResult(estimate=1.0, std_error=0.0, reason="no-internal-vertices", **base)
    if samples < 2:
        raise ValueError("need at least two samples")
    sizes = [SHARD_SIZE] * (samples // SHARD_SIZE)
    if samples % SHARD_SIZE:
        sizes.append(samples % SHARD_SIZE)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(lay, n, s) for n, s in zip(sizes, seqs)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(_shard, jobs))
    else:
        parts = [_shard(j) for j in jobs]
    acc = (parts[0][0], parts[0][1], parts[0][2])
    rejected = parts[0][3]
    for n, m, s, r in parts[1:]:
        acc = _merge(acc, (n, m, s))
        rejected += r
    n, mean, m2 = acc
    std = math.sqrt(m2 / (n - 1) / n)
    # integrands that vanish pointwise leave only rounding noise
    converged = std <= max(abs(mean), 1e-12)
    return WeightResult(estimate=mean, std_error=std, converged=converged,
                        reason="" if converged else "non-convergent",
                        rejected_fraction=rejected / n, **base)


def sample_integrand(gc: GraphClass, Z, positions=(0.0, 1.0)) -> np.ndarray:
    """Integrand at explicit configurations (rows of Z, one column per internal vertex)."""
    lay = _Layout(gc, positions)
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    return integrand(Z, lay)


# cache

def default_cache_path() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "poisson_sigma" / "weights.jsonl"))


class WeightCache:
    """Append-only JSON-lines store keyed by (hash, positions, normalization tag)."""

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else default_cache_path()
        self._lock = threading.Lock()
        self.corrupt: list = []

    @staticmethod
    def key(graph_hash: str, positions, tag: str) -> tuple:
        return graph_hash, tuple(float(p) for p in positions), tag

    def _load(self) -> dict:
        out = {}
        self.corrupt = []
        if not self.path.exists():
            return out
        with open(self.path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = WeightResult.from_json(json.loads(line))
                except (ValueError, TypeError, KeyError) as e:
                    self.corrupt.append((lineno, str(e)))
                    continue
                out[self.key(rec.graph_hash, rec.positions, rec.normalization)] = rec
        return out

    def get(self, graph_hash: str, positions=(0.0, 1.0), tag: str = NORMALIZATION_TAG):
        with self._lock:
            return self._load().get(self.key(graph_hash, positions, tag))

    def put(self, result: WeightResult) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(json.dumps(result.to_json(), sort_keys=True) + "\n")

    def all(self) -> dict:
        with self._lock:
            return self._load()


def wedge_weight_exact() -> float:
    """1/2: the angle pair (phi_f, phi_g) sweeps a triangle of area 2 pi^2."""
    return 0.5
