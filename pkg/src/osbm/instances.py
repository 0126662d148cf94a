"""Instance model for online bipartite b-matching under known-i.i.d. arrivals.

An instance couples a bipartite graph (offline vertices with capacities,
online types with arrival rates) with a time horizon ``T`` and a per-arrival
match budget ``eta``.  Each online type ``v`` arrives in any given round with
probability ``rate_v / T``, independently across rounds; with the remaining
probability the round sees no arrival.

Vertex and edge ids are opaque strings externally; all algorithmic code works
on dense integer indices derived lazily from the id records.  Edge payloads
(weights, feature sets, per-type feature weights) live in ``EdgeFeatures``;
an instance plus its features plus an objective kind forms a ``Problem``,
the unit that serializes to disk.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

SCHEMA_HEADER = "osbm-instance/1"

OBJECTIVE_KINDS = ("linear", "coverage", "budget_additive", "per_user_coverage")

RATE_TOL = 1e-9


def fmt(x: float) -> str:
    """Decimal echo that round-trips float64 exactly."""
    return repr(float(x))


class IngestError(ValueError):
    """Raised when a ratings/genre file cannot be turned into an instance."""


@dataclass(frozen=True)
class Instance:
    """Bipartite b-matching instance with known-i.i.d. arrival rates.

    ``offline_ids[i]`` may be matched up to ``capacities[i]`` times.
    ``rates[j]`` is the expected number of arrivals of ``online_ids[j]`` over
    the horizon; the per-round arrival probability is ``rates[j] / horizon``.
    ``eta`` bounds how many edges a policy may match on a single arrival.
    """

    offline_ids: tuple[str, ...]
    capacities: tuple[int, ...]
    online_ids: tuple[str, ...]
    rates: tuple[float, ...]
    edge_ids: tuple[str, ...]
    edge_offline: tuple[str, ...]
    edge_online: tuple[str, ...]
    horizon: int
    eta: int = 1

    # -- dense views ------------------------------------------------------

    @cached_property
    def n_offline(self) -> int:
        return len(self.offline_ids)

    @cached_property
    def n_online(self) -> int:
        return len(self.online_ids)

    @cached_property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    @cached_property
    def offline_index(self) -> dict[str, int]:
        return {uid: i for i, uid in enumerate(self.offline_ids)}

    @cached_property
    def online_index(self) -> dict[str, int]:
        return {vid: i for i, vid in enumerate(self.online_ids)}

    @cached_property
    def edge_index(self) -> dict[str, int]:
        return {eid: i for i, eid in enumerate(self.edge_ids)}

    def _require_structural(self) -> None:
        problems = _structural_violations(self)
        if problems:
            raise ValueError(
                "instance has structural violations: " + "; ".join(problems)
            )

    @cached_property
    def edge_u(self) -> np.ndarray:
        """Dense offline endpoint index per edge."""
        self._require_structural()
        idx = self.offline_index
        return np.array([idx[uid] for uid in self.edge_offline], dtype=np.int64)

    @cached_property
    def edge_v(self) -> np.ndarray:
        """Dense online endpoint index per edge."""
        self._require_structural()
        idx = self.online_index
        return np.array([idx[vid] for vid in self.edge_online], dtype=np.int64)

    @cached_property
    def edges_at_u(self) -> tuple[np.ndarray, ...]:
        out: list[list[int]] = [[] for _ in range(self.n_offline)]
        for e, u in enumerate(self.edge_u):
            out[u].append(e)
        return tuple(np.array(lst, dtype=np.int64) for lst in out)

    @cached_property
    def edges_at_v(self) -> tuple[np.ndarray, ...]:
        out: list[list[int]] = [[] for _ in range(self.n_online)]
        for e, v in enumerate(self.edge_v):
            out[v].append(e)
        return tuple(np.array(lst, dtype=np.int64) for lst in out)

    @cached_property
    def rate_array(self) -> np.ndarray:
        return np.asarray(self.rates, dtype=float)

    @cached_property
    def capacity_array(self) -> np.ndarray:
        return np.asarray(self.capacities, dtype=np.int64)

    @cached_property
    def arrival_probs(self) -> np.ndarray:
        """Per-round arrival probability of each online type."""
        return self.rate_array / float(self.horizon)

    # -- derived instances ------------------------------------------------

    def with_capacities(self, b) -> "Instance":
        """Replace offline capacities (scalar broadcast or per-vertex)."""
        if np.isscalar(b):
            caps = tuple(int(b) for _ in self.offline_ids)
        else:
            caps = tuple(int(c) for c in b)
            if len(caps) != self.n_offline:
                raise ValueError("capacity vector length mismatch")
        return replace(self, capacities=caps)

    def with_eta(self, eta: int) -> "Instance":
        return replace(self, eta=int(eta))

    def validate(self) -> list[str]:
        return validate(self)


def build_instance(
    offline: Sequence[tuple[str, int]],
    online: Sequence[tuple[str, float]],
    edges: Sequence[tuple[str, str, str]],
    horizon: int,
    eta: int = 1,
) -> Instance:
    """Convenience constructor from (id, payload) record lists."""
    return Instance(
        offline_ids=tuple(uid for uid, _ in offline),
        capacities=tuple(int(c) for _, c in offline),
        online_ids=tuple(vid for vid, _ in online),
        rates=tuple(float(r) for _, r in online),
        edge_ids=tuple(eid for eid, _, _ in edges),
        edge_offline=tuple(u for _, u, _ in edges),
        edge_online=tuple(v for _, _, v in edges),
        horizon=int(horizon),
        eta=int(eta),
    )


def _structural_violations(inst: Instance) -> list[str]:
    problems: list[str] = []
    if len(set(inst.offline_ids)) != len(inst.offline_ids):
        problems.append("duplicate offline vertex id")
    if len(set(inst.online_ids)) != len(inst.online_ids):
        problems.append("duplicate online type id")
    if len(set(inst.edge_ids)) != len(inst.edge_ids):
        problems.append("duplicate edge id")
    u_ids = set(inst.offline_ids)
    v_ids = set(inst.online_ids)
    seen_pairs: set[tuple[str, str]] = set()
    for eid, u, v in zip(inst.edge_ids, inst.edge_offline, inst.edge_online):
        if u not in u_ids or v not in v_ids:
            problems.append(f"dangling endpoint on edge {eid!r}")
            continue
        if (u, v) in seen_pairs:
            problems.append(f"duplicate (u, v) pair on edge {eid!r}")
        seen_pairs.add((u, v))
    return problems


def validate(inst: Instance) -> list[str]:
    """Return every invariant violation (empty list means the instance is ok).

    Violations are data, not failures: callers decide whether to proceed.
    """
    problems = _structural_violations(inst)
    if len(inst.capacities) != len(inst.offline_ids):
        problems.append("capacity list length mismatch")
    if len(inst.rates) != len(inst.online_ids):
        problems.append("rate list length mismatch")
    if inst.horizon < 1:
        problems.append("horizon must be >= 1")
    if inst.eta < 1:
        problems.append("eta must be >= 1")
    for uid, cap in zip(inst.offline_ids, inst.capacities):
        if cap < 1:
            problems.append(f"capacity of {uid!r} must be >= 1 (got {cap})")
    total_rate = 0.0
    for vid, r in zip(inst.online_ids, inst.rates):
        if not np.isfinite(r) or r <= 0.0:
            problems.append(f"rate of {vid!r} out of range (0, 1]: got {fmt(r)}")
        elif r > 1.0 + RATE_TOL:
            problems.append(f"rate of {vid!r} out of range (0, 1]: got {fmt(r)}")
        total_rate += r
    if total_rate > inst.horizon * (1.0 + RATE_TOL) + RATE_TOL:
        problems.append(
            f"rates exceed horizon: sum of rates {fmt(total_rate)} > T = {inst.horizon}"
        )
    for id_group, label in (
        (inst.offline_ids, "offline vertex"),
        (inst.online_ids, "online type"),
        (inst.edge_ids, "edge"),
    ):
        for the_id in id_group:
            if not the_id or any(ch.isspace() for ch in the_id):
                problems.append(f"{label} id {the_id!r} is empty or has whitespace")
    return problems


@dataclass(frozen=True, eq=False)
class ArrivalSequence:
    """Realized arrival stream: one entry per round, -1 meaning no arrival."""

    slots: np.ndarray  # int64, length T, values in {-1} | [0, n_online)

    def __len__(self) -> int:
        return len(self.slots)

    @cached_property
    def arrival_times(self) -> np.ndarray:
        return np.flatnonzero(self.slots >= 0)

    @cached_property
    def arrivals(self) -> list[tuple[int, int]]:
        """(round, online type index) pairs, in time order."""
        ts = self.arrival_times
        return list(zip(ts.tolist(), self.slots[ts].tolist()))

    def counts(self, n_online: int) -> np.ndarray:
        """Number of arrivals per online type."""
        arrived = self.slots[self.slots >= 0]
        return np.bincount(arrived, minlength=n_online)


def sample_arrivals(inst: Instance, seed) -> ArrivalSequence:
    """Draw one arrival sequence: each round independently samples type ``v``
    with probability ``rate_v / T`` and no arrival with the leftover mass.
    """
    rng = np.random.default_rng(seed)
    probs = inst.arrival_probs
    cum = np.cumsum(probs)
    if cum.size and cum[-1] > 1.0 + RATE_TOL:
        raise ValueError("arrival probabilities exceed 1; instance is invalid")
    u = rng.random(inst.horizon)
    slots = np.searchsorted(cum, u, side="right")
    slots = np.where(slots >= inst.n_online, -1, slots).astype(np.int64)
    return ArrivalSequence(slots=slots)


@dataclass(frozen=True, eq=False)
class EdgeFeatures:
    """Per-edge payloads backing the submodular objectives.

    ``edge_weights`` feeds linear and budget-additive objectives;
    ``feature_sets`` (dense feature indices in ``[0, n_features)``) plus
    ``feature_weights`` feed coverage; ``user_weights`` (n_online x
    n_features) feeds the per-user coverage sum.  Unused payloads are None.
    """

    n_features: int = 0
    edge_weights: np.ndarray | None = None
    feature_sets: tuple[frozenset[int], ...] | None = None
    feature_weights: np.ndarray | None = None
    user_weights: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None

    def validate(self, n_edges: int) -> list[str]:
        problems = []
        if self.edge_weights is not None:
            w = np.asarray(self.edge_weights)
            if len(w) != n_edges:
                problems.append("edge weight vector length mismatch")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                problems.append("edge weights must be finite and >= 0")
        if self.feature_sets is not None:
            if len(self.feature_sets) != n_edges:
                problems.append("feature set list length mismatch")
            for q in self.feature_sets:
                for z in q:
                    if not (0 <= z < self.n_features):
                        problems.append(f"feature index {z} outside [0, {self.n_features})")
        for name, arr in (("feature", self.feature_weights), ("user", self.user_weights)):
            if arr is not None:
                a = np.asarray(arr)
                if not np.all(np.isfinite(a)) or np.any(a < 0):
                    problems.append(f"{name} weights must be finite and >= 0")
        return problems


@dataclass(frozen=True, eq=False)
class Problem:
    """Instance + edge features + objective kind: the on-disk unit."""

    instance: Instance
    features: EdgeFeatures
    kind: str
    budget: float | None = None

    def validate(self) -> list[str]:
        problems = validate(self.instance)
        problems += self.features.validate(self.instance.n_edges)
        if self.kind not in OBJECTIVE_KINDS:
            problems.append(f"unknown objective kind {self.kind!r}")
        if self.kind == "budget_additive" and (self.budget is None or self.budget < 0):
            problems.append("budget_additive requires a nonnegative budget")
        return problems


# -- synthetic generators --------------------------------------------------

COVERAGE_RECIPE = dict(n_offline=40, n_online=200, horizon=1000,
                       n_features=1000, max_degree=10, max_features=10)
BUDGET_RECIPE = dict(n_offline=100, n_online=200, horizon=200,
                     budget=50.0, max_degree=10)


def _random_rates(rng: np.random.Generator, n: int) -> tuple[float, ...]:
    # uniform on (0, 1]; arrival rates, not normalized
    return tuple((1.0 - rng.random(n)).tolist())


def _random_neighbors(rng: np.random.Generator, n_online: int, n_offline: int,
                      max_degree: int) -> list[np.ndarray]:
    nbrs = []
    for _ in range(n_online):
        deg = int(rng.integers(1, max_degree + 1))
        chosen = rng.choice(n_offline, size=min(deg, n_offline), replace=False)
        nbrs.append(np.sort(chosen))
    return nbrs


def generate_synthetic(kind: str, seed: int) -> Problem:
    """Build a synthetic problem of the given objective kind.

    ``coverage``: 40 offline vertices, 200 online types, T=1000; each type
    links to at most 10 random offline vertices; every vertex carries a
    random feature subset (size <= 10) of a 1000-feature universe and an
    edge covers the union of its endpoints' features; feature weights are
    uniform on [0, 1].

    ``budget_additive``: 100 offline vertices, 200 online types, T=200;
    edge weights uniform on [0, 1]; budget 50.

    Arrival rates are uniform on (0, 1] in both recipes (fractional rates).
    """
    rng = np.random.default_rng(seed)
    if kind == "coverage":
        p = COVERAGE_RECIPE
        rates = _random_rates(rng, p["n_online"])
        nbrs = _random_neighbors(rng, p["n_online"], p["n_offline"], p["max_degree"])
        vert_feats = []
        for _ in range(p["n_offline"] + p["n_online"]):
            size = int(rng.integers(1, p["max_features"] + 1))
            vert_feats.append(frozenset(rng.choice(p["n_features"], size=size,
                                                   replace=False).tolist()))
        u_feats = vert_feats[: p["n_offline"]]
        v_feats = vert_feats[p["n_offline"]:]
        feature_weights = rng.random(p["n_features"])
        edges, q_sets = [], []
        k = 0
        for vi in range(p["n_online"]):
            for ui in nbrs[vi]:
                edges.append((f"e{k}", f"u{ui}", f"v{vi}"))
                q_sets.append(u_feats[ui] | v_feats[vi])
                k += 1
        inst = build_instance(
            offline=[(f"u{i}", 1) for i in range(p["n_offline"])],
            online=list(zip((f"v{j}" for j in range(p["n_online"])), rates)),
            edges=edges,
            horizon=p["horizon"],
        )
        feats = EdgeFeatures(n_features=p["n_features"],
                             feature_sets=tuple(q_sets),
                             feature_weights=feature_weights)
        return Problem(instance=inst, features=feats, kind="coverage")

    if kind == "budget_additive":
        p = BUDGET_RECIPE
        rates = _random_rates(rng, p["n_online"])
        nbrs = _random_neighbors(rng, p["n_online"], p["n_offline"], p["max_degree"])
        edges = []
        k = 0
        for vi in range(p["n_online"]):
            for ui in nbrs[vi]:
                edges.append((f"e{k}", f"u{ui}", f"v{vi}"))
                k += 1
        weights = rng.random(len(edges))
        inst = build_instance(
            offline=[(f"u{i}", 1) for i in range(p["n_offline"])],
            online=list(zip((f"v{j}" for j in range(p["n_online"])), rates)),
            edges=edges,
            horizon=p["horizon"],
        )
        feats = EdgeFeatures(edge_weights=weights)
        return Problem(instance=inst, features=feats, kind="budget_additive",
                       budget=p["budget"])

    raise ValueError(f"unknown synthetic recipe kind {kind!r}")


# -- ratings ingestion -----------------------------------------------------

def _read_delimited(path, n_cols: int, what: str) -> list[tuple[str, ...]]:
    rows = []
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != n_cols:
                raise IngestError(
                    f"{what} file {path}: malformed row {lineno}: expected "
                    f"{n_cols} fields, got {len(row)}"
                )
            rows.append(tuple(field.strip() for field in row))
    return rows


def ingest_ratings(
    ratings_path,
    genres_path,
    num_users: int,
    num_movies: int,
    *,
    horizon: int | None = None,
    rates_mode: str = "normalized",
    seed: int = 0,
) -> Problem:
    """Build a per-user coverage problem from completed ratings and genres.

    ``ratings_path`` holds ``user,movie,rating`` rows (ratings already
    completed by whatever predictor the caller used); ``genres_path`` holds
    ``movie,genre`` rows.  The ``num_users`` most prolific raters become the
    online side and ``num_movies`` movies sampled at random become the
    offline side.  An edge joins movie ``m`` to user ``u`` exactly when ``u``
    has no rating for ``m``; the edge covers the genres of ``m``.  A user's
    weight for genre ``z`` is the mean of their ratings over movies carrying
    ``z``.

    ``rates_mode="normalized"`` draws per-user arrival probabilities
    uniformly and rescales them to sum to one (this can push individual
    rates above 1 when the horizon is large; ``validate`` reports those).
    ``rates_mode="integral"`` gives every user rate exactly 1 with
    ``horizon = num_users``.
    """
    rating_rows = _read_delimited(ratings_path, 3, "ratings")
    genre_rows = _read_delimited(genres_path, 2, "genres")

    ratings: dict[tuple[str, str], float] = {}
    user_counts: dict[str, int] = {}
    movie_set: set[str] = set()
    for lineno, (user, movie, value) in enumerate(rating_rows, start=1):
        try:
            r = float(value)
        except ValueError as exc:
            raise IngestError(
                f"ratings file: malformed row {lineno}: bad rating {value!r}"
            ) from exc
        ratings[(user, movie)] = r
        user_counts[user] = user_counts.get(user, 0) + 1
        movie_set.add(movie)

    genre_names = sorted({g for _, g in genre_rows})
    genre_index = {g: z for z, g in enumerate(genre_names)}
    movie_genres: dict[str, set[int]] = {}
    for movie, genre in genre_rows:
        movie_genres.setdefault(movie, set()).add(genre_index[genre])

    if len(user_counts) < num_users:
        raise IngestError(
            f"requested {num_users} users but ratings file has only "
            f"{len(user_counts)}"
        )
    if len(movie_set) < num_movies:
        raise IngestError(
            f"requested {num_movies} movies but ratings file has only "
            f"{len(movie_set)}"
        )

    # most-rated users first, ties by id for determinism
    users = sorted(user_counts, key=lambda u: (-user_counts[u], u))[:num_users]
    rng = np.random.default_rng(seed)
    movie_pool = sorted(movie_set)
    movies = [movie_pool[i] for i in
              sorted(rng.choice(len(movie_pool), size=num_movies, replace=False))]

    g = len(genre_names)
    user_weights = np.zeros((len(users), g))
    for vi, user in enumerate(users):
        sums = np.zeros(g)
        counts = np.zeros(g)
        for movie in movie_set:
            r = ratings.get((user, movie))
            if r is None:
                continue
            for z in movie_genres.get(movie, ()):
                sums[z] += r
                counts[z] += 1
        nz = counts > 0
        user_weights[vi, nz] = sums[nz] / counts[nz]

    edges, q_sets = [], []
    k = 0
    for vi, user in enumerate(users):
        for ui, movie in enumerate(movies):
            if (user, movie) in ratings:
                continue
            edges.append((f"e{k}", movie, user))
            q_sets.append(frozenset(movie_genres.get(movie, ())))
            k += 1

    n_users = len(users)
    if rates_mode == "integral":
        horizon = n_users
        rates = tuple(1.0 for _ in users)
    elif rates_mode == "normalized":
        if horizon is None:
            horizon = n_users
        raw = 1.0 - rng.random(n_users)
        probs = raw / raw.sum()
        rates = tuple((probs * horizon).tolist())
    else:
        raise IngestError(f"unknown rates mode {rates_mode!r}")

    inst = build_instance(
        offline=[(m, 1) for m in movies],
        online=list(zip(users, rates)),
        edges=edges,
        horizon=horizon,
    )
    feats = EdgeFeatures(
        n_features=g,
        feature_sets=tuple(q_sets),
        user_weights=user_weights,
        feature_names=tuple(genre_names),
    )
    return Problem(instance=inst, features=feats, kind="per_user_coverage")


# -- serialization ---------------------------------------------------------

def save_problem(problem: Problem, path) -> None:
    """Write a problem to its line-record text format (lossless round-trip)."""
    inst, feats = problem.instance, problem.features
    lines = [SCHEMA_HEADER,
             f"T {inst.horizon}",
             f"eta {inst.eta}",
             f"objective {problem.kind}"]
    if problem.budget is not None:
        lines.append(f"budget {fmt(problem.budget)}")
    if feats.n_features:
        lines.append(f"features {feats.n_features}")
    if feats.feature_names is not None:
        for z, name in enumerate(feats.feature_names):
            lines.append(f"fn {z} {name}")
    for uid, cap in zip(inst.offline_ids, inst.capacities):
        lines.append(f"u {uid} {cap}")
    for vid, rate in zip(inst.online_ids, inst.rates):
        lines.append(f"v {vid} {fmt(rate)}")
    has_w = feats.edge_weights is not None
    for k, (eid, u, v) in enumerate(
        zip(inst.edge_ids, inst.edge_offline, inst.edge_online)
    ):
        if has_w:
            lines.append(f"e {eid} {u} {v} {fmt(feats.edge_weights[k])}")
        else:
            lines.append(f"e {eid} {u} {v}")
    if feats.feature_sets is not None:
        for eid, q in zip(inst.edge_ids, feats.feature_sets):
            if q:
                lines.append(f"q {eid} " + " ".join(str(z) for z in sorted(q)))
    if feats.feature_weights is not None:
        for z, w in enumerate(feats.feature_weights):
            lines.append(f"fw {z} {fmt(w)}")
    if feats.user_weights is not None:
        for vi, vid in enumerate(inst.online_ids):
            for z in range(feats.user_weights.shape[1]):
                w = feats.user_weights[vi, z]
                if w != 0.0:
                    lines.append(f"uw {vid} {z} {fmt(w)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_problem(path) -> Problem:
    """Read a problem written by :func:`save_problem`."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SCHEMA_HEADER:
        raise ValueError(f"{path}: not an instance file (missing {SCHEMA_HEADER!r})")
    horizon = eta = None
    kind = "linear"
    budget = None
    n_features = 0
    feature_names: dict[int, str] = {}
    offline: list[tuple[str, int]] = []
    online: list[tuple[str, float]] = []
    edges: list[tuple[str, str, str]] = []
    edge_weights: dict[str, float] = {}
    q_sets: dict[str, frozenset[int]] = {}
    feature_weights: dict[int, float] = {}
    user_weight_rows: list[tuple[str, int, float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        tag = tok[0]
        try:
            if tag == "T":
                horizon = int(tok[1])
            elif tag == "eta":
                eta = int(tok[1])
            elif tag == "objective":
                kind = tok[1]
            elif tag == "budget":
                budget = float(tok[1])
            elif tag == "features":
                n_features = int(tok[1])
            elif tag == "fn":
                feature_names[int(tok[1])] = tok[2]
            elif tag == "u":
                offline.append((tok[1], int(tok[2])))
            elif tag == "v":
                online.append((tok[1], float(tok[2])))
            elif tag == "e":
                edges.append((tok[1], tok[2], tok[3]))
                if len(tok) > 4:
                    edge_weights[tok[1]] = float(tok[4])
            elif tag == "q":
                q_sets[tok[1]] = frozenset(int(z) for z in tok[2:])
            elif tag == "fw":
                feature_weights[int(tok[1])] = float(tok[2])
            elif tag == "uw":
                user_weight_rows.append((tok[1], int(tok[2]), float(tok[3])))
            else:
                raise ValueError(f"unknown record tag {tag!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}: bad record at line {lineno}: {line!r}") from exc
    if horizon is None or eta is None:
        raise ValueError(f"{path}: missing T or eta record")
    inst = build_instance(offline, online, edges, horizon, eta)

    ew = None
    if edge_weights:
        ew = np.array([edge_weights.get(eid, 0.0) for eid in inst.edge_ids])
    fs = None
    if q_sets or kind in ("coverage", "per_user_coverage"):
        fs = tuple(q_sets.get(eid, frozenset()) for eid in inst.edge_ids)
    fw = None
    if feature_weights:
        fw = np.zeros(n_features or (max(feature_weights) + 1))
        for z, w in feature_weights.items():
            fw[z] = w
    uw = None
    if user_weight_rows:
        uw = np.zeros((inst.n_online, n_features))
        vidx = inst.online_index
        for vid, z, w in user_weight_rows:
            uw[vidx[vid], z] = w
    names = None
    if feature_names:
        names = tuple(feature_names.get(z, str(z)) for z in range(n_features))
    feats = EdgeFeatures(n_features=n_features, edge_weights=ew, feature_sets=fs,
                         feature_weights=fw, user_weights=uw, feature_names=names)
    return Problem(instance=inst, features=feats, kind=kind, budget=budget)
