"""Artist catalog: popularity scores, genre tags, and the similarity graph.

The catalog is the shared data model every other module samples from or
trains on. It is immutable after construction and safe to read from many
threads. On disk a catalog is JSON Lines, one artist per line with fields
``id``, ``name``, ``popularity``, ``genres``, ``similar``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

# The 20 genre tags used as the default pool for synthetic catalogs and for
# scene sampling in the benchmark.
COMMON_GENRES: tuple[str, ...] = (
    "rock",
    "jazz",
    "punk",
    "reggae",
    "electronic",
    "metal",
    "indie r&b",
    "metalcore",
    "pop",
    "indie",
    "latin",
    "classical",
    "folk",
    "country",
    "dubstep",
    "indie pop",
    "rap",
    "tech house",
    "norteno",
    "house",
)


class CatalogError(ValueError):
    """Malformed catalog data: bad record, out-of-range popularity, or a
    similar-artist reference that cannot be resolved."""


@dataclass(frozen=True)
class Artist:
    """One artist record. ``popularity`` is an integer on the 0-100 scale;
    ``genres`` is an ordered, possibly empty list of tags."""

    id: str
    name: str
    popularity: int
    genres: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.popularity, int) or isinstance(self.popularity, bool):
            raise CatalogError(f"artist {self.id!r}: popularity must be an integer, got {self.popularity!r}")
        if not 0 <= self.popularity <= 100:
            raise CatalogError(f"artist {self.id!r}: popularity {self.popularity} outside [0, 100]")


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """Binary artist-artist adjacency. ``rows[i]`` holds the sorted dense
    indices of the artists listed as similar to artist i; entries are unique
    and never include i itself."""

    rows: tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return len(self.rows)

    @cached_property
    def edge_count(self) -> int:
        return int(sum(r.size for r in self.rows))

    def to_dense(self) -> np.ndarray:
        """0/1 float matrix; intended for small graphs in tests and oracles."""
        dense = np.zeros((self.n, self.n))
        for i, row in enumerate(self.rows):
            dense[i, row] = 1.0
        return dense

    def transpose(self) -> "SimilarityGraph":
        incoming: list[list[int]] = [[] for _ in range(self.n)]
        for i, row in enumerate(self.rows):
            for j in row:
                incoming[int(j)].append(i)
        return SimilarityGraph(tuple(np.asarray(r, dtype=np.int64) for r in incoming))

    def validate(self) -> None:
        for i, row in enumerate(self.rows):
            if row.size == 0:
                continue
            if row.min() < 0 or row.max() >= self.n:
                raise CatalogError(f"row {i}: similar index outside the artist index")
            if np.any(np.diff(row) <= 0):
                raise CatalogError(f"row {i}: indices must be strictly increasing (set semantics)")
            if np.any(row == i):
                raise CatalogError(f"row {i}: self-loop")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SimilarityGraph):
            return NotImplemented
        return self.n == other.n and all(np.array_equal(a, b) for a, b in zip(self.rows, other.rows))


@dataclass(frozen=True, eq=False)
class Catalog:
    """Artists plus their similarity graph over a shared dense index.

    Row i of the graph belongs to ``artists[i]``; artists are kept sorted by
    id so the index (and everything derived from it) is deterministic.
    """

    artists: tuple[Artist, ...]
    graph: SimilarityGraph

    @classmethod
    def build(cls, artists: Iterable[Artist], similar: Mapping[str, Sequence[str]]) -> "Catalog":
        """Construct and validate a catalog from artist records and per-id
        similar lists. Raises CatalogError on duplicate ids, dangling
        references, or self-references."""
        ordered = tuple(sorted(artists, key=lambda a: a.id))
        index: dict[str, int] = {}
        for pos, artist in enumerate(ordered):
            if artist.id in index:
                raise CatalogError(f"duplicate artist id {artist.id!r}")
            index[artist.id] = pos
        rows: list[np.ndarray] = []
        for artist in ordered:
            cols: set[int] = set()
            for ref in similar.get(artist.id, ()):
                if ref not in index:
                    raise CatalogError(f"artist {artist.id!r}: similar reference {ref!r} not in catalog")
                if ref == artist.id:
                    raise CatalogError(f"artist {artist.id!r}: listed as similar to itself")
                cols.add(index[ref])
            rows.append(np.asarray(sorted(cols), dtype=np.int64))
        return cls(ordered, SimilarityGraph(tuple(rows)))

    @property
    def n(self) -> int:
        return len(self.artists)

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.artists)

    @cached_property
    def index(self) -> Mapping[str, int]:
        return {a.id: i for i, a in enumerate(self.artists)}

    @cached_property
    def popularities(self) -> np.ndarray:
        return np.asarray([a.popularity for a in self.artists], dtype=np.int64)

    @cached_property
    def by_genre(self) -> Mapping[str, tuple[int, ...]]:
        table: dict[str, list[int]] = {}
        for i, artist in enumerate(self.artists):
            for g in artist.genres:
                table.setdefault(g, []).append(i)
        return {g: tuple(v) for g, v in table.items()}

    @cached_property
    def genres(self) -> tuple[str, ...]:
        return tuple(sorted(self.by_genre))

    def index_hash(self) -> str:
        """Digest of the artist index; stored with trained models so a model
        is never scored against a catalog it was not trained on."""
        return hashlib.sha256("\n".join(self.ids).encode("utf-8")).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Catalog):
            return NotImplemented
        return self.artists == other.artists and self.graph == other.graph


@dataclass(frozen=True)
class PercentileReport:
    """Popularity values of one artist subset at the 25/50/75/95th
    percentiles (nearest-rank)."""

    label: str
    count: int
    p25: int
    p50: int
    p75: int
    p95: int

    def as_row(self) -> tuple[str, int, int, int, int, int]:
        return (self.label, self.count, self.p25, self.p50, self.p75, self.p95)


@dataclass(frozen=True, eq=False)
class UserVector:
    """Sparse seed-artist indicator vector over a catalog's dense index."""

    indices: np.ndarray
    n: int

    @classmethod
    def from_ids(cls, catalog: Catalog, seed_ids: Iterable[str]) -> "UserVector":
        try:
            idx = sorted({catalog.index[s] for s in seed_ids})
        except KeyError as exc:
            raise CatalogError(f"unknown seed artist id {exc.args[0]!r}") from None
        return cls(np.asarray(idx, dtype=np.int64), catalog.n)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.n)
        dense[self.indices] = 1.0
        return dense

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UserVector):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.indices, other.indices)


_REQUIRED_FIELDS = ("id", "name", "popularity", "genres", "similar")


def load_catalog(path: str | Path) -> Catalog:
    """Load a JSON Lines catalog file. Rows end up sorted by id. Raises
    CatalogError on any malformed record or unresolvable reference."""
    artists: list[Artist] = []
    similar: dict[str, list[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CatalogError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict) or any(f not in record for f in _REQUIRED_FIELDS):
                raise CatalogError(f"{path}:{lineno}: record must have fields {', '.join(_REQUIRED_FIELDS)}")
            if not isinstance(record["genres"], list) or not all(isinstance(g, str) for g in record["genres"]):
                raise CatalogError(f"{path}:{lineno}: genres must be a list of strings")
            if not isinstance(record["similar"], list) or not all(isinstance(s, str) for s in record["similar"]):
                raise CatalogError(f"{path}:{lineno}: similar must be a list of ids")
            artist = Artist(
                id=str(record["id"]),
                name=str(record["name"]),
                popularity=record["popularity"],
                genres=tuple(record["genres"]),
            )
            artists.append(artist)
            similar[artist.id] = list(record["similar"])
    return Catalog.build(artists, similar)


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    """Write a catalog as JSON Lines; output is byte-deterministic for a
    given catalog (rows in index order, similar lists in id order)."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, artist in enumerate(catalog.artists):
            record = {
                "id": artist.id,
                "name": artist.name,
                "popularity": artist.popularity,
                "genres": list(artist.genres),
                "similar": [catalog.ids[j] for j in catalog.graph.rows[i]],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def nearest_rank(values: Sequence[int], p: int) -> int:
    """Nearest-rank percentile: the value at 1-based rank ceil(p*n/100) of
    the ascending-sorted sample."""
    ordered = sorted(values)
    if not ordered:
        raise CatalogError("percentile of an empty sample")
    rank = math.ceil(p * len(ordered) / 100)
    return ordered[max(rank, 1) - 1]


def popularity_percentiles(
    catalog: Catalog,
    predicate: Callable[[Artist], bool] | None = None,
    label: str = "all",
) -> PercentileReport:
    """Popularity percentiles of the artists passing ``predicate`` (all
    artists when None). An empty subset is an error, not a report of zeros."""
    subset = [a.popularity for a in catalog.artists if predicate is None or predicate(a)]
    if not subset:
        raise CatalogError(f"percentile subset {label!r} is empty")
    subset.sort()
    return PercentileReport(
        label=label,
        count=len(subset),
        p25=nearest_rank(subset, 25),
        p50=nearest_rank(subset, 50),
        p75=nearest_rank(subset, 75),
        p95=nearest_rank(subset, 95),
    )


def select_genres_greedy(catalog: Catalog, n: int) -> list[str]:
    """Pick up to n genres by repeatedly taking the genre that tags the most
    not-yet-covered artists, then removing those artists. Ties go to the
    lexicographically smaller genre; stops early once no genre covers anyone.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    remaining: dict[str, set[int]] = {g: set(v) for g, v in catalog.by_genre.items()}
    picked: list[str] = []
    for _ in range(n):
        best_genre = ""
        best_cover: set[int] = set()
        for genre in sorted(remaining):
            cover = remaining[genre]
            if len(cover) > len(best_cover):
                best_genre, best_cover = genre, cover
        if not best_cover:
            break
        picked.append(best_genre)
        covered = remaining.pop(best_genre)
        for cover in remaining.values():
            cover -= covered
    return picked


def artists_in_range(catalog: Catalog, genre: str, lo: int, hi: int) -> list[str]:
    """Ids of artists tagged with ``genre`` whose popularity lies in the
    closed range [lo, hi], in id order. Unknown genres yield an empty list."""
    if not (0 <= lo <= hi <= 100):
        raise ValueError(f"invalid popularity range [{lo}, {hi}]")
    members = catalog.by_genre.get(genre, ())
    return [catalog.ids[i] for i in members if lo <= catalog.artists[i].popularity <= hi]


def top_popular_in_genre(catalog: Catalog, genre: str, n: int) -> list[str]:
    """Up to n ids for the genre, most popular first; popularity ties break
    toward the smaller id."""
    if n < 1:
        raise ValueError("n must be >= 1")
    members = catalog.by_genre.get(genre, ())
    ranked = sorted(members, key=lambda i: (-catalog.artists[i].popularity, catalog.ids[i]))
    return [catalog.ids[i] for i in ranked[:n]]
