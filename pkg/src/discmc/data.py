"""Ratings datasets: MovieLens u.data ingestion, train/test splits and
synthetic discrete low-rank problems."""
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DataError, ParameterError, ParseError
from .linalg import ObservedMatrix
from .regularizers import Alphabet

MOVIELENS_ALPHABET = Alphabet.integers(1, 5)
MOVIELENS_100K = dict(n_ratings=100_000, n_users=943, n_items=1682)


@dataclass(frozen=True)
class RatingsDataset:
    """Known ratings with 0-based user/item indices."""

    n_users: int
    n_items: int
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    source: str = ""

    def __post_init__(self):
        for name in ("users", "items", "ratings"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        if not self.users.shape == self.items.shape == self.ratings.shape:
            raise DataError("users, items and ratings differ in length")
        if self.users.size:
            if self.users.min() < 0 or self.users.max() >= self.n_users:
                raise DataError("user index out of range")
            if self.items.min() < 0 or self.items.max() >= self.n_items:
                raise DataError("item index out of range")
            lin = self.users.astype(np.int64) * self.n_items + self.items
            if np.unique(lin).size != lin.size:
                raise DataError("duplicate (user, item) pair")

    def __len__(self):
        return int(self.ratings.size)

    @property
    def shape(self):
        return (self.n_users, self.n_items)

    def triplets(self):
        return list(zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist()))

    def to_observed(self, idx=None):
        sel = slice(None) if idx is None else idx
        return ObservedMatrix(self.shape, self.users[sel], self.items[sel], self.ratings[sel])


@dataclass(frozen=True)
class SplitSpec:
    observed_ratio: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.observed_ratio <= 1:
            raise ParameterError(f"observed_ratio must be in (0, 1], got {self.observed_ratio}")


@dataclass(frozen=True)
class SyntheticSpec:
    m: int
    n: int
    rank: int
    alphabet: Alphabet = MOVIELENS_ALPHABET
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ParameterError("m and n must be >= 1")
        if not 1 <= self.rank <= min(self.m, self.n):
            raise ParameterError(f"rank must be in [1, {min(self.m, self.n)}]")
        if not isinstance(self.alphabet, Alphabet):
            object.__setattr__(self, "alphabet", Alphabet(self.alphabet))


def parse_udata(text, alphabet=MOVIELENS_ALPHABET, source=""):
    """Parse u.data text: ``user<TAB>item<TAB>rating<TAB>timestamp`` with 1-based ids."""
    allowed = set(alphabet.values) if alphabet is not None else None
    users, items, ratings = [], [], []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(fields)}", lineno)
        try:
            u, i, r, _ = (int(f) for f in fields)
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno) from None
        if u < 1 or i < 1:
            raise ParseError(f"ids are 1-based, got user={u} item={i}", lineno)
        if allowed is not None and float(r) not in allowed:
            raise DataError(f"line {lineno}: rating {r} not in alphabet {{{alphabet}}}")
        users.append(u - 1)
        items.append(i - 1)
        ratings.append(float(r))
    users = np.array(users, dtype=np.int64)
    items = np.array(items, dtype=np.int64)
    n_users = int(users.max()) + 1 if users.size else 0
    n_items = int(items.max()) + 1 if items.size else 0
    if users.size:
        lin = users * n_items + items
        uniq, first = np.unique(lin, return_index=True)
        if uniq.size != lin.size:
            seen = np.zeros(lin.size, dtype=bool)
            seen[first] = True
            dup = int(np.flatnonzero(~seen)[0])
            raise DataError(f"duplicate (user, item) pair ({users[dup] + 1}, {items[dup] + 1})")
    return RatingsDataset(n_users, n_items, users, items, np.array(ratings), source)


def load_movielens(path, alphabet=MOVIELENS_ALPHABET, canonical=False):
    """Load a MovieLens u.data file.

    Ids become 0-based and timestamps are dropped. With ``canonical=True``
    the record, user and item counts of MovieLens-100k are verified.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as err:
        raise DataError(f"cannot read {path}: {err.strerror}") from err
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as err:
        raise ParseError(f"{path}: non-ASCII byte at offset {err.start}") from None
    ds = parse_udata(text, alphabet=alphabet, source=str(path))
    if canonical:
        got = dict(n_ratings=len(ds), n_users=ds.n_users, n_items=ds.n_items)
        if got != MOVIELENS_100K:
            raise DataError(f"{path} is not the canonical MovieLens-100k file: {got}")
    return ds


def format_udata(ds):
    """u.data text for ``ds``: 1-based ids, integer ratings, timestamp 0."""
    r = ds.ratings
    if r.size and not np.all(r == np.round(r)):
        raise DataError("u.data stores integer ratings only")
    lines = [f"{u + 1}\t{i + 1}\t{int(v)}\t0\n" for u, i, v in zip(ds.users.tolist(), ds.items.tolist(), r.tolist())]
    return "".join(lines)


def export_udata(ds, path):
    Path(path).write_text(format_udata(ds), encoding="ascii", newline="\n")
    return Path(path)


def split_size(ratio, total):
    """``floor(ratio * total)`` with ``ratio`` taken as the decimal it prints as."""
    return math.floor(Fraction(repr(float(ratio))) * total)


def split(ds, spec):
    """Seeded uniform split of the known ratings into (train, test)."""
    if ds.n_users < 1 or ds.n_items < 1:
        raise DataError("cannot split an empty dataset")
    N = len(ds)
    n_train = split_size(spec.observed_ratio, N)
    perm = np.random.default_rng(spec.seed).permutation(N)
    return ds.to_observed(perm[:n_train]), ds.to_observed(perm[n_train:])


def lowrank_factors(spec):
    """Gaussian factors ``(A, B)`` whose product ``A @ B.T`` seeds the synthetic truth."""
    rng = np.random.default_rng(spec.seed)
    A = rng.standard_normal((spec.m, spec.rank))
    B = rng.standard_normal((spec.n, spec.rank))
    return A, B


def synth_discrete_lowrank(spec):
    """Quantized low-rank ground truth and its full ratings list.

    ``A @ B.T`` is rescaled affinely onto ``[min(alphabet), max(alphabet)]``
    and each entry is rounded to the nearest alphabet value (ties upward).
    """
    A, B = lowrank_factors(spec)
    M = A @ B.T
    lo, hi = spec.alphabet.values[0], spec.alphabet.values[-1]
    span = M.max() - M.min()
    if span > 0 and hi > lo:
        M = lo + (M - M.min()) * ((hi - lo) / span)
    else:
        M = np.full_like(M, 0.5 * (lo + hi))
    truth = spec.alphabet.nearest(M)
    users, items = np.divmod(np.arange(spec.m * spec.n), spec.n)
    ds = RatingsDataset(spec.m, spec.n, users, items, truth.ravel().copy(),
                        source=f"synthetic:m={spec.m},n={spec.n},rank={spec.rank},seed={spec.seed}")
    return truth, ds
