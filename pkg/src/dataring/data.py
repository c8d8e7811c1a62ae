"""Public domains, histogram datasets and CSV ingestion.

Labels are 0-based positions in the domain's canonical order.  A full
domain enumerates every attribute-value tuple lexicographically, first
attribute slowest; each value's integer code is its position in the
attribute's value list.  A capped domain keeps a*N of those tuples (the
dataset's own plus filler) in the same relative order.
"""

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DomainError
from .rng import as_rng


@dataclass(frozen=True)
class Attribute:
    name: str
    values: tuple
    kind: str = "categorical"

    def __post_init__(self):
        if self.kind not in ("categorical", "integer"):
            raise ConfigurationError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if not self.values:
            raise ConfigurationError(f"attribute {self.name!r} has no values")
        if len(set(self.values)) != len(self.values):
            raise ConfigurationError(f"attribute {self.name!r} repeats a value")

    def code(self, value):
        try:
            return self.values.index(value)
        except ValueError:
            raise DomainError(f"{value!r} is not a value of {self.name!r}") from None


class Schema:
    """Ordered attributes; maps value tuples to mixed-radix codes and back."""

    def __init__(self, attributes):
        self.attributes = tuple(attributes)
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate attribute names")
        if not names:
            raise ConfigurationError("schema needs at least one attribute")
        self.radices = tuple(len(a.values) for a in self.attributes)
        self.full_size = int(np.prod(self.radices, dtype=object))

    @property
    def names(self):
        return tuple(a.name for a in self.attributes)

    def encode(self, values):
        if len(values) != len(self.attributes):
            raise DomainError(f"expected {len(self.attributes)} fields, got {len(values)}")
        code = 0
        for attr, value in zip(self.attributes, values):
            code = code * len(attr.values) + attr.code(value)
        return code

    def digits(self, code):
        out = []
        for radix in reversed(self.radices):
            code, d = divmod(code, radix)
            out.append(d)
        return out[::-1]

    def from_digits(self, digits):
        code = 0
        for radix, d in zip(self.radices, digits):
            code = code * radix + d
        return code

    def decode(self, code):
        return tuple(a.values[d] for a, d in zip(self.attributes, self.digits(code)))

    def __eq__(self, other):
        return isinstance(other, Schema) and self.attributes == other.attributes


class Domain:
    """Enumerated label space: either a full schema product or a capped subset.

    ``codes`` holds the sorted full-space codes of the kept tuples, or is
    None for the full product.  A domain without a schema is a bare range of
    ``size`` labels, which is all the protocol itself needs.
    """

    def __init__(self, size, schema=None, codes=None, cap=None, seed=None):
        self.size = int(size)
        self.schema = schema
        self.codes = None if codes is None else np.asarray(codes, dtype=np.int64)
        self.cap = cap
        self.seed = seed

    def __len__(self):
        return self.size

    @classmethod
    def bare(cls, size):
        if size < 1:
            raise ConfigurationError("domain size must be positive")
        return cls(size)

    @classmethod
    def full(cls, schema):
        return cls(schema.full_size, schema)

    def label_of_code(self, code):
        if self.codes is None:
            return int(code)
        i = int(np.searchsorted(self.codes, code))
        if i == self.size or self.codes[i] != code:
            raise DomainError("record lies outside the capped domain")
        return i

    def label(self, values):
        """Label of an attribute-value tuple."""
        if self.schema is None:
            raise DomainError("domain has no schema")
        return self.label_of_code(self.schema.encode(values))

    def values(self, label):
        if self.schema is None:
            raise DomainError("domain has no schema")
        if not 0 <= label < self.size:
            raise DomainError(f"label {label} outside [0, {self.size})")
        code = int(label) if self.codes is None else int(self.codes[label])
        return self.schema.decode(code)

    def labels_where(self, predicate):
        """Labels whose value tuple satisfies ``predicate(dict)``."""
        names = self.schema.names
        return [i for i in range(self.size) if predicate(dict(zip(names, self.values(i))))]


def _size(domain):
    return domain if isinstance(domain, (int, np.integer)) else len(domain)


def build_domain(schema, dataset_codes, cap=None, seed=None, max_misses=None):
    """Domain holding every dataset record plus filler, |domain| = cap * N.

    Filler comes from perturbing one attribute of a randomly chosen real
    record, rejecting tuples already taken.  If that stops finding fresh
    tuples (tiny or saturated neighbourhoods), the rest is drawn uniformly
    from the unused part of the full product.
    """
    dataset_codes = np.unique(np.asarray(dataset_codes, dtype=np.int64))
    if cap is None:
        return Domain.full(schema)
    if cap <= 1:
        raise ConfigurationError("domain cap must be greater than 1")
    n = len(dataset_codes)
    target = int(cap * n)
    if target > schema.full_size:
        raise ConfigurationError(
            f"cap {cap} needs {target} labels but the schema has only {schema.full_size}"
        )
    rng = as_rng(seed)
    taken = set(int(c) for c in dataset_codes)
    need = target - n
    misses, limit = 0, max_misses if max_misses is not None else 50 * max(need, 1)
    while need > 0 and misses < limit:
        base = schema.digits(int(dataset_codes[rng.integers(n)]))
        j = int(rng.integers(len(base)))
        radix = schema.radices[j]
        if radix == 1:
            misses += 1
            continue
        base[j] = (base[j] + 1 + int(rng.integers(radix - 1))) % radix
        code = schema.from_digits(base)
        if code in taken:
            misses += 1
            continue
        taken.add(code)
        need -= 1
    while need > 0:
        code = int(rng.integers(schema.full_size))
        if code not in taken:
            taken.add(code)
            need -= 1
    return Domain(target, schema, sorted(taken), cap=cap, seed=seed)


class HistogramDataset:
    """0/1 indicator over a domain; N is its popcount."""

    def __init__(self, indicator, domain=None):
        ind = np.array(indicator, dtype=np.uint8)
        if ind.ndim != 1 or (ind > 1).any():
            raise DomainError("indicator must be a 0/1 vector")
        self.indicator = ind
        self.indicator.setflags(write=False)
        self.domain = domain

    @classmethod
    def from_labels(cls, labels, domain):
        ind = np.zeros(_size(domain), dtype=np.uint8)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= len(ind)):
            raise DomainError("label outside the domain")
        ind[labels] = 1
        return cls(ind, domain if not isinstance(domain, (int, np.integer)) else None)

    @property
    def size(self):
        return len(self.indicator)

    @cached_property
    def N(self):
        return int(self.indicator.sum())

    @cached_property
    def labels(self):
        return np.flatnonzero(self.indicator)

    @cached_property
    def absent(self):
        """Labels not in the dataset."""
        return np.flatnonzero(self.indicator == 0)

    def __eq__(self, other):
        return isinstance(other, HistogramDataset) and np.array_equal(self.indicator, other.indicator)

    def to_bytes(self):
        """8-byte little-endian N, then the indicator packed LSB-first."""
        return struct.pack("<Q", self.N) + np.packbits(self.indicator, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, data, domain):
        (n,) = struct.unpack_from("<Q", data)
        size = _size(domain)
        bits = np.unpackbits(np.frombuffer(data[8:], dtype=np.uint8), bitorder="little")
        if len(bits) < size:
            raise DomainError("bit image shorter than the domain")
        ds = cls(bits[:size].copy(), None if isinstance(domain, int) else domain)
        if ds.N != n:
            raise DomainError(f"bit image holds {ds.N} records but its header says {n}")
        return ds


def load_dataset(rows, domain):
    """Histogram of ``rows``; duplicates collapse.  Returns (dataset, duplicates)."""
    ind = np.zeros(len(domain), dtype=np.uint8)
    duplicates = 0
    for index, row in enumerate(rows):
        try:
            label = domain.label(tuple(row))
        except DomainError as exc:
            raise DomainError(f"row {index}: {exc}", row=index) from None
        if ind[label]:
            duplicates += 1
        ind[label] = 1
    return HistogramDataset(ind, domain), duplicates


def read_csv(path):
    """(header, rows) from a UTF-8 CSV with a header line."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError("CSV file is empty; a header row is required") from None
        rows = [tuple(r) for r in reader if r]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DomainError(f"row {i}: expected {len(header)} fields, got {len(r)}", row=i)
    return header, rows


def schema_from_rows(header, rows, kinds=None, previous=None):
    """Schema whose value lists extend ``previous`` in first-seen order.

    Integer attributes keep raw strings in numeric order instead.
    """
    kinds = kinds or {}
    prior = {a.name: a for a in previous.attributes} if previous else {}
    attrs = []
    for j, name in enumerate(header):
        kind = kinds.get(name, prior[name].kind if name in prior else "categorical")
        seen = list(prior[name].values) if name in prior else []
        known = set(seen)
        for r in rows:
            if r[j] not in known:
                known.add(r[j])
                seen.append(r[j])
        if kind == "integer":
            try:
                seen.sort(key=int)
            except ValueError as exc:
                raise DomainError(f"attribute {name!r}: {exc}") from None
        attrs.append(Attribute(name, tuple(seen), kind))
    return Schema(attrs)


@dataclass
class BackgroundKnowledge:
    labels: np.ndarray
    seed: object = None

    @property
    def L(self):
        return len(self.labels)


def sample_background(ds, L, seed=None):
    if not 1 <= L <= ds.N:
        raise ConfigurationError(f"background size L={L} must lie in [1, N={ds.N}]")
    picked = as_rng(seed).choice(ds.labels, size=L, replace=False)
    return BackgroundKnowledge(np.sort(picked), seed)


def synth_dataset(N, domain, seed=None):
    size = _size(domain)
    if not 0 <= N <= size:
        raise ConfigurationError(f"N={N} must lie in [0, |domain|={size}]")
    labels = as_rng(seed).choice(size, size=N, replace=False)
    return HistogramDataset.from_labels(labels, domain)


def synth_schema(radices):
    """Integer-valued attributes a0, a1, ... with the given cardinalities."""
    return Schema(
        Attribute(f"a{j}", tuple(str(v) for v in range(r)), "integer")
        for j, r in enumerate(radices)
    )


def synth_records(schema, N, seed=None):
    """N distinct full-space codes drawn uniformly."""
    if N > schema.full_size:
        raise ConfigurationError("more records requested than the schema holds")
    rng = as_rng(seed)
    if schema.full_size <= 10**7:
        return np.sort(rng.choice(schema.full_size, size=N, replace=False))
    # sparse draw; choice() would allocate the whole space
    codes = set()
    while len(codes) < N:
        codes.update(int(c) for c in rng.integers(schema.full_size, size=N - len(codes)))
    return np.sort(np.fromiter(codes, dtype=np.int64))


@dataclass
class Permutation:
    """Forward map sigma and its inverse, both as index arrays."""

    forward: np.ndarray
    inverse: np.ndarray = field(default=None)

    def __post_init__(self):
        self.forward = np.asarray(self.forward, dtype=np.int64)
        if self.inverse is None:
            self.inverse = invert_permutation(self.forward)

    @classmethod
    def identity(cls, size):
        return cls(np.arange(size))

    def __len__(self):
        return len(self.forward)


def invert_permutation(perm):
    perm = np.asarray(perm, dtype=np.int64)
    n = len(perm)
    if n and (perm.min() < 0 or perm.max() >= n or np.bincount(perm, minlength=n).max() != 1):
        raise ValueError("not a permutation")
    inv = np.empty(n, dtype=np.int64)
    inv[perm] = np.arange(n)
    return inv


def random_permutation(size, seed=None):
    if size < 1:
        raise ConfigurationError("permutation size must be positive")
    return Permutation(as_rng(seed).permutation(size))


MANIFEST_HEADER = "# dataring domain manifest"


def domain_to_text(domain):
    """Flat key=value manifest: attributes, value codes, cap, seed, kept codes."""
    lines = [MANIFEST_HEADER, f"size={domain.size}"]
    if domain.cap is not None:
        lines.append(f"cap={domain.cap}")
    if domain.seed is not None:
        lines.append(f"seed={domain.seed}")
    if domain.schema is not None:
        for attr in domain.schema.attributes:
            lines.append(f"attribute={attr.name},{attr.kind}")
            for code, value in enumerate(attr.values):
                lines.append(f"value={attr.name},{code},{value}")
    if domain.codes is not None:
        lines.append("codes=" + ",".join(str(int(c)) for c in domain.codes))
    return "\n".join(lines) + "\n"


def domain_from_text(text):
    size, cap, seed, codes = None, None, None, None
    order, kinds, values = [], {}, {}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition("=")
        if key == "size":
            size = int(rest)
        elif key == "cap":
            cap = float(rest) if "." in rest else int(rest)
        elif key == "seed":
            seed = int(rest)
        elif key == "attribute":
            name, kind = rest.rsplit(",", 1)
            order.append(name)
            kinds[name] = kind
            values[name] = []
        elif key == "value":
            name, code, value = rest.split(",", 2)
            if int(code) != len(values[name]):
                raise ConfigurationError(f"manifest value codes for {name!r} are not contiguous")
            values[name].append(value)
        elif key == "codes":
            codes = [int(c) for c in rest.split(",")] if rest else []
        else:
            raise ConfigurationError(f"unknown manifest key {key!r}")
    schema = Schema(Attribute(n, tuple(values[n]), kinds[n]) for n in order) if order else None
    if size is None:
        raise ConfigurationError("manifest lacks size")
    return Domain(size, schema, codes, cap=cap, seed=seed)
