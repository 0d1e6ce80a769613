"""Normalized intersection brackets of psi classes and kappa_1.

``bracket(g, d)`` is the monomial

    (2 pi^2)^d0 / d0! * prod 4^d_i (2 d_i + 1)!! * int kappa_1^d0 prod psi_i^d_i,

with d0 = 3g - 3 + n - |d|.  Internally a bracket is handled as its rational
part (the value divided by pi^(2 d0)), which is all the memo store and the
cache file keep.

Brackets with at most three nonzero indices come from the shifted KdV engine
(:mod:`wpvol.kdv`); everything else goes through the kappa recursion on the
largest index, whose sub-brackets again take the fastest route available.
:func:`reference_bracket` runs the kappa recursion alone and serves as the
independent check of the fast path.
"""
from __future__ import annotations

import os
import tempfile
import threading
from dataclasses import dataclass
from itertools import combinations
from math import factorial
from typing import Callable, Iterable, Sequence

import gmpy2
from gmpy2 import mpq

from .errors import CacheFormatError, DomainError, StoreConflictError
from .exact import PiLaurent, Rational, alpha, double_factorial
from .kdv import ShiftedKdV, wk_to_reduced

__all__ = [
    "BracketKey",
    "MemoStore",
    "IdentityReport",
    "canonical_key",
    "d0_of",
    "bracket",
    "bracket_reduced",
    "reference_bracket",
    "a_part",
    "b_part",
    "c_part",
    "recursion_terms",
    "verify_recursion_I",
    "verify_recursion_II",
    "kappa_psi_integral",
    "store_dump",
    "store_load",
    "store_verify",
    "default_store",
    "set_default_store",
    "ensure_genus",
    "reserve_genus",
    "CACHE_HEADER",
]

CACHE_HEADER = "WPVOL-CACHE v1"

BracketKey = tuple  # (g, d) with d a descending tuple


def d0_of(g: int, d: Sequence[int]) -> int:
    return 3 * g - 3 + len(d) - sum(d)


def _stable(g: int, n: int) -> bool:
    return g >= 0 and 2 * g - 2 + n > 0


def canonical_key(g: int, d: Iterable[int]) -> BracketKey:
    """Validate and canonicalize; raises DomainError outside the domain."""
    if not isinstance(g, int) or g < 0:
        raise DomainError(f"genus must be a nonnegative integer, got {g!r}")
    d = tuple(d)
    if not d:
        raise DomainError("a bracket needs at least one insertion")
    for x in d:
        if not isinstance(x, int) or isinstance(x, bool):
            raise DomainError(f"indices must be integers, got {x!r}")
        if x < 0:
            raise DomainError(f"negative index {x}")
    n = len(d)
    if not _stable(g, n):
        raise DomainError(f"(g, n) = ({g}, {n}) is unstable")
    if sum(d) > 3 * g - 3 + n:
        raise DomainError(f"|d| = {sum(d)} exceeds 3g-3+n = {3 * g - 3 + n}")
    return g, tuple(sorted(d, reverse=True))


def _in_range(g: int, d: tuple) -> bool:
    n = len(d)
    return n >= 1 and _stable(g, n) and min(d) >= 0 and sum(d) <= 3 * g - 3 + n


# ---------------------------------------------------------------------------
# memo store


class MemoStore:
    """Thread-safe map from canonical keys to rational parts of brackets.

    Writes are idempotent: storing a different value for a known key raises
    :class:`StoreConflictError`.
    """

    def __init__(self):
        self._data: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.dirty = False

    def get(self, key):
        v = self._data.get(key)
        if v is None:
            self.misses += 1
        else:
            self.hits += 1
        return v

    def put(self, key, value: Rational) -> None:
        with self._lock:
            old = self._data.get(key)
            if old is None:
                self._data[key] = value
                self.dirty = True
            elif old != value:
                raise StoreConflictError(f"conflicting values for {key}: {old} vs {value}")

    def __contains__(self, key):
        return key in self._data

    def __len__(self):
        return len(self._data)

    def items(self):
        return sorted(self._data.items(), key=lambda kv: (kv[0][0], len(kv[0][1]), kv[0][1]))

    def __eq__(self, other):
        return isinstance(other, MemoStore) and self._data == other._data

    def clear(self):
        with self._lock:
            self._data.clear()
            self.hits = self.misses = 0
            self.dirty = False


_default_store = MemoStore()


def default_store() -> MemoStore:
    return _default_store


def set_default_store(store: MemoStore) -> MemoStore:
    """Swap the process-wide store; returns the previous one."""
    global _default_store
    old, _default_store = _default_store, store
    return old


# ---------------------------------------------------------------------------
# engine management

_engine: ShiftedKdV | None = None
_engine_lock = threading.RLock()
_MIN_GENUS = 8
_MIN_ORDER = 4
# below this genus, insertions of many tau_0 go through the recursion
# rather than forcing an engine rebuild with longer series
_SMALL_GENUS = 5
_GROWTH = 4
_reserved = 0


def reserve_genus(max_genus: int) -> None:
    """Size the next engine build for ``max_genus`` without building now.

    Cached values never touch the engine, so a warm run stays cheap.
    """
    global _reserved
    _reserved = max(_reserved, max_genus)


def ensure_genus(max_genus: int, x_order: int = _MIN_ORDER) -> ShiftedKdV:
    """Make sure the shared engine covers ``max_genus`` (builds or rebuilds)."""
    global _engine
    with _engine_lock:
        e = _engine
        if e is None or e.max_genus < max_genus or e.x_order < x_order:
            G = max(max_genus, _MIN_GENUS, e.max_genus if e else 0)
            if e is not None and e.max_genus < max_genus:
                # grow in steps so a genus-by-genus sweep rebuilds rarely
                G = max(G, e.max_genus + _GROWTH)
            N = max(x_order, _MIN_ORDER, e.x_order if e else 0)
            _engine = ShiftedKdV(G, N)
        return _engine


def _engine_value(g: int, d: tuple):
    """Rational part from the KdV engine, or None if the key is not routed there."""
    nz = [x for x in d if x]
    m = len(d) - len(nz)
    if len(nz) > 3:
        return None
    e = _engine
    # x-degree the engine must resolve for this route
    need_order = (len(d) - 2, m - 1, m, m + 1)[len(nz)] if len(d) > 1 else 0
    if e is None or e.max_genus < g or e.depth(g) < need_order:
        if need_order > _MIN_ORDER + 4 and g <= _SMALL_GENUS and len(d) > 3:
            return None
        e = ensure_genus(max(g, _reserved), need_order - 4)
    with _engine_lock:
        if len(d) == 1:
            return e.one_point_reduced(g, d[0])
        if not nz:
            q = e.volume_wk(g, len(d))
        elif len(nz) == 1:
            q = e.r_chain_wk(g, nz[0], m)
        elif len(nz) == 2:
            q = e.two_point_wk(g, nz[0], nz[1], m)
        else:
            q = e.three_point_wk(g, nz[0], nz[1], nz[2], m)
    return wk_to_reduced(g, d, q)


# ---------------------------------------------------------------------------
# the kappa recursion


def _base_value(g: int, d: tuple):
    if g == 0 and len(d) == 3:
        return mpq(1)
    if g == 1 and len(d) == 1:
        return mpq(1, 12) if d[0] == 0 else mpq(1, 2)
    return None


def recursion_terms(g: int, d: Sequence[int], lookup: Callable) -> tuple:
    """Per-L inner sums of the kappa recursion with d[0] distinguished.

    Returns ``(A, B, C)``: ``A`` is a list (one entry per j = 2..n) and B, C
    are single entries; each entry is a list over L = 0..d0 of rational
    parts, already carrying the factors 8(2 d_j + 1) and 16.  The bracket is
    sum_L alpha_L * (sum_j A_j[L] + B[L] + C[L]) times pi^(2 d0).
    ``lookup(g, d)`` must return 0 for unstable or out-of-range keys.
    """
    d = tuple(d)
    d0 = d0_of(g, d)
    d1, rest = d[0], d[1:]
    A = []
    for j, dj in enumerate(rest):
        others = rest[:j] + rest[j + 1 :]
        w = 8 * (2 * dj + 1)
        A.append([w * lookup(g, (L + d1 + dj - 1,) + others) for L in range(d0 + 1)])
    B = [mpq(0)] * (d0 + 1)
    C = [mpq(0)] * (d0 + 1)
    if g >= 1:
        for L in range(d0 + 1):
            m = L + d1 - 2
            acc = mpq(0)
            for k1 in range(m + 1):
                acc += lookup(g - 1, (k1, m - k1) + rest)
            B[L] = 16 * acc
    nr = len(rest)
    idx = range(nr)
    for r in range(nr + 1):
        for I in combinations(idx, r):
            Iv = tuple(rest[i] for i in I)
            Jv = tuple(rest[i] for i in idx if i not in I)
            for g1 in range(g + 1):
                g2 = g - g1
                if not (_stable(g1, len(Iv) + 1) and _stable(g2, len(Jv) + 1)):
                    continue
                for L in range(d0 + 1):
                    m = L + d1 - 2
                    acc = mpq(0)
                    for k1 in range(m + 1):
                        a = lookup(g1, (k1,) + Iv)
                        if a:
                            b = lookup(g2, (m - k1,) + Jv)
                            if b:
                                acc += a * b
                    C[L] += 16 * acc
    return A, B, C


def _assemble(terms) -> mpq:
    A, B, C = terms
    tot = mpq(0)
    for L in range(len(B)):
        s = B[L] + C[L]
        for a in A:
            s += a[L]
        if s:
            tot += alpha(L) * s
    return tot


def _lookup(g, d):
    if not _in_range(g, d):
        return mpq(0)
    return _reduced(g, tuple(sorted(d, reverse=True)))


def _reduced(g: int, d: tuple, store: MemoStore | None = None) -> mpq:
    store = store if store is not None else _default_store
    key = (g, d)
    v = store.get(key)
    if v is not None:
        return v
    v = _base_value(g, d)
    if v is None:
        v = _engine_value(g, d)
    if v is None:
        v = _assemble(recursion_terms(g, d, _lookup))
    store.put(key, v)
    return v


def bracket_reduced(g: int, d: Iterable[int], store: MemoStore | None = None) -> mpq:
    """Rational part q of bracket(g, d) = q * pi^(2 d0)."""
    g, d = canonical_key(g, d)
    return _reduced(g, d, store)


def bracket(g: int, d: Iterable[int], store: MemoStore | None = None) -> PiLaurent:
    g, d = canonical_key(g, d)
    return PiLaurent.monomial(_reduced(g, d, store), d0_of(g, d))


class _Reference:
    """Pure kappa-recursion evaluation with its own memo."""

    def __init__(self):
        self.memo: dict = {}

    def __call__(self, g, d):
        if not _in_range(g, d):
            return mpq(0)
        d = tuple(sorted(d, reverse=True))
        key = (g, d)
        v = self.memo.get(key)
        if v is None:
            v = _base_value(g, d)
            if v is None:
                v = _assemble(recursion_terms(g, d, self))
            self.memo[key] = v
        return v


_reference = _Reference()


def reference_bracket(g: int, d: Iterable[int]) -> PiLaurent:
    """bracket(g, d) through the kappa recursion only (no KdV engine)."""
    g, d = canonical_key(g, d)
    return PiLaurent.monomial(_reference(g, d), d0_of(g, d))


# ---------------------------------------------------------------------------
# the three summands


def _parts(g, d):
    # at the base cases (0,3) and (1,1) every term vanishes
    g, d = canonical_key(g, d)
    return g, d, recursion_terms(g, d, _lookup)


def _weighted(g, d, series) -> PiLaurent:
    tot = mpq(0)
    for L, x in enumerate(series):
        if x:
            tot += alpha(L) * x
    return PiLaurent.monomial(tot, d0_of(g, d))


def a_part(g: int, d: Iterable[int], j: int) -> PiLaurent:
    """A^j for j in 2..n, with the largest index distinguished."""
    g, d, (A, _, _) = _parts(g, d)
    if not 2 <= j <= len(d):
        raise DomainError(f"j must lie in 2..{len(d)}")
    return _weighted(g, d, A[j - 2])


def b_part(g: int, d: Iterable[int]) -> PiLaurent:
    g, d, (_, B, _) = _parts(g, d)
    return _weighted(g, d, B)


def c_part(g: int, d: Iterable[int]) -> PiLaurent:
    g, d, (_, _, C) = _parts(g, d)
    return _weighted(g, d, C)


# ---------------------------------------------------------------------------
# identity checks


@dataclass(frozen=True)
class IdentityReport:
    name: str
    key: tuple
    lhs: PiLaurent
    rhs: PiLaurent

    @property
    def difference(self) -> PiLaurent:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.difference.is_zero()

    def summary(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} {self.key}"


def _value_or_zero(g, d) -> PiLaurent:
    d = tuple(d)
    if not _in_range(g, d):
        return PiLaurent()
    return bracket(g, d)


def verify_recursion_I(g: int, d: Sequence[int] = ()) -> IdentityReport:
    """[tau_0 tau_1 prod]_g = [tau_0^4 prod]_{g-1} + 6 sum [tau_0^2 prod_I]_{g1} [tau_0^2 prod_J]_{g2}."""
    d = tuple(d)
    canonical_key(g, (0, 1) + d)
    lhs = bracket(g, (0, 1) + d)
    rhs = _value_or_zero(g - 1, (0, 0, 0, 0) + d) if g >= 1 else PiLaurent()
    n = len(d)
    split = PiLaurent()
    for r in range(n + 1):
        for I in combinations(range(n), r):
            Iv = tuple(d[i] for i in I)
            Jv = tuple(d[i] for i in range(n) if i not in I)
            for g1 in range(g + 1):
                a = _value_or_zero(g1, (0, 0) + Iv)
                if a:
                    b = _value_or_zero(g - g1, (0, 0) + Jv)
                    split = split + a * b
    rhs = rhs + 6 * split
    return IdentityReport("recursion-I", (g, d), lhs, rhs)


def verify_recursion_II(g: int, d: Sequence[int]) -> IdentityReport:
    """(2g-2+n)[prod]_g = 1/2 sum_L (-1)^(L-1) L pi^(2L-2)/(2L+1)! [tau_L prod]_g."""
    g, d = canonical_key(g, d)
    n = len(d)
    lhs = (2 * g - 2 + n) * bracket(g, d)
    rhs = PiLaurent()
    for L in range(1, 3 * g - 1 + n):
        term = _value_or_zero(g, (L,) + d)
        if term:
            c = mpq((-1) ** (L - 1) * L, 2 * factorial(2 * L + 1))
            rhs = rhs + term.shift(L - 1) * c
    return IdentityReport("recursion-II", (g, d), lhs, rhs)


def kappa_psi_integral(g: int, d: Iterable[int]) -> Rational:
    """int kappa_1^d0 prod psi_i^d_i, recovered from the bracket."""
    g, d = canonical_key(g, d)
    q = _reduced(g, d)
    d0 = d0_of(g, d)
    pref = mpq(2**d0, factorial(d0))
    for x in d:
        pref *= 4**x * double_factorial(2 * x + 1)
    return q / pref


# ---------------------------------------------------------------------------
# cache file


def _format_line(key, q) -> str:
    g, d = key
    return f"{g};{len(d)};{','.join(map(str, d))};{q.numerator};{q.denominator};{d0_of(g, d)}"


def store_dump(path: str | os.PathLike, store: MemoStore | None = None) -> None:
    """Write the store in canonical order; atomic replace under an advisory lock."""
    store = store if store is not None else _default_store
    path = os.fspath(path)
    body = [CACHE_HEADER] + [_format_line(k, v) for k, v in store.items()]
    text = "\n".join(body) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    with _file_lock(path):
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".wpvol-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    store.dirty = False


def _parse_line(text: str, lineno: int):
    parts = text.split(";")
    if len(parts) != 6:
        raise CacheFormatError(f"expected 6 fields, got {len(parts)}", lineno)
    try:
        g = int(parts[0])
        n = int(parts[1])
        d = tuple(int(x) for x in parts[2].split(",")) if parts[2] else ()
        num, den, e = int(parts[3]), int(parts[4]), int(parts[5])
    except ValueError as exc:
        raise CacheFormatError(f"non-integer field ({exc})", lineno) from None
    if len(d) != n:
        raise CacheFormatError(f"n = {n} but {len(d)} indices", lineno)
    if list(d) != sorted(d, reverse=True):
        raise CacheFormatError("indices not sorted descending", lineno)
    try:
        canonical_key(g, d)
    except DomainError as exc:
        raise CacheFormatError(f"invalid key: {exc}", lineno) from None
    if den <= 0 or num <= 0:
        raise CacheFormatError("value must be a positive rational", lineno)
    if gmpy2.gcd(num, den) != 1:
        raise CacheFormatError("rational not in lowest terms", lineno)
    if e != d0_of(g, d):
        raise CacheFormatError(
            f"homogeneity violation: pi2exp {e} but 3g-3+n-|d| = {d0_of(g, d)}", lineno
        )
    return (g, d), mpq(num, den)


def store_load(path: str | os.PathLike, into: MemoStore | None = None) -> MemoStore:
    """Read a cache file, validating every line; errors name the line number."""
    store = into if into is not None else MemoStore()
    with open(path, encoding="ascii") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != CACHE_HEADER:
        found = lines[0] if lines else ""
        raise CacheFormatError(f"bad header {found!r}, expected {CACHE_HEADER!r}", 1)
    if lines and lines[-1] == "":
        lines.pop()
    was_dirty = store.dirty
    for lineno, text in enumerate(lines[1:], start=2):
        if not text:
            raise CacheFormatError("empty line", lineno)
        key, q = _parse_line(text, lineno)
        try:
            store.put(key, q)
        except StoreConflictError as exc:
            raise CacheFormatError(str(exc), lineno) from None
    store.dirty = was_dirty
    return store


class _file_lock:
    """Advisory exclusive lock on ``path + '.lock'`` (no-op where fcntl is missing)."""

    def __init__(self, path):
        self.path = path + ".lock"
        self.fh = None

    def __enter__(self):
        try:
            import fcntl
        except ImportError:  # pragma: no cover - non-POSIX
            return self
        self.fh = open(self.path, "a")
        fcntl.flock(self.fh, fcntl.LOCK_EX)
        return self

    def __exit__(self, *exc):
        if self.fh is not None:
            import fcntl

            fcntl.flock(self.fh, fcntl.LOCK_UN)
            self.fh.close()
        return False


def store_verify(path: str | os.PathLike) -> tuple:
    """Re-validate a cache file and recompute every entry independently.

    Returns ``(entries, None)`` when all values agree, otherwise
    ``(entries_checked, CacheFormatError)`` naming the first offending line.
    Recomputation goes through a private store so the file cannot vouch for
    itself.
    """
    try:
        with open(path, encoding="ascii") as fh:
            lines = fh.read().split("\n")
    except UnicodeDecodeError as exc:
        return 0, CacheFormatError(f"not ASCII text ({exc.reason})", None)
    if not lines or lines[0] != CACHE_HEADER:
        return 0, CacheFormatError(f"bad header, expected {CACHE_HEADER!r}", 1)
    if lines[-1] == "":
        lines.pop()
    global _default_store
    saved, _default_store = _default_store, MemoStore()
    seen = set()
    prev = None
    try:
        for lineno, text in enumerate(lines[1:], start=2):
            if not text:
                return lineno - 2, CacheFormatError("empty line", lineno)
            try:
                key, q = _parse_line(text, lineno)
            except CacheFormatError as exc:
                return lineno - 2, exc
            if key in seen:
                return lineno - 2, CacheFormatError(f"duplicate key {key}", lineno)
            seen.add(key)
            order = (key[0], len(key[1]), key[1])
            if prev is not None and order < prev:
                return lineno - 2, CacheFormatError("entries out of canonical order", lineno)
            prev = order
            if _reduced(*key) != q:
                return lineno - 2, CacheFormatError(f"value disagrees with recomputation for {key}", lineno)
        return len(lines) - 1, None
    finally:
        _default_store = saved
