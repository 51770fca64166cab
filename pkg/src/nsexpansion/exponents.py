"""Exact rational power semigroup generated by force exponents and the integer 1.

Given force exponents ``gammas``, the solution exponents are every value
``gamma_{n_1} + ... + gamma_{n_p} + k`` (``p >= 1``, ``k >= 0`` integer), listed in
increasing order. All arithmetic is done with :class:`fractions.Fraction`
because the coefficient recursion relies on exact equalities between sums.

Indices returned by the queries in this module are 0-based: ``mus[0]`` is the
smallest exponent.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

GAMMA = "gamma"
GENERATED = "generated"


def parse_exponent(x) -> Fraction:
    """Parse ``"3/2"``, ``"1.5"``, ints or Fractions into a positive reduced Fraction."""
    if isinstance(x, Fraction):
        q = x
    elif isinstance(x, float):
        raise TypeError("float exponents are ambiguous; pass a string such as '3/2'")
    else:
        try:
            q = Fraction(str(x).strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse exponent {x!r}") from exc
    return q


def parse_exponents(text: str | Iterable) -> list[Fraction]:
    if isinstance(text, str):
        items = [s for s in text.split(",") if s.strip()]
    else:
        items = list(text)
    return [parse_exponent(s) for s in items]


@dataclass(frozen=True)
class ExponentSequence:
    """Strictly increasing exponents ``mus`` with origin flags.

    ``origins[i]`` is ``("gamma", j)`` when ``mus[i] == gammas[j]`` and
    ``("generated", None)`` otherwise.
    """

    gammas: tuple[Fraction, ...]
    cutoff: Fraction
    mus: tuple[Fraction, ...]
    origins: tuple[tuple[str, int | None], ...]

    def __len__(self) -> int:
        return len(self.mus)

    def __getitem__(self, i) -> Fraction:
        return self.mus[i]

    def index(self, mu) -> int:
        return self.mus.index(Fraction(mu))

    def is_integer_sequence(self) -> bool:
        """True when ``mus == (1, 2, ..., len)``."""
        return all(m == i + 1 for i, m in enumerate(self.mus))

    def truncated(self, length: int) -> "ExponentSequence":
        length = min(length, len(self.mus))
        cut = self.mus[length - 1] if length else Fraction(0)
        return ExponentSequence(self.gammas, cut, self.mus[:length], self.origins[:length])

    def extended(self, cutoff) -> "ExponentSequence":
        return generate_semigroup(self.gammas, cutoff)

    def next_exponent(self) -> Fraction:
        """Smallest semigroup element above ``cutoff``; exists since ``mu + 1`` is in the set."""
        ext = generate_semigroup(self.gammas, self.cutoff + 1)
        return next(m for m in ext.mus if m > self.cutoff)

    def as_dicts(self) -> list[dict]:
        return [{"mu": str(m), "origin": o[0]} for m, o in zip(self.mus, self.origins)]


def _validate_gammas(gammas: Sequence) -> tuple[Fraction, ...]:
    gs = tuple(parse_exponent(g) for g in gammas)
    if not gs:
        raise ValueError("at least one gamma is required")
    if any(g <= 0 for g in gs):
        raise ValueError("gammas must be positive")
    if any(b <= a for a, b in zip(gs, gs[1:])):
        raise ValueError("gammas must be strictly increasing")
    return gs


def generate_semigroup(gammas: Sequence, cutoff) -> ExponentSequence:
    """All ``sum(gammas chosen with repetition, p >= 1) + k <= cutoff``, sorted and deduplicated."""
    gs = _validate_gammas(gammas)
    cut = parse_exponent(cutoff)
    if cut < gs[0]:
        raise ValueError(f"cutoff {cut} is below the smallest gamma {gs[0]}")
    usable = [g for g in gs if g <= cut]

    # closure of {gamma} under adding any gamma or 1, bounded by cut
    found: set[Fraction] = set(usable)
    frontier = list(usable)
    steps = usable + [Fraction(1)]
    while frontier:
        nxt = []
        for x in frontier:
            for s in steps:
                y = x + s
                if y <= cut and y not in found:
                    found.add(y)
                    nxt.append(y)
        frontier = nxt

    mus = tuple(sorted(found))
    gamma_pos = {g: j for j, g in enumerate(gs)}
    origins = tuple((GAMMA, gamma_pos[m]) if m in gamma_pos else (GENERATED, None) for m in mus)
    return ExponentSequence(gs, cut, mus, origins)


def integer_sequence(length: int) -> ExponentSequence:
    """The case ``gammas = (1,)``: ``mus = 1, 2, ..., length``."""
    return generate_semigroup([1], length)


def pair_decompositions(seq: ExponentSequence, n: int) -> list[tuple[int, int]]:
    """Ordered index pairs ``(k, m)``, both below ``n``, with ``mus[k] + mus[m] == mus[n]``."""
    target = seq.mus[n]
    pos = {m: i for i, m in enumerate(seq.mus[:n])}
    out = []
    for k in range(n):
        m = pos.get(target - seq.mus[k])
        if m is not None:
            out.append((k, m))
    return out


def shift_predecessor(seq: ExponentSequence, n: int) -> int | None:
    """Index ``p < n`` with ``mus[p] + 1 == mus[n]``, or None."""
    target = seq.mus[n] - 1
    for p in range(n):
        if seq.mus[p] == target:
            return p
    return None
