"""Noncommutative words over Alice, Bob and Eve operators.

A letter is a ``(kind, index)`` tuple. Alice's ``A_x`` and Bob's ``B_y`` are
the outcome-0 projectors of each binary input (the outcome-1 projector is
``1 - A_x``); Eve's ``Z_a`` and its adjoint ``Z_a*`` are unconstrained
operators, one per Alice outcome. Operators of different parties commute.
Words are tuples of letters; the empty tuple is the identity.
"""

from itertools import product
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

Letter = Tuple[int, int]
Word = Tuple[Letter, ...]

KIND_A, KIND_B, KIND_Z, KIND_ZD = 0, 1, 2, 3
IDENTITY: Word = ()

_NAMES = {KIND_A: "A", KIND_B: "B", KIND_Z: "Z", KIND_ZD: "Z"}


def alice(x: int) -> Letter:
    """Alice's projector A_x onto outcome 0."""
    return (KIND_A, x)


def bob(y: int) -> Letter:
    """Bob's projector B_y onto outcome 0."""
    return (KIND_B, y)


def eve(a: int) -> Letter:
    """Eve's operator Z_a."""
    return (KIND_Z, a)


def eve_dag(a: int) -> Letter:
    """Adjoint Z_a*."""
    return (KIND_ZD, a)


def party(letter: Letter) -> int:
    """Commutation class of a letter; Z and Z* share Eve's class."""
    return min(letter[0], KIND_Z)


def is_projector(letter: Letter) -> bool:
    """True for Alice's and Bob's letters, which square to themselves."""
    return letter[0] in (KIND_A, KIND_B)


def adjoint(word: Sequence[Letter]) -> Word:
    """Reverse the word and swap Z with Z*; projectors are self-adjoint."""
    swap = {KIND_Z: KIND_ZD, KIND_ZD: KIND_Z}
    return tuple((swap.get(kind, kind), index) for kind, index in reversed(word))


def _collapse(word: Sequence[Letter]) -> Word:
    out: List[Letter] = []
    for letter in word:
        if out and out[-1] == letter and is_projector(letter):
            continue
        out.append(letter)
    return tuple(out)


def normal_form(word: Sequence[Letter]) -> Word:
    """Sort letters by party (stable) and collapse repeated projectors."""
    return _collapse(sorted(word, key=party))


def reduce_word(word: Sequence[Letter], rng: Optional[np.random.Generator] = None) -> Word:
    """Rewrite one rule application at a time, in random order, until no rule applies.

    Rules: swap adjacent letters of different parties that are out of party
    order, and drop one of two equal adjacent projectors. The result equals
    :func:`normal_form`; this slow path exists to exercise confluence.
    """
    rng = rng if rng is not None else np.random.default_rng()
    current = list(word)
    while True:
        sites = []
        for i in range(len(current) - 1):
            left, right = current[i], current[i + 1]
            if party(left) > party(right):
                sites.append(("swap", i))
            elif left == right and is_projector(left):
                sites.append(("drop", i))
        if not sites:
            return tuple(current)
        rule, i = sites[rng.integers(len(sites))]
        if rule == "swap":
            current[i], current[i + 1] = current[i + 1], current[i]
        else:
            del current[i + 1]


def canonical(word: Sequence[Letter]) -> Word:
    """Representative of {w, w*} in a real moment matrix."""
    nf = normal_form(word)
    return min(nf, normal_form(adjoint(nf)), key=lambda w: (len(w), w))


def format_word(word: Sequence[Letter]) -> str:
    """Readable form of a word, \"1\" for the identity.

    Examples:
        >>> format_word(((KIND_A, 0), (KIND_ZD, 1)))
        'A0 Z1*'
    """
    if not word:
        return "1"
    return " ".join(f"{_NAMES[k]}{i}{'*' if k == KIND_ZD else ''}" for k, i in word)


def scenario_letters(inputs_a: int = 2, inputs_b: int = 3, outcomes: int = 2) -> List[Letter]:
    """Every generator of the 2322 scenario with one Eve operator per Alice outcome."""
    letters = [alice(x) for x in range(inputs_a)] + [bob(y) for y in range(inputs_b)]
    letters += [eve(a) for a in range(outcomes)] + [eve_dag(a) for a in range(outcomes)]
    return letters


def monomial_basis(level: int = 2, extras: bool = True, inputs_a: int = 2, inputs_b: int = 3,
                   outcomes: int = 2) -> List[Word]:
    """NPA basis of the given level, optionally with the words A B Z and A Z* Z.

    Words are deduplicated by normal form and kept in generation order, so
    the basis is deterministic.
    """
    letters = scenario_letters(inputs_a, inputs_b, outcomes)
    candidates: List[Iterable[Letter]] = [IDENTITY]
    for length in range(1, level + 1):
        candidates.extend(product(letters, repeat=length))
    if extras:
        zs = [eve(a) for a in range(outcomes)] + [eve_dag(a) for a in range(outcomes)]
        for x, y, z in product(range(inputs_a), range(inputs_b), zs):
            candidates.append((alice(x), bob(y), z))
        for x, a in product(range(inputs_a), range(outcomes)):
            candidates.append((alice(x), eve_dag(a), eve(a)))
    basis: List[Word] = []
    seen = set()
    for word in candidates:
        nf = normal_form(word)
        if nf not in seen:
            seen.add(nf)
            basis.append(nf)
    return basis
