"""Synthetic transduction corpora and the weak-supervision split.

Two generators are provided: a mini version of the SCAN navigation-command
task and a mini version of PCFG SET (string-manipulation functions written in
prefix notation). Both ship their interpreters, so any command from the
respective grammars can be evaluated, not only the generated ones.
"""
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .vocab import Vocab

Tokens = list[str]
RngLike = Union[int, np.random.Generator, None]


def _rng(rng: RngLike) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def tokenize(line: str) -> Tokens:
    return line.split()


@dataclass
class ParallelCorpus:
    pairs: list[tuple[Tokens, Tokens]]
    vocab_x: Vocab = field(default=None)
    vocab_z: Vocab = field(default=None)

    def __post_init__(self):
        if self.vocab_x is None:
            self.vocab_x = Vocab.from_corpus(self.xs)
        if self.vocab_z is None:
            self.vocab_z = Vocab.from_corpus(self.zs)

    @property
    def xs(self) -> list[Tokens]:
        return [x for x, _ in self.pairs]

    @property
    def zs(self) -> list[Tokens]:
        return [z for _, z in self.pairs]

    def __len__(self):
        return len(self.pairs)

    def subset(self, indices: Iterable[int]) -> "ParallelCorpus":
        return ParallelCorpus([self.pairs[i] for i in indices], self.vocab_x, self.vocab_z)

    def save(self, path) -> None:
        write_parallel(path, self.pairs)


# ---------------------------------------------------------------------------
# SCAN

_ACTIONS = {"walk": "I_WALK", "run": "I_RUN", "jump": "I_JUMP", "look": "I_LOOK"}
_TURNS = {"left": "I_TURN_LEFT", "right": "I_TURN_RIGHT"}
_REPEATS = {"twice": 2, "thrice": 3}
# verb precedence used by the mini grammar to pick "and" vs "after"
MINI_SCAN_VERB_ORDER = ("look", "walk", "run", "jump")


def _scan_primitive(words: Sequence[str]) -> Tokens:
    if not words:
        raise ValueError("empty SCAN phrase")
    verb, rest = words[0], list(words[1:])
    reps = 1
    if rest and rest[-1] in _REPEATS:
        reps = _REPEATS[rest.pop()]
    modifier = None
    if rest and rest[0] in ("opposite", "around"):
        modifier = rest.pop(0)
    direction = rest.pop(0) if rest else None
    if rest or (direction is not None and direction not in _TURNS):
        raise ValueError(f"malformed SCAN phrase: {' '.join(words)!r}")
    if verb == "turn":
        if direction is None:
            raise ValueError("'turn' needs a direction")
        act: Tokens = []
    elif verb in _ACTIONS:
        act = [_ACTIONS[verb]]
    else:
        raise ValueError(f"unknown SCAN verb {verb!r}")
    if direction is None:
        if modifier is not None:
            raise ValueError(f"{modifier!r} needs a direction")
        unit = act
    else:
        turn = _TURNS[direction]
        if modifier == "opposite":
            unit = [turn, turn] + act
        elif modifier == "around":
            unit = ([turn] + act) * 4
        else:
            unit = [turn] + act
    return unit * reps


def interpret_scan(command: Union[str, Sequence[str]]) -> Tokens:
    """Action sequence of a SCAN command under the standard SCAN semantics."""
    words = tokenize(command) if isinstance(command, str) else list(command)
    for conj in ("and", "after"):
        if conj in words:
            i = words.index(conj)
            left, right = _scan_primitive(words[:i]), _scan_primitive(words[i + 1 :])
            return left + right if conj == "and" else right + left
    return _scan_primitive(words)


def _scan_phrases(verbs, directions, repeats):
    for verb, direction, rep in itertools.product(verbs, directions, repeats):
        yield [verb] + direction + rep


def mini_scan_commands() -> list[Tokens]:
    """All commands of the mini grammar, in a fixed order.

    The subset is chosen so that the command -> actions map is injective
    (each action sequence has exactly one command): conjunctions join two
    non-turn phrases with different verbs, and the phrase whose verb comes
    first in ``MINI_SCAN_VERB_ORDER`` is always written first, with "and" or
    "after" chosen to give the right execution order.
    """
    dirs = [[], ["left"], ["right"], ["opposite", "left"], ["opposite", "right"]]
    reps = [[], ["twice"], ["thrice"]]
    verbs = list(MINI_SCAN_VERB_ORDER)
    simple = list(_scan_phrases(verbs, dirs, reps))
    simple += list(_scan_phrases(["turn"], [["left"], ["right"]], reps))
    rank = {v: i for i, v in enumerate(MINI_SCAN_VERB_ORDER)}
    actions = [p for p in simple if p[0] != "turn"]
    compound = []
    for first, second in itertools.product(actions, actions):  # execution order
        if first[0] == second[0]:
            continue
        if rank[first[0]] < rank[second[0]]:
            compound.append(first + ["and"] + second)
        else:
            compound.append(second + ["after"] + first)
    return simple + compound


def full_scan_commands() -> list[Tokens]:
    dirs = [[], ["left"], ["right"], ["opposite", "left"], ["opposite", "right"],
            ["around", "left"], ["around", "right"]]
    reps = [[], ["twice"], ["thrice"]]
    simple = list(_scan_phrases(list(_ACTIONS), dirs, reps))
    simple += list(_scan_phrases(["turn"], [d for d in dirs if d], reps))
    compound = [a + [c] + b for a, b in itertools.product(simple, simple) for c in ("and", "after")]
    return simple + compound


def generate_mini_scan(size: int, rng: RngLike = 0, grammar: str = "mini") -> ParallelCorpus:
    """Sample ``size`` distinct commands and their action sequences."""
    pool = {"mini": mini_scan_commands, "full": full_scan_commands}[grammar]()
    if size > len(pool):
        raise ValueError(f"requested {size} commands but the {grammar} grammar has {len(pool)}")
    picks = _rng(rng).choice(len(pool), size=size, replace=False)
    return ParallelCorpus([(pool[i], interpret_scan(pool[i])) for i in picks])


# ---------------------------------------------------------------------------
# PCFG SET

UNARY = {
    "copy": lambda s: list(s),
    "reverse": lambda s: s[::-1],
    "shift": lambda s: s[1:] + s[:1],
    "echo": lambda s: s + s[-1:],
    "swap_first_last": lambda s: s[-1:] + s[1:-1] + s[:1] if len(s) > 1 else list(s),
    "repeat": lambda s: s + s,
}
BINARY = {
    "append": lambda a, b: a + b,
    "prepend": lambda a, b: b + a,
    "remove_first": lambda a, b: list(b),
    "remove_second": lambda a, b: list(a),
}


def interpret_pcfg(expression: Union[str, Sequence[str]]) -> Tokens:
    """Evaluate a prefix-notation PCFG SET expression.

    Binary arguments are separated by ","; a string argument runs until the
    next "," or the end of input.
    """
    toks = tokenize(expression) if isinstance(expression, str) else list(expression)
    value, pos = _pcfg_parse(toks, 0)
    if pos != len(toks):
        raise ValueError(f"trailing tokens in PCFG expression: {toks[pos:]}")
    return value


def _pcfg_parse(toks, pos):
    if pos >= len(toks):
        raise ValueError("unexpected end of PCFG expression")
    head = toks[pos]
    if head in UNARY:
        arg, pos = _pcfg_parse(toks, pos + 1)
        return UNARY[head](arg), pos
    if head in BINARY:
        a, pos = _pcfg_parse(toks, pos + 1)
        if pos >= len(toks) or toks[pos] != ",":
            raise ValueError("binary function expects ',' between its arguments")
        b, pos = _pcfg_parse(toks, pos + 1)
        return BINARY[head](a, b), pos
    end = pos
    while end < len(toks) and toks[end] != "," and toks[end] not in UNARY and toks[end] not in BINARY:
        end += 1
    if end == pos:
        raise ValueError(f"expected a string argument at position {pos}")
    return toks[pos:end], end


def _pcfg_sample(rng, depth, symbols, max_string):
    if depth > 0 and rng.random() < 0.7:
        if rng.random() < 0.5:
            name = list(UNARY)[rng.integers(len(UNARY))]
            return [name] + _pcfg_sample(rng, depth - 1, symbols, max_string)
        name = list(BINARY)[rng.integers(len(BINARY))]
        a = _pcfg_sample(rng, depth - 1, symbols, max_string)
        b = _pcfg_sample(rng, depth - 1, symbols, max_string)
        return [name] + a + [","] + b
    n = int(rng.integers(1, max_string + 1))
    return [symbols[i] for i in rng.integers(len(symbols), size=n)]


def generate_mini_pcfg_set(
    size: int,
    depth: int = 2,
    rng: RngLike = 0,
    letters: str = "ABCDE",
    numbers: int = 5,
    max_string: int = 3,
    max_output: int = 20,
) -> ParallelCorpus:
    """Sample ``size`` distinct expressions of nesting depth <= ``depth``."""
    rng = _rng(rng)
    symbols = [f"{c}{n}" for c in letters for n in range(1, numbers + 1)]
    seen, pairs = set(), []
    attempts = 0
    while len(pairs) < size:
        attempts += 1
        if attempts > 100 * size + 1000:
            raise ValueError("could not sample enough distinct expressions; raise depth or symbols")
        x = _pcfg_sample(rng, depth, symbols, max_string)
        key = " ".join(x)
        if key in seen:
            continue
        z = interpret_pcfg(x)
        if len(z) > max_output:
            continue
        seen.add(key)
        pairs.append((x, z))
    return ParallelCorpus(pairs)


def generate_copy_task(size: int, rng: RngLike = 0, symbols: int = 6, min_len: int = 1, max_len: int = 5) -> ParallelCorpus:
    """Identity task: x == z, random strings over ``symbols`` letters."""
    rng = _rng(rng)
    alphabet = [chr(ord("a") + i) for i in range(symbols)]
    pairs, seen = [], set()
    capacity = sum(symbols**n for n in range(min_len, max_len + 1))
    if size > capacity:
        raise ValueError(f"only {capacity} distinct strings available")
    while len(pairs) < size:
        n = int(rng.integers(min_len, max_len + 1))
        s = tuple(alphabet[i] for i in rng.integers(symbols, size=n))
        if s not in seen:
            seen.add(s)
            pairs.append((list(s), list(s)))
    vocab = Vocab(alphabet)
    return ParallelCorpus(pairs, vocab, Vocab(alphabet))


# ---------------------------------------------------------------------------
# splitting and files


@dataclass
class Split:
    xz: list[tuple[Tokens, Tokens]]
    x: list[Tokens]
    z: list[Tokens]
    indices: dict = field(default_factory=dict)

    @property
    def eta(self) -> float:
        total = len(self.xz) + len(self.x) + len(self.z)
        return len(self.xz) / total if total else 0.0


def split_corpus(corpus: ParallelCorpus, eta: float, seed: RngLike = 0) -> Split:
    """Split into parallel pairs D_xz and unparallel sides D_x, D_z.

    ``ceil(eta * N)`` random pairs stay parallel. The rest is cut into two
    disjoint halves; D_x keeps only the x side of one, D_z only the z side of
    the other, so no parallel information leaks through the unparallel data.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    n = len(corpus)
    if n < 3:
        raise ValueError("corpus needs at least 3 pairs to split")
    order = _rng(seed).permutation(n)
    n_xz = min(n, math.ceil(eta * n - 1e-9))
    rest = order[n_xz:]
    n_x = (len(rest) + 1) // 2
    idx = {"xz": order[:n_xz].tolist(), "x": rest[:n_x].tolist(), "z": rest[n_x:].tolist()}
    return Split(
        xz=[corpus.pairs[i] for i in idx["xz"]],
        x=[corpus.pairs[i][0] for i in idx["x"]],
        z=[corpus.pairs[i][1] for i in idx["z"]],
        indices=idx,
    )


def write_parallel(path, pairs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, z in pairs:
            fh.write(" ".join(x) + "\t" + " ".join(z) + "\n")


def read_parallel(path) -> list[tuple[Tokens, Tokens]]:
    pairs = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{n}: expected 'x<TAB>z'")
        pairs.append((tokenize(parts[0]), tokenize(parts[1])))
    return pairs


def write_single(path, seqs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in seqs:
            fh.write(" ".join(s) + "\n")


def read_single(path) -> list[Tokens]:
    return [tokenize(l) for l in Path(path).read_text(encoding="utf-8").splitlines() if l.strip()]


def write_corpus_dir(out_dir, corpus: ParallelCorpus, splits: Optional[dict] = None) -> dict:
    """Write ``<name>.tsv`` files plus ``vocab_x.txt`` / ``vocab_z.txt``.

    ``splits`` maps file stems to either pair lists (written as TSV) or
    single-sided sequence lists (written as ``<stem>.txt``).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    splits = splits or {"corpus": corpus.pairs}
    for name, items in splits.items():
        if items and isinstance(items[0], tuple):
            path = out / f"{name}.tsv"
            write_parallel(path, items)
        else:
            path = out / f"{name}.txt"
            write_single(path, items)
        written[name] = path
    corpus.vocab_x.save(out / "vocab_x.txt")
    corpus.vocab_z.save(out / "vocab_z.txt")
    written["vocab_x"] = out / "vocab_x.txt"
    written["vocab_z"] = out / "vocab_z.txt"
    return written
