"""Shared test utilities: corpus access and a random litmus-program generator."""

from __future__ import annotations

import random
from pathlib import Path

from wmrobust.lang import Compiled, parse

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

def corpus_names() -> list[str]:
    return sorted(p.stem for p in CORPUS.glob("*.lit"))


def load(name: str) -> Compiled:
    return Compiled.of(parse((CORPUS / f"{name}.lit").read_text()))


def ra_program_names() -> list[str]:
    """Corpus programs in the release/acquire load/store fragment covered by boolean matrices."""
    out = []
    for name in corpus_names():
        code = load(name).code
        if all(i.op in ("store", "load") and i.mode in ("acq", "rel") for c in code for i in c if i.is_atomic):
            out.append(name)
    return out


def load_text(name: str) -> str:
    return (CORPUS / f"{name}.lit").read_text()


def graph_path(name: str) -> Path:
    return CORPUS / f"{name}.json"


_LOAD_MODES = ("rlx", "acq")
_STORE_MODES = ("rlx", "rel")
_RMW_MODES = ("rlx", "acq", "rel", "acqrel")


def random_program(rng: random.Random, max_threads: int = 3, max_events: int = 6,
                   locs: tuple = ("x1", "x2")) -> str:
    """A loop-free program with at most ``max_events`` atomic accesses in total."""
    nthreads = rng.choice((2, 2, max_threads))
    budget = rng.randint(max(nthreads, max_events - 2), max_events)
    counts = [1] * nthreads
    for _ in range(budget - nthreads):
        counts[rng.randrange(nthreads)] += 1
    lines = [f"atomic {', '.join(locs)};"]
    for t, n in enumerate(counts, 1):
        lines.append(f"thread t{t} {{")
        first = rng.choice(locs)
        for i in range(n):
            # writing one location and then touching the other is what makes
            # store-buffering and message-passing shapes likely
            x = first if i == 0 else rng.choice(locs)
            if i == 0:
                kind = rng.choices(("store", "fadd", "cas"), weights=(6, 1, 1))[0]
            else:
                kind = rng.choices(("store", "load", "fadd", "cas", "fence"), weights=(3, 6, 1, 1, 1))[0]
            if kind == "store":
                lines.append(f"    {x}.store({rng.randint(1, 2)}, {rng.choice(_STORE_MODES)});")
            elif kind == "load":
                lines.append(f"    r{i} = {x}.load({rng.choice(_LOAD_MODES)});")
            elif kind == "fadd":
                lines.append(f"    r{i} = fadd({x}, 1, {rng.choice(_RMW_MODES)});")
            elif kind == "cas":
                lines.append(f"    r{i} = cas_strong({x}, {rng.randint(0, 1)}, 2, {rng.choice(_RMW_MODES)});")
            else:
                lines.append(f"    fence({rng.choice(('acq', 'rel', 'acqrel', 'sc'))});")
        lines.append("}")
    return "\n".join(lines) + "\n"


def generated_programs(count: int = 50, seed: int = 2024) -> list[tuple[str, Compiled]]:
    rng = random.Random(seed)
    out = []
    for i in range(count):
        text = random_program(rng)
        out.append((f"gen{i:02d}", Compiled.of(parse(text))))
    return out
