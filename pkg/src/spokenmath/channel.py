"""Seeded noise channel that stands in for TTS + real speech recognizers.

Each ChannelProfile plays the role of one ASR system: it has its own
confusion table (specific word mishearings with their own probabilities),
generic substitution/deletion/insertion rates, and an equivalence-rewrite
rate that swaps digit and word forms of numbers without changing meaning.

Corruption walks the utterance word by word, drawing events in a fixed
order (rewrite, substitute, delete, insert-after) from one seeded RNG, so a
given (text, profile, seed) triple always yields the same output.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from . import latex as lx
from .lexicon import EQUIVALENT_FORMS
from .spoken import parse_spoken
from .util import derive_seed
from .verbalize import GrammarConfig, VerbalStyle, default_styles, sample_expression, verbalize

DEFAULT_SUBSTITUTION_RATE = 0.08
DEFAULT_DELETION_RATE = 0.02
DEFAULT_INSERTION_RATE = 0.02
DEFAULT_REWRITE_RATE = 0.15

FILLER_WORDS = ("the", "a", "and", "uh", "um", "so", "is", "we", "that", "it")


@dataclass(frozen=True)
class ChannelProfile:
    """One simulated recognizer's error behaviour."""

    name: str
    confusion_table: dict = field(default_factory=dict)  # word -> [(replacement, prob)]
    word_substitution_rate: float = DEFAULT_SUBSTITUTION_RATE
    word_deletion_rate: float = DEFAULT_DELETION_RATE
    word_insertion_rate: float = DEFAULT_INSERTION_RATE
    equivalence_rewrite_rate: float = DEFAULT_REWRITE_RATE
    insertion_lexicon: tuple = FILLER_WORDS

    def __post_init__(self):
        for rate_name in ("word_substitution_rate", "word_deletion_rate",
                          "word_insertion_rate", "equivalence_rewrite_rate"):
            rate = getattr(self, rate_name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{rate_name} must be in [0, 1], got {rate}")
        for word, entries in self.confusion_table.items():
            total = 0.0
            for replacement, prob in entries:
                if not 0.0 <= prob <= 1.0:
                    raise ValueError(f"confusion prob for {word!r}->{replacement!r} out of [0, 1]")
                total += prob
            if total > 1.0 + 1e-9:
                raise ValueError(f"confusion probs for {word!r} sum to {total} > 1")
        if (self.word_substitution_rate > 0 or self.word_insertion_rate > 0) \
                and not self.insertion_lexicon:
            raise ValueError("substitution/insertion need a non-empty insertion_lexicon")

    def silence(self) -> "ChannelProfile":
        """A copy with every rate zeroed, confusion entries included; the identity channel."""
        return ChannelProfile(self.name, {}, 0.0, 0.0, 0.0, 0.0, self.insertion_lexicon)


def load_confusion_table(path_or_text) -> dict:
    """Parse a confusion data file: 'source<TAB>replacement<TAB>probability' lines."""
    if isinstance(path_or_text, Path):
        text = path_or_text.read_text(encoding="utf-8")
    else:
        text = path_or_text
    table: dict[str, list[tuple[str, float]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'source\\treplacement\\tweight'")
        source, replacement, weight = parts
        table.setdefault(source, []).append((replacement, float(weight)))
    return table


def builtin_profiles() -> list[ChannelProfile]:
    """The two stock recognizer profiles shipped with the package."""
    profiles = []
    for name, filename in (("channel-a", "channel_a.tsv"), ("channel-b", "channel_b.tsv")):
        text = resources.files("spokenmath.data").joinpath(filename).read_text(encoding="utf-8")
        profiles.append(ChannelProfile(name=name, confusion_table=load_confusion_table(text)))
    return profiles


def corrupt(se: str, profile: ChannelProfile, seed: int) -> str:
    """Run one utterance through the channel; deterministic given the seed."""
    text, _ = corrupt_with_stats(se, profile, seed)
    return text


def corrupt_with_stats(se: str, profile: ChannelProfile, seed: int) -> tuple[str, dict]:
    if not se:
        raise ValueError("cannot corrupt an empty utterance")
    rng = random.Random(seed)
    stats = {"words": 0, "rewrites": 0, "substitutions": 0, "deletions": 0, "insertions": 0}
    out: list[str] = []
    for word in se.split():
        stats["words"] += 1
        # event order is fixed: rewrite, substitute, delete, insert-after
        if word in EQUIVALENT_FORMS and rng.random() < profile.equivalence_rewrite_rate:
            word = EQUIVALENT_FORMS[word]
            stats["rewrites"] += 1
        substituted = False
        entries = profile.confusion_table.get(word)
        if entries:
            roll = rng.random()
            acc = 0.0
            for replacement, prob in entries:
                acc += prob
                if roll < acc:
                    word = replacement
                    substituted = True
                    stats["substitutions"] += 1
                    break
        if not substituted and rng.random() < profile.word_substitution_rate:
            word = rng.choice(profile.insertion_lexicon)
            stats["substitutions"] += 1
        deleted = rng.random() < profile.word_deletion_rate
        if deleted:
            stats["deletions"] += 1
        else:
            out.append(word)
        if rng.random() < profile.word_insertion_rate:
            out.append(rng.choice(profile.insertion_lexicon))
            stats["insertions"] += 1
    return " ".join(out), stats


# ---------------------------------------------------------------------------
# corpus records

@dataclass(frozen=True)
class MathSample:
    """One corpus record: ground truth plus per-profile corrupted hypotheses."""

    id: int
    latex: str
    se: str
    asr: dict  # profile name -> corrupted text

    def to_json_line(self) -> str:
        payload = {"id": self.id, "latex": self.latex, "se": self.se,
                   "asr": dict(sorted(self.asr.items()))}
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "MathSample":
        payload = json.loads(line)
        return cls(id=payload["id"], latex=payload["latex"], se=payload["se"],
                   asr=dict(payload["asr"]))

    def hypotheses(self) -> list[str]:
        """Corrupted texts in fixed profile-name order."""
        return [self.asr[name] for name in sorted(self.asr)]


def save_corpus(samples: Iterable[MathSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(sample.to_json_line() + "\n")


def load_corpus(path) -> list[MathSample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(MathSample.from_json_line(line))
    return samples


class CorpusGenerationError(Exception):
    pass


def make_record(index: int, cfg: GrammarConfig, profiles: list[ChannelProfile],
                styles: list[VerbalStyle], master_seed: int,
                max_se_chars: int = 60, max_latex_chars: int = 48) -> MathSample:
    """Build record `index`; depends only on (index, config, master_seed).

    Expressions whose verbalization or LaTeX overflows the sequence budget
    are resampled from a per-attempt seed, keeping records independent.
    """
    for attempt in range(200):
        expr_seed = derive_seed(master_seed, index, "expr", attempt)
        ast = sample_expression(cfg, expr_seed)
        latex = lx.render_latex(ast)
        style = styles[derive_seed(master_seed, index, "style") % len(styles)]
        se = verbalize(ast, style)
        if len(se) <= max_se_chars and len(latex) <= max_latex_chars:
            break
    else:
        raise CorpusGenerationError(
            f"record {index}: no expression fit within {max_se_chars} chars after 200 attempts")
    if lx.normalize_latex(parse_spoken(se)) != lx.normalize_latex(latex):
        raise CorpusGenerationError(f"record {index}: round-trip self-check failed for {se!r}")
    asr = {p.name: corrupt(se, p, derive_seed(master_seed, index, "asr", p.name))
           for p in profiles}
    return MathSample(id=index, latex=latex, se=se, asr=asr)


def generate_corpus(n: int, cfg: GrammarConfig, profiles: list[ChannelProfile],
                    styles: list[VerbalStyle] | None = None, master_seed: int = 0,
                    max_se_chars: int = 60, max_latex_chars: int = 48) -> list[MathSample]:
    """Generate n self-consistent records with per-profile corrupted hypotheses."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(profiles) < 2:
        raise ValueError("need at least 2 channel profiles")
    if len({p.name for p in profiles}) != len(profiles):
        raise ValueError("profile names must be unique")
    styles = styles or default_styles()
    return [make_record(i, cfg, profiles, styles, master_seed, max_se_chars, max_latex_chars)
            for i in range(n)]
