"""Task-completion metrics (GP, SR, SPL, PWSR) and language metrics (BLEU-2, ROUGE-L)."""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .world import WorldGraph, shortest_path

DEFAULT_SUCCESS_RADIUS = 3.0

_WORD_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


def goal_progress(g: WorldGraph, start: str, end: str, goal: str) -> float:
    """Reduction in shortest-path distance to the goal: d(start, goal) - d(end, goal)."""
    _, d_start = shortest_path(g, start, goal)
    _, d_end = shortest_path(g, end, goal)
    return d_start - d_end

def goal_progress_from_taken(g: WorldGraph, taken_length: float, end: str,
                             goal: str) -> float:
    """Alternative reading: trajectory length walked minus remaining distance to goal."""
    _, d_end = shortest_path(g, end, goal)
    return taken_length - d_end


def success(g: WorldGraph, end: str, goal: str,
            radius: float = DEFAULT_SUCCESS_RADIUS) -> bool:
    """True iff the final node lies within the closed ball of the given radius around goal."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    _, d_end = shortest_path(g, end, goal)
    return d_end <= radius


@dataclass(frozen=True)
class EpisodeStats:
    """The per-episode quantities the path-weighted metrics need."""
    success: bool
    shortest_length: float  # l_i > 0
    taken_length: float     # p_i >= 0


def spl(episodes: Sequence[EpisodeStats]) -> float:
    """Success weighted by inverse path length: mean of S_i * l_i / max(p_i, l_i)."""
    if not episodes:
        raise ValueError("spl of an empty episode list")
    total = 0.0
    for e in episodes:
        if e.shortest_length <= 0:
            raise ValueError("shortest_length must be positive")
        if e.success:
            total += e.shortest_length / max(e.taken_length, e.shortest_length)
    return total / len(episodes)


def pwsr(episodes: Sequence[EpisodeStats]) -> float:
    """Path Weighted Success Rate; same formula family as SPL under its DialFRED name."""
    return spl(episodes)


def _tokens(text: str | Sequence[str]) -> list[str]:
    if isinstance(text, str):
        return _WORD_RE.findall(text.lower())
    return [t.lower() for t in text]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu2(candidate: str | Sequence[str],
          references: Iterable[str | Sequence[str]],
          eps: float = 1e-9) -> float:
    """Geometric mean of clipped 1-/2-gram precision times brevity penalty.

    Zero precisions are replaced by eps so disjoint inputs score near but not
    exactly zero.
    """
    cand = _tokens(candidate)
    refs = [_tokens(r) for r in references]
    if not cand or not refs:
        return 0.0
    precisions = []
    for n in (1, 2):
        cand_counts = _ngrams(cand, n)
        total = sum(cand_counts.values())
        if total == 0:
            precisions.append(eps)
            continue
        max_ref = Counter()
        for ref in refs:
            for gram, count in _ngrams(ref, n).items():
                max_ref[gram] = max(max_ref[gram], count)
        clipped = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
        precisions.append(clipped / total if clipped > 0 else eps)
    c = len(cand)
    r = min((abs(len(ref) - c), len(ref)) for ref in refs)[1]
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.sqrt(precisions[0] * precisions[1])


def rouge_l(candidate: str | Sequence[str], reference: str | Sequence[str]) -> float:
    """LCS-based F1 (beta = 1)."""
    cand = _tokens(candidate)
    ref = _tokens(reference)
    if not cand or not ref:
        return 0.0
    m, n = len(cand), len(ref)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if cand[i - 1] == ref[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    lcs = table[m][n]
    if lcs == 0:
        return 0.0
    precision = lcs / m
    recall = lcs / n
    return 2 * precision * recall / (precision + recall)


@dataclass
class MetricReport:
    """Aggregated metrics for one split of episodes."""

    split: str
    count: int
    gp: float
    sr: float
    spl: float
    pwsr: float
    bleu2: float | None = None
    rouge_l: float | None = None

    @staticmethod
    def aggregate(split: str, gp_values: Sequence[float],
                  stats: Sequence[EpisodeStats],
                  bleu_values: Sequence[float] | None = None,
                  rouge_values: Sequence[float] | None = None) -> "MetricReport":
        if len(gp_values) != len(stats) or not stats:
            raise ValueError("mismatched or empty episode metric inputs")
        return MetricReport(
            split=split,
            count=len(stats),
            gp=sum(gp_values) / len(gp_values),
            sr=sum(1.0 for s in stats if s.success) / len(stats),
            spl=spl(stats),
            pwsr=pwsr(stats),
            bleu2=(sum(bleu_values) / len(bleu_values)) if bleu_values else None,
            rouge_l=(sum(rouge_values) / len(rouge_values)) if rouge_values else None,
        )

    def to_json_dict(self) -> dict:
        doc = {
            "split": self.split,
            "count": self.count,
            "gp": self.gp,
            "sr": self.sr,
            "spl": self.spl,
            "pwsr": self.pwsr,
        }
        if self.bleu2 is not None:
            doc["bleu2"] = self.bleu2
        if self.rouge_l is not None:
            doc["rouge_l"] = self.rouge_l
        return doc
