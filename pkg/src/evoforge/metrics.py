"""Accuracy, ROUGE-N/L, SARI and the baseline-relative normalized score.

All text metrics share one tokenizer: lowercase and whitespace split, with optional
punctuation stripping. ROUGE scores are in [0, 1]; SARI is reported on [0, 100].
"""

from __future__ import annotations

import re
from collections import Counter
from typing import Callable, Sequence

UNPARSED = None  # a prediction the label parser could not map; never equals a gold label

_PUNCT = re.compile(r"[^\w\s]")

Tokenizer = Callable[[str], list]


def tokenize(text: str, strip_punct: bool = False) -> list[str]:
    text = text.lower()
    if strip_punct:
        text = _PUNCT.sub(" ", text)
    return text.split()


def make_tokenizer(strip_punct: bool = False) -> Tokenizer:
    return lambda text: tokenize(text, strip_punct)


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def accuracy(predictions: Sequence, golds: Sequence) -> float:
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not golds:
        raise ValueError("accuracy of an empty set")
    hits = sum(1 for p, g in zip(predictions, golds) if p is not UNPARSED and p == g)
    return hits / len(golds)


def _rouge_n_single(cand: Sequence[str], ref: Sequence[str], n: int) -> float:
    c, r = Counter(ngrams(cand, n)), Counter(ngrams(ref, n))
    if not c and not r:
        return 1.0
    if not c or not r:
        return 0.0
    matched = sum((c & r).values())
    return f1(matched / sum(c.values()), matched / sum(r.values()))


def rouge_n(candidate: str, references: Sequence[str] | str, n: int = 1,
            tokenizer: Tokenizer = tokenize) -> float:
    """ROUGE-N F1 with clipped n-gram counts, maximized over references."""
    if n < 1:
        raise ValueError("n must be >= 1")
    refs = [references] if isinstance(references, str) else list(references)
    cand = tokenizer(candidate)
    return max(_rouge_n_single(cand, tokenizer(r), n) for r in refs)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def _rouge_l_single(cand: Sequence[str], ref: Sequence[str]) -> float:
    if not cand and not ref:
        return 1.0
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    return f1(lcs / len(cand), lcs / len(ref))


def rouge_l(candidate: str, references: Sequence[str] | str,
            tokenizer: Tokenizer = tokenize) -> float:
    refs = [references] if isinstance(references, str) else list(references)
    cand = tokenizer(candidate)
    return max(_rouge_l_single(cand, tokenizer(r)) for r in refs)


# -- SARI --------------------------------------------------------------------------------

def _ratio(num: float, den: float) -> float:
    # vacuous ratio: nothing to get wrong counts as perfect
    return 1.0 if den == 0 else num / den


def sari_ngram(source: Sequence, candidate: Sequence, references: Sequence[Sequence],
               ) -> tuple[float, float, float]:
    """(keep F1, delete precision, add F1) for one n-gram order.

    Keep and delete use counts replicated by the number of references, compared against the
    pooled reference counts; add works on n-gram sets.
    """
    numref = len(references)
    ref_counts = Counter(g for ref in references for g in ref)
    src = Counter({g: c * numref for g, c in Counter(source).items()})
    cand = Counter({g: c * numref for g, c in Counter(candidate).items()})

    keep = src & cand
    keep_good = keep & ref_counts
    keep_all = src & ref_counts
    keep_p = _ratio(sum(keep_good[g] / keep[g] for g in keep_good), len(keep))
    keep_r = _ratio(sum(keep_good[g] / keep_all[g] for g in keep_good), len(keep_all))
    keep_f = f1(keep_p, keep_r)

    deleted = src - cand
    del_good = deleted - ref_counts
    del_p = _ratio(sum(del_good[g] / deleted[g] for g in del_good), len(deleted))

    added = set(cand) - set(src)
    ref_added = set(ref_counts) - set(src)
    add_good = added & ref_added
    add_f = f1(_ratio(len(add_good), len(added)), _ratio(len(add_good), len(ref_added)))
    return keep_f, del_p, add_f


def sari_components(source: str, candidate: str, references: Sequence[str],
                    tokenizer: Tokenizer = tokenize, max_n: int = 4) -> dict[str, float]:
    """Mean over n = 1..max_n of each component, on the [0, 1] scale."""
    if not references:
        raise ValueError("SARI needs at least one reference")
    s, c = tokenizer(source), tokenizer(candidate)
    rs = [tokenizer(r) for r in references]
    keep = dele = add = 0.0
    for n in range(1, max_n + 1):
        k, d, a = sari_ngram(ngrams(s, n), ngrams(c, n), [ngrams(r, n) for r in rs])
        keep, dele, add = keep + k, dele + d, add + a
    return {"keep": keep / max_n, "delete": dele / max_n, "add": add / max_n}


def sari(source: str, candidate: str, references: Sequence[str],
         tokenizer: Tokenizer = tokenize) -> float:
    comp = sari_components(source, candidate, references, tokenizer)
    return 100.0 * (comp["keep"] + comp["delete"] + comp["add"]) / 3


def normalized_score(prompt_acc: float, baseline_acc: float) -> float:
    """Accuracy gap to the baseline prompt in percentage points."""
    for v in (prompt_acc, baseline_acc):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"accuracy {v} outside [0, 1]")
    return (prompt_acc - baseline_acc) * 100.0
