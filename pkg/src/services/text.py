import math
import re
from collections import Counter
from collections.abc import Iterable, Mapping
from functools import lru_cache

from nltk.stem.porter import PorterStemmer

TermVector = Counter[str]

_TOKEN_RE = re.compile(r"[^\W_]+")
_stemmer = PorterStemmer()


@lru_cache(maxsize=65536)
def stem(token: str) -> str:
    return str(_stemmer.stem(token))


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


def tokenize_and_stem(text: str) -> list[str]:
    return [stem(token) for token in tokenize(text)]


def term_vector(text: str | Iterable[str]) -> TermVector:
    """Stemmed term counts of a text (or of several texts joined)."""
    if isinstance(text, str):
        return Counter(tokenize_and_stem(text))
    counts: TermVector = Counter()
    for part in text:
        counts.update(tokenize_and_stem(part))
    return counts


def cosine_similarity(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    """dot(a, b) / (|a| |b|); 0 when either vector is empty."""
    if len(a) > len(b):
        a, b = b, a
    dot_product = sum(value * b[key] for key, value in a.items() if key in b)
    norm_a = math.sqrt(sum(v * v for v in a.values()))
    norm_b = math.sqrt(sum(v * v for v in b.values()))
    if norm_a == 0 or norm_b == 0:
        return 0.0
    return min(1.0, max(0.0, dot_product / (norm_a * norm_b)))
