"""
Damerau-Levenshtein baseline for typo-squatting detection.

The distance is the optimal-string-alignment (restricted) variant: unit-cost
insertion, deletion, substitution and adjacent transposition, with no
substring edited twice. It is NOT a metric: dld("ca", "abc") == 3 while the
unrestricted distance is 2.
"""

from dataclasses import dataclass
from typing import Optional

from utils.errors import EmptyDataset
from utils.logger import logger


def levenshtein(a, b):
    """Plain Levenshtein distance (insertion, deletion, substitution)."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def dld(a, b, max_distance=None):
    """
    Optimal-string-alignment Damerau-Levenshtein distance.

    Args:
        a (str): First string
        b (str): Second string
        max_distance (int, optional): Stop early once the distance provably
            exceeds this bound; max_distance + 1 is returned in that case

    Returns:
        int: The OSA distance (or max_distance + 1 when cut off)
    """
    if a == b:
        return 0
    len_a, len_b = len(a), len(b)
    if max_distance is not None and abs(len_a - len_b) > max_distance:
        return max_distance + 1
    if len_a == 0 or len_b == 0:
        return max(len_a, len_b)

    two_back = None
    one_back = list(range(len_b + 1))
    for i in range(1, len_a + 1):
        current = [i] + [0] * len_b
        for j in range(1, len_b + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            value = min(
                one_back[j] + 1,  # deletion
                current[j - 1] + 1,  # insertion
                one_back[j - 1] + cost,  # substitution
            )
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                value = min(value, two_back[j - 2] + 1)  # transposition
            current[j] = value
        if max_distance is not None and min(current) > max_distance and min(one_back) > max_distance:
            # a row can only undercut both previous rows via a transposition (+1)
            return max_distance + 1
        two_back, one_back = one_back, current
    return one_back[len_b]


def within_one_edit(a, b):
    """True iff dld(a, b) <= 1, in linear time."""
    if a == b:
        return True
    len_a, len_b = len(a), len(b)
    if abs(len_a - len_b) > 1:
        return False
    if len_a == len_b:
        mismatches = [i for i in range(len_a) if a[i] != b[i]]
        if len(mismatches) == 1:
            return True
        if len(mismatches) == 2:
            i, j = mismatches
            return j == i + 1 and a[i] == b[j] and a[j] == b[i]
        return False
    if len_a > len_b:
        a, b = b, a
    # b is a with one character inserted
    i = 0
    while i < len(a) and a[i] == b[i]:
        i += 1
    return a[i:] == b[i + 1 :]


@dataclass(frozen=True)
class BaselineResult:
    query: str
    flagged: bool
    match: Optional[str]
    distance: int


def baseline_classify(candidate, checking_list, threshold=1, members=None):
    """
    Flag `candidate` if its closest checking-list domain is 0 < dld <= threshold.

    The raw minimum distance doubles as a ROC score (lower = more suspicious).
    Ties go to the lowest list index; exact members (distance 0) are not flagged.

    Args:
        candidate (str): Domain to classify
        checking_list (list[str]): Protected domains
        threshold (int): Largest distance still flagged
        members (set, optional): Precomputed set(checking_list)

    Returns:
        BaselineResult
    """
    if len(checking_list) == 0:
        raise EmptyDataset("Checking list is empty")
    members = members if members is not None else set(checking_list)

    if candidate in members:
        best_index, best = checking_list.index(candidate), 0
    else:
        best_index, best = None, None
        for index, domain in enumerate(checking_list):
            if within_one_edit(candidate, domain):
                best_index, best = index, 1
                break
        if best is None:
            for index, domain in enumerate(checking_list):
                if best is not None and abs(len(domain) - len(candidate)) >= best:
                    continue
                bound = None if best is None else best - 1
                distance = dld(candidate, domain, max_distance=bound)
                if best is None or distance < best:
                    best_index, best = index, distance

    flagged = 0 < best <= threshold
    return BaselineResult(candidate, flagged, checking_list[best_index], best)


def baseline_classify_batch(candidates, checking_list, threshold=1):
    members = set(checking_list)
    results = [baseline_classify(c, checking_list, threshold, members) for c in candidates]
    logger.info(
        f"DLD baseline flagged {sum(r.flagged for r in results)}/{len(results)} candidates"
    )
    return results
