"""
Dataset generation for typo-squatting models.

Two products are built from a ranked domain list (plain text or a Majestic
Million style CSV):

- training pairs: permutations of each domain's second-level label produced
  by a set of typo rules (TLD preserved), written as
      typo_domain<TAB>source_domain
- a keyboard-distance labelled test set: every domain exactly one Levenshtein
  edit away from a source label, labelled by the rules
      deletion                         -> typo
      insertion / substitution, d == 1 -> typo
      insertion / substitution, d > 3  -> benign
      otherwise                        -> dropped
  where d is the Chebyshev key distance (for insertions, to the neighbouring
  characters).

USAGE (through the CLI):
    python typoswype.py gen-train --domains majestic_million.csv --top 20000 --out pairs.tsv
    python typoswype.py gen-test --domains majestic_million.csv --top 100 --out test.tsv
"""

import csv
import os

import numpy as np
import pandas as pd

from utils.domains import (
    DomainRecord,
    LabeledTestCase,
    TypoPair,
    is_valid_domain,
    is_valid_label,
    join_domain,
    split_domain,
)
from utils.errors import EmptyDataset, EmptyResult, FormatError, NoDomainColumn
from utils.io import atomic_path, atomic_write
from utils.keyboard import QWERTY
from utils.logger import logger

LABEL_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789-"
VOWELS = "aeiou"
HOMOGLYPH_PAIRS = (("o", "0"), ("l", "1"), ("i", "1"), ("e", "3"), ("a", "4"), ("s", "5"), ("b", "8"), ("g", "9"))

HOMOGLYPHS = {}
for _a, _b in HOMOGLYPH_PAIRS:
    HOMOGLYPHS.setdefault(_a, []).append(_b)
    HOMOGLYPHS.setdefault(_b, []).append(_a)

TEST_SET_COLUMNS = ["candidate", "source", "label", "action", "detail", "kb_distance"]


# --- ingestion -------------------------------------------------------------


def _read_names(path):
    """Yield (rank or None, raw name) from a plain list or a CSV with a Domain column."""
    with open(path, "r", encoding="utf-8") as f:
        first_line = f.readline()

    if "," in first_line:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        if "Domain" not in frame.columns:
            logger.error(f"No 'Domain' column in {path}: {list(frame.columns)}")
            raise NoDomainColumn(f"No 'Domain' column in {path}")
        ranks = frame["GlobalRank"] if "GlobalRank" in frame.columns else [None] * len(frame)
        yield from zip(ranks, frame["Domain"])
        return

    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                yield None, line


def ingest_domain_list(path, top_n=None):
    """
    Read the first `top_n` valid domains of a ranked list.

    Args:
        path (str): Plain text (one domain per line) or CSV with a "Domain" column
        top_n (int, optional): Maximum number of records; None keeps all

    Returns:
        list[DomainRecord]: Records in file order

    Raises:
        FileNotFoundError: if the file is missing
        NoDomainColumn: CSV without a Domain column
        EmptyResult: no valid domain found
    """
    if not os.path.exists(path):
        logger.error(f"File not found: {path}")
        raise FileNotFoundError(f"File not found: {path}")

    records = []
    skipped = 0
    for rank, raw in _read_names(path):
        if top_n is not None and len(records) >= top_n:
            break
        name = raw.strip().lower().rstrip(".")
        if not is_valid_domain(name):
            skipped += 1
            continue
        position = len(records) + 1
        try:
            rank = int(rank) if rank not in (None, "") else position
        except ValueError:
            rank = position
        records.append(DomainRecord(rank=max(rank, 1), name=name))

    if skipped:
        logger.warning(f"Skipped {skipped} invalid domain(s) in {path}")
    if not records:
        logger.error(f"No valid domains found in {path}")
        raise EmptyResult(f"No valid domains found in {path}")
    logger.info(f"Ingested {len(records)} domains from {path}")
    return records


# --- typo rules ------------------------------------------------------------


def _omission(label, layout):
    for i in range(len(label)):
        yield label[:i] + label[i + 1 :]


def _insertion(label, layout):
    for i in range(len(label) + 1):
        around = label[max(i - 1, 0) : i + 1]
        for c in LABEL_ALPHABET:
            if any(layout.keyboard_distance(c, n) <= 1 for n in around):
                yield label[:i] + c + label[i:]


def _replacement(label, layout):
    for i, c in enumerate(label):
        for r in layout.neighbours(c, 1, LABEL_ALPHABET):
            yield label[:i] + r + label[i + 1 :]


def _transposition(label, layout):
    for i in range(len(label) - 1):
        yield label[:i] + label[i + 1] + label[i] + label[i + 2 :]


def _repetition(label, layout):
    for i, c in enumerate(label):
        yield label[:i] + c + label[i:]


def _vowel_swap(label, layout):
    for i, c in enumerate(label):
        if c in VOWELS:
            for v in VOWELS:
                yield label[:i] + v + label[i + 1 :]


def _homoglyph(label, layout):
    for i, c in enumerate(label):
        for g in HOMOGLYPHS.get(c, ()):
            yield label[:i] + g + label[i + 1 :]


def _hyphenation(label, layout):
    for i in range(1, len(label)):
        yield label[:i] + "-" + label[i:]


def _addition(label, layout):
    for c in LABEL_ALPHABET[:-1]:
        yield label + c


def _bitsquatting(label, layout):
    for i, c in enumerate(label):
        for bit in range(8):
            flipped = chr(ord(c) ^ (1 << bit))
            if flipped in LABEL_ALPHABET:
                yield label[:i] + flipped + label[i + 1 :]


FUZZ_RULES = {
    "omission": _omission,
    "insertion": _insertion,
    "replacement": _replacement,
    "transposition": _transposition,
    "repetition": _repetition,
    "vowel-swap": _vowel_swap,
    "homoglyph": _homoglyph,
    "hyphenation": _hyphenation,
    "addition": _addition,
    "bitsquatting": _bitsquatting,
}
DEFAULT_RULES = (
    "omission",
    "insertion",
    "replacement",
    "transposition",
    "repetition",
    "vowel-swap",
    "homoglyph",
)


def parse_rules(text):
    """Parse a comma-separated rule list ("default" and "all" are shorthands)."""
    rules = []
    for name in (part.strip() for part in text.split(",")):
        if name == "default":
            rules.extend(DEFAULT_RULES)
        elif name == "all":
            rules.extend(FUZZ_RULES)
        elif name in FUZZ_RULES:
            rules.append(name)
        elif name:
            raise ValueError(f"Unknown fuzz rule {name!r}; known: {', '.join(FUZZ_RULES)}")
    return tuple(dict.fromkeys(rules))


def fuzz_domain(record, rules=DEFAULT_RULES, rng=None, max_per_domain=None, layout=QWERTY):
    """
    Generate typo-squatting candidates for one domain.

    Rules rewrite the second-level label only; the subdomain and public suffix
    are kept. Candidates are deduplicated, invalid hostnames and the source
    itself are removed.

    Args:
        record (DomainRecord): Source domain
        rules (iterable of str): Names from FUZZ_RULES
        rng (np.random.Generator, optional): Needed only with max_per_domain
        max_per_domain (int, optional): Keep a seeded random subset of this size

    Returns:
        list[TypoPair]: Sorted by candidate
    """
    prefix, label, suffix = split_domain(record.name)
    candidates = set()
    for rule in rules:
        if rule not in FUZZ_RULES:
            raise ValueError(f"Unknown fuzz rule {rule!r}")
        for new_label in FUZZ_RULES[rule](label, layout):
            if new_label != label and is_valid_label(new_label):
                candidates.add(join_domain(prefix, new_label, suffix))
    candidates.discard(record.name)
    ordered = sorted(candidates)

    if max_per_domain is not None and len(ordered) > max_per_domain:
        if rng is None:
            raise ValueError("max_per_domain needs a random generator")
        keep = np.sort(rng.choice(len(ordered), size=max_per_domain, replace=False))
        ordered = [ordered[i] for i in keep]
    return [TypoPair(typo_domain=c, source_domain=record.name) for c in ordered]


def generate_training_pairs(records, rules=DEFAULT_RULES, rng=None, out="pairs.tsv", max_per_domain=None):
    """
    Stream fuzz_domain over all records into a TSV (typo<TAB>source, LF, no header).

    Returns:
        int: Number of pairs written
    """
    if not records:
        raise EmptyDataset("No domain records to fuzz")
    if rng is None:
        rng = np.random.default_rng(0)

    count = 0
    with atomic_write(out) as f:
        for i, record in enumerate(records, start=1):
            for pair in fuzz_domain(record, rules, rng, max_per_domain):
                f.write(f"{pair.typo_domain}\t{pair.source_domain}\n")
                count += 1
            if i % 1000 == 0:
                logger.info(f"Fuzzed {i}/{len(records)} domains, {count} pairs so far")
    logger.success(f"Wrote {count} training pairs for {len(records)} domains to {out}")
    return count


def load_training_pairs(path):
    if not os.path.exists(path):
        logger.error(f"File not found: {path}")
        raise FileNotFoundError(f"File not found: {path}")
    frame = pd.read_csv(
        path,
        sep="\t",
        header=None,
        names=["typo_domain", "source_domain"],
        dtype=str,
        keep_default_na=False,
        quoting=csv.QUOTE_NONE,
    )
    return [TypoPair(t, s) for t, s in zip(frame["typo_domain"], frame["source_domain"])]


# --- keyboard-labelled test set -------------------------------------------


def _label_for_distance(typo_distance, benign_distance):
    if typo_distance == 1:
        return "typo"
    if benign_distance > 3:
        return "benign"
    return None


def _test_cases_for(record, sources, insertion_mode, layout):
    prefix, label, suffix = split_domain(record.name)
    seen = set()
    cases = []

    def emit(new_label, verdict, action, detail, distance):
        candidate = join_domain(prefix, new_label, suffix)
        if not is_valid_label(new_label) or candidate in sources or candidate in seen:
            return
        seen.add(candidate)
        cases.append(LabeledTestCase(candidate, record.name, verdict, action, detail, distance))

    for i, c in enumerate(label):
        emit(label[:i] + label[i + 1 :], "typo", "deletion", f"{i}:-{c}", None)

    for i in range(len(label) + 1):
        around = label[max(i - 1, 0) : i + 1]
        for c in LABEL_ALPHABET:
            distances = [layout.keyboard_distance(c, n) for n in around]
            typo_distance = min(distances) if insertion_mode == "min" else max(distances)
            verdict = _label_for_distance(typo_distance, min(distances))
            if verdict is not None:
                emit(label[:i] + c + label[i:], verdict, "insertion", f"{i}:+{c}", typo_distance)

    for i, original in enumerate(label):
        for c in LABEL_ALPHABET:
            if c == original:
                continue
            distance = layout.keyboard_distance(original, c)
            verdict = _label_for_distance(distance, distance)
            if verdict is not None:
                emit(label[:i] + c + label[i + 1 :], verdict, "substitution", f"{i}:{original}>{c}", distance)
    return cases


def generate_test_set(records, out=None, insertion_mode="min", layout=QWERTY):
    """
    Enumerate and label every one-edit neighbour of each record's label.

    Args:
        records (list[DomainRecord]): Usually the top 100 domains
        out (str, optional): TSV destination (single header row)
        insertion_mode (str): "min" labels an insertion by its closest neighbour,
            "both" requires both neighbours within one key to call it a typo

    Returns:
        list[LabeledTestCase]
    """
    if insertion_mode not in ("min", "both"):
        raise ValueError(f"insertion_mode must be 'min' or 'both', got {insertion_mode!r}")
    if not records:
        raise EmptyDataset("No domain records for the test set")

    sources = {r.name for r in records}
    cases = []
    for record in records:
        cases.extend(_test_cases_for(record, sources, insertion_mode, layout))

    typos = sum(case.is_typo for case in cases)
    logger.info(
        f"Test set: {len(cases)} cases from {len(records)} domains, "
        f"typo prevalence {typos / max(len(cases), 1):.3f}"
    )
    if out is not None:
        frame = pd.DataFrame(
            [
                (c.candidate, c.source, c.label, c.action, c.detail, "" if c.kb_distance is None else c.kb_distance)
                for c in cases
            ],
            columns=TEST_SET_COLUMNS,
        )
        with atomic_path(out) as tmp_path:
            frame.to_csv(tmp_path, sep="\t", index=False, lineterminator="\n")
        logger.success(f"Wrote test set to {out}")
    return cases


def load_test_set(path):
    if not os.path.exists(path):
        logger.error(f"File not found: {path}")
        raise FileNotFoundError(f"File not found: {path}")
    frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, quoting=csv.QUOTE_NONE)
    missing = [c for c in TEST_SET_COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(f"Test set {path} lacks columns {missing}")
    return [
        LabeledTestCase(
            candidate=row.candidate,
            source=row.source,
            label=row.label,
            action=row.action,
            detail=row.detail,
            kb_distance=int(row.kb_distance) if row.kb_distance != "" else None,
        )
        for row in frame.itertuples(index=False)
    ]
