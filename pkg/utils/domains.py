import re
from dataclasses import dataclass
from typing import Optional

import tldextract

HOSTNAME_PATTERN = re.compile(
    r"^(?=.{1,253}$)[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?(?:\.[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?)*$"
)
LABEL_PATTERN = re.compile(r"^[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?$")

# Bundled public-suffix snapshot only; never touches the network or a disk cache
_extract = tldextract.TLDExtract(suffix_list_urls=(), cache_dir=None)


@dataclass(frozen=True)
class DomainRecord:
    rank: int
    name: str


@dataclass(frozen=True)
class TypoPair:
    typo_domain: str
    source_domain: str


@dataclass(frozen=True)
class LabeledTestCase:
    candidate: str
    source: str
    label: str  # "typo" | "benign"
    action: str  # "deletion" | "insertion" | "substitution"
    detail: str
    kb_distance: Optional[int] = None

    @property
    def is_typo(self):
        return self.label == "typo"


def is_valid_domain(name):
    """
    Check a lowercase hostname against the DNS grammar over [a-z0-9.-].

    Args:
        name (str): Domain to check

    Returns:
        bool: True if the name is a syntactically valid hostname
    """
    return bool(HOSTNAME_PATTERN.match(name))


def is_valid_label(label):
    return bool(LABEL_PATTERN.match(label))


def split_domain(name):
    """
    Split a domain into (prefix, label, suffix) around its second-level label.

    "www.google.co.uk" -> ("www", "google", "co.uk"). Names the suffix list does
    not recognise fall back to splitting at the first dot.
    """
    parts = _extract(name)
    if parts.domain:
        return parts.subdomain, parts.domain, parts.suffix
    head, _, tail = name.partition(".")
    return "", head, tail


def join_domain(prefix, label, suffix):
    return ".".join(part for part in (prefix, label, suffix) if part)
